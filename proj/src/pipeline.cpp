#include "inhomarkov/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "inhomarkov/count_estimators.hpp"
#include "inhomarkov/csv.hpp"
#include "inhomarkov/operator_diagnostics.hpp"
#include "inhomarkov/operator_models.hpp"
#include "inhomarkov/stats.hpp"
#include "inhomarkov/synthetic.hpp"

namespace inhomarkov {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Sub-seed offsets from the master seed.
constexpr std::uint64_t kSeedSynthData = 1;
constexpr std::uint64_t kSeedSynthPrices = 2;
constexpr std::uint64_t kSeedInitConditioned = 100;
constexpr std::uint64_t kSeedTrainConditioned = 200;
constexpr std::uint64_t kSeedInitFree = 300;
constexpr std::uint64_t kSeedTrainFree = 400;
constexpr std::uint64_t kSeedForwardShift = 50;
constexpr std::uint64_t kSeedBootstrap = 1000;

const char* kind_name(LabelKind kind) { return kind == LabelKind::state_to_state ? "state" : "forward"; }

std::string horizon_tag(const HorizonSpec& spec) { return fmt::format("{}_h{}", kind_name(spec.kind), spec.horizon); }

std::uint64_t horizon_offset(const HorizonSpec& spec) {
  return spec.horizon + (spec.kind == LabelKind::forward_return ? kSeedForwardShift : 0);
}

std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

fs::path checkpoint_path(const RunConfig& c, const char* model, const HorizonSpec& spec) {
  return c.out_dir / "checkpoints" / fmt::format("{}_{}.json", model, horizon_tag(spec));
}

// Artifacts written by cmd_ingest, on the state timeline.
struct Ingested {
  std::vector<std::string> dates;
  std::vector<double> prices;  // price on the date of each state's return
  std::vector<double> returns;
  StateSeries states;
  Matrix features;
  std::vector<std::string> feature_names;
  SplitIndex split;
  BinEdges state_edges;

  std::size_t size() const { return returns.size(); }
};

Ingested load_ingested(const RunConfig& c) {
  const fs::path dataset = c.out_dir / "dataset.csv";
  if (!fs::exists(dataset)) throw InputError(fmt::format("missing '{}'; run ingest first", dataset.string()));
  const csv::Table table = csv::read(dataset);
  Ingested data;
  const std::size_t first_feature = 5;
  if (table.header.size() < first_feature || table.header[0] != "t" || table.header[4] != "state")
    throw InputError("dataset.csv has an unexpected header");
  data.feature_names.assign(table.header.begin() + first_feature, table.header.end());
  data.state_edges = bin_edges_from_json(csv::read_text(c.out_dir / "state_bins.json"));
  data.states.n = data.state_edges.bins();
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  data.features.resize(rows, static_cast<Eigen::Index>(data.feature_names.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    data.dates.push_back(row[1]);
    data.prices.push_back(csv::parse_double(row[2], "dataset price"));
    data.returns.push_back(csv::parse_double(row[3], "dataset return"));
    const auto s = static_cast<int>(csv::parse_double(row[4], "dataset state"));
    if (s < 0 || static_cast<std::size_t>(s) >= data.states.n) throw InputError(fmt::format("dataset row {}: bad state", r));
    data.states.states.push_back(s);
    for (std::size_t j = first_feature; j < row.size(); ++j)
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j - first_feature)) =
          csv::parse_double(row[j], "dataset feature");
  }
  const auto split = nlohmann::json::parse(csv::read_text(c.out_dir / "split.json"));
  data.split = {split.at("train_end").get<std::size_t>(), split.at("val_end").get<std::size_t>(),
                split.at("total").get<std::size_t>()};
  if (data.split.total != data.size()) throw InputError("split.json does not match dataset.csv");
  return data;
}

LabelSeries make_labels(const Ingested& data, const HorizonSpec& spec) {
  if (spec.kind == LabelKind::state_to_state) return state_labels(data.states, spec.horizon);
  return forward_return_labels(data.prices, spec.horizon, spec.label_bins, data.split.train_end);
}

const BinEdges& label_edges(const Ingested& data, const LabelSeries& labels) {
  return labels.kind == LabelKind::state_to_state ? data.state_edges : labels.edges;
}

StateConditionedModel load_conditioned(const RunConfig& c, const HorizonSpec& spec) {
  const fs::path p = checkpoint_path(c, "state_conditioned", spec);
  if (!fs::exists(p)) throw InputError(fmt::format("missing checkpoint '{}'; run train first", p.string()));
  return state_conditioned_from_json(csv::read_text(p));
}

StateFreeModel load_free(const RunConfig& c, const HorizonSpec& spec) {
  const fs::path p = checkpoint_path(c, "state_free", spec);
  if (!fs::exists(p)) throw InputError(fmt::format("missing checkpoint '{}'; run train first", p.string()));
  return state_free_from_json(csv::read_text(p));
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_nll,val_nll\n";
  for (const auto& r : history)
    out += fmt::format("{},{},{}\n", r.epoch, csv::format_double(r.train_nll), csv::format_double(r.val_nll));
  return out;
}

std::vector<double> column_of(const DiagnosticsSeries& series, double DiagnosticRecord::*field) {
  std::vector<double> out;
  for (const auto& r : series.records) out.push_back(r.*field);
  return out;
}

ojson pearson_or_null(std::span<const double> x, std::span<const double> rv) {
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isnan(rv[i])) {
      a.push_back(x[i]);
      b.push_back(rv[i]);
    }
  try {
    return to_json(pearson(a, b));
  } catch (const InputError&) {
    return nullptr;
  }
}

std::vector<std::size_t> negative_event(const BinEdges& edges) {
  std::vector<std::size_t> event;
  for (std::size_t j = 0; j < edges.interior.size(); ++j)
    if (edges.interior[j] <= 0.0) event.push_back(j);
  return event;
}

}  // namespace

fs::path ingest_source(const RunConfig& config) {
  return config.source == DataSource::synthetic ? config.out_dir / "synthetic.csv" : config.data_path;
}

void cmd_synth(const RunConfig& c, std::ostream& log) {
  if (c.source != DataSource::synthetic) throw InputError("synth needs data.source = synthetic");
  SyntheticSpec spec = two_regime_spec(c.synth_states, c.synth_persistence, c.synth_noise_sigma,
                                       c.sub_seed(kSeedSynthData), c.synth_stay);
  const GroundTruth truth = generate(spec, c.synth_length, spec.seed);
  csv::write_text(c.out_dir / "synthetic.csv", to_ingest_csv(truth, c.sub_seed(kSeedSynthPrices)));
  csv::write_text(c.out_dir / "synthetic_truth.json", truth_to_json(spec, truth));
  log << fmt::format("synth: {} steps, {} states, {} regimes -> {}\n", truth.size(), spec.n, spec.regimes.size(),
                     (c.out_dir / "synthetic.csv").string());
}

void cmd_ingest(const RunConfig& c, std::ostream& log) {
  const fs::path source = ingest_source(c);
  const RawSeries raw = read_raw_series(source, c.fill_modes, c.default_fill);
  const std::vector<Date> grid = raw.price_grid();
  const std::vector<double> grid_prices = raw.grid_prices();
  const std::vector<double> all_returns = compute_returns(grid_prices);
  const AlignedFeatures aligned = align_features(raw, grid, c.align);

  // State t carries the return ending at grid position t+1; keep the states
  // whose date has every retained feature.
  const std::size_t first = aligned.first_row > 0 ? aligned.first_row - 1 : 0;
  if (first >= all_returns.size()) throw InputError("no rows left after aligning features");
  const std::size_t T = all_returns.size() - first;
  const SplitIndex split = chronological_split(T, c.train_fraction, c.val_fraction);

  const std::vector<double> returns(all_returns.begin() + static_cast<std::ptrdiff_t>(first), all_returns.end());
  const Matrix raw_features =
      aligned.values.middleRows(static_cast<Eigen::Index>(first + 1 - aligned.first_row), static_cast<Eigen::Index>(T));
  FeatureMatrix features = standardize(raw_features, aligned.names, split);

  const BinEdges edges = fit_quantile_bins(std::span(returns).first(split.train_end), c.states);
  const StateSeries states = discretize(returns, edges);

  std::vector<double> mi(features.cols(), 0.0);
  std::vector<std::size_t> selected(features.cols());
  std::iota(selected.begin(), selected.end(), 0);
  if (features.cols() > 0) {
    const LabelSeries one_step = state_labels(states, 1);
    mi = feature_mutual_information(features.values, one_step, split, c.mi_bins);
    const std::size_t k = c.top_k == 0 ? features.cols() : c.top_k;
    selected = rank_features_mi(features.values, one_step, split, k, c.mi_bins);
  }
  if (selected.empty()) throw InputError("no features survived alignment and standardization");

  std::string ranking = "rank,feature,mutual_information,selected\n";
  {
    std::vector<std::size_t> order(features.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mi[a] > mi[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) {
      const bool kept = std::find(selected.begin(), selected.end(), order[r]) != selected.end();
      ranking += fmt::format("{},{},{},{}\n", r, features.names[order[r]], csv::format_double(mi[order[r]]), kept ? 1 : 0);
    }
  }
  std::sort(selected.begin(), selected.end());

  std::string dataset = "t,date,price,return,state";
  for (std::size_t j : selected) dataset += "," + features.names[j];
  dataset += '\n';
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t g = first + t + 1;
    dataset += fmt::format("{},{},{},{},{}", t, format_date(grid[g]), csv::format_double(grid_prices[g]),
                           csv::format_double(returns[t]), states.states[t]);
    for (std::size_t j : selected)
      dataset += "," + csv::format_double(features.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
    dataset += '\n';
  }

  std::string aligned_csv = "date";
  for (const auto& name : aligned.names) aligned_csv += "," + name;
  aligned_csv += '\n';
  for (Eigen::Index r = 0; r < aligned.values.rows(); ++r) {
    aligned_csv += format_date(grid[aligned.first_row + static_cast<std::size_t>(r)]);
    for (Eigen::Index j = 0; j < aligned.values.cols(); ++j) aligned_csv += "," + csv::format_double(aligned.values(r, j));
    aligned_csv += '\n';
  }

  ojson split_json{{"train_end", split.train_end}, {"val_end", split.val_end}, {"total", split.total}};
  ojson standardization;
  standardization["features"] = features.names;
  standardization["train_mean"] = std::vector<double>(features.train_mean.data(), features.train_mean.data() + features.train_mean.size());
  standardization["train_std"] = std::vector<double>(features.train_std.data(), features.train_std.data() + features.train_std.size());

  ojson report;
  report["source"] = source.filename().string();
  report["grid_rows"] = grid.size();
  report["first_date"] = format_date(grid[first + 1]);
  report["timesteps"] = T;
  report["split"] = split_json;
  std::vector<std::string> retained;
  for (std::size_t j : selected) retained.push_back(features.names[j]);
  report["retained_features"] = retained;
  auto dropped = ojson::array();
  for (const auto& d : aligned.dropped) dropped.push_back({{"feature", d.name}, {"stage", "align"}, {"reason", d.reason}});
  for (const auto& d : features.dropped) dropped.push_back({{"feature", d.name}, {"stage", "standardize"}, {"reason", d.reason}});
  for (std::size_t j = 0; j < features.cols(); ++j)
    if (!std::binary_search(selected.begin(), selected.end(), j))
      dropped.push_back({{"feature", features.names[j]}, {"stage", "rank"}, {"reason", "outside the mutual-information top-k"}});
  report["dropped_features"] = std::move(dropped);
  report["states"] = {{"requested", edges.requested}, {"effective", edges.bins()}, {"collapsed", edges.collapsed()}};

  csv::write_text(c.out_dir / "dataset.csv", dataset);
  csv::write_text(c.out_dir / "aligned_features.csv", aligned_csv);
  csv::write_text(c.out_dir / "split.json", json_text(split_json));
  csv::write_text(c.out_dir / "state_bins.json", to_json(edges));
  csv::write_text(c.out_dir / "standardization.json", json_text(standardization));
  csv::write_text(c.out_dir / "feature_ranking.csv", ranking);
  csv::write_text(c.out_dir / "ingest_report.json", json_text(report));

  log << fmt::format("ingest: {} timesteps, {} features retained, {} dropped, {} states{}\n", T, retained.size(),
                     report["dropped_features"].size(), edges.bins(), edges.collapsed() ? " (collapsed)" : "");
  for (const auto& d : report["dropped_features"])
    log << fmt::format("  dropped {} ({}): {}\n", d["feature"].get<std::string>(), d["stage"].get<std::string>(),
                       d["reason"].get<std::string>());
}

void cmd_train(const RunConfig& c, std::ostream& log) {
  const Ingested data = load_ingested(c);
  const std::size_t d = data.feature_names.size();
  ojson summary = ojson::array();
  for (const auto& spec : c.horizons) {
    const LabelSeries labels = make_labels(data, spec);
    const std::string tag = horizon_tag(spec);
    if (spec.kind == LabelKind::forward_return)
      csv::write_text(c.out_dir / fmt::format("label_bins_{}.json", tag), to_json(labels.edges));
    const std::size_t train_end = data.split.train_end;
    const std::size_t val_end = data.split.val_end;

    const CountMatrix counts = count_transitions(data.states, labels, 0, train_end);
    const double alpha = *std::min_element(c.smoothing.alphas.begin(), c.smoothing.alphas.end());
    const Vector marginal = marginal_estimator(counts, alpha);
    std::span<const int> val_labels(labels.labels.data() + train_end, std::min(val_end, labels.size()) - train_end);
    Matrix marginal_rows(static_cast<Eigen::Index>(val_labels.size()), marginal.size());
    marginal_rows.rowwise() = marginal.transpose();
    const double marginal_val = mean_nll(marginal_rows, val_labels);

    auto run = [&](const char* model, const MlpParams& init, const Dataset& train_set, const Dataset& val_set,
                   std::uint64_t seed_offset, auto make_model) {
      TrainConfig tc = c.train;
      tc.seed = c.sub_seed(seed_offset + horizon_offset(spec));
      const TrainResult result = train(init, train_set, val_set, tc);
      csv::write_text(c.out_dir / "history" / fmt::format("{}_{}.csv", model, tag), history_csv(result.history));
      if (result.diverged) throw NumericalError(fmt::format("{} {} diverged: {}", model, tag, result.message));
      csv::write_text(checkpoint_path(c, model, spec), model_to_json(make_model(result.best), tc));
      const double best_val = result.history[result.best_epoch - 1].val_nll;
      log << fmt::format("train: {} {}: {} epochs, best epoch {}, val NLL {:.5f} (marginal {:.5f})\n", model, tag,
                         result.history.size(), result.best_epoch, best_val, marginal_val);
      summary.push_back({{"model", model},
                         {"target", tag},
                         {"epochs", result.history.size()},
                         {"best_epoch", result.best_epoch},
                         {"best_val_nll", best_val},
                         {"marginal_val_nll", marginal_val}});
    };

    const std::size_t n = data.states.n;
    const std::size_t m = labels.m;
    run("state_conditioned", init_params(default_widths(n + d, m), c.sub_seed(kSeedInitConditioned + horizon_offset(spec))),
        make_state_conditioned_dataset(data.states, labels, data.features, 0, train_end),
        make_state_conditioned_dataset(data.states, labels, data.features, train_end, val_end), kSeedTrainConditioned,
        [&](const MlpParams& p) { return StateConditionedModel{p, n, d, m, spec.horizon}; });
    run("state_free", init_params(default_widths(d, m), c.sub_seed(kSeedInitFree + horizon_offset(spec))),
        make_state_free_dataset(labels, data.features, 0, train_end),
        make_state_free_dataset(labels, data.features, train_end, val_end), kSeedTrainFree,
        [&](const MlpParams& p) { return StateFreeModel{p, n, d, m, spec.horizon}; });
  }
  csv::write_text(c.out_dir / "train_summary.json", json_text(summary));
}

void cmd_diagnose(const RunConfig& c, std::ostream& log) {
  const HorizonSpec* one_step = c.find_horizon(1, LabelKind::state_to_state);
  if (!one_step) throw InputError("diagnose needs a one-step state-to-state horizon in the config");
  const Ingested data = load_ingested(c);
  const auto conditioned = load_conditioned(c, *one_step);
  const auto free = load_free(c, *one_step);
  const std::size_t T = data.size();

  const auto sc_series = operator_series(conditioned, data.features, 0, T);
  const auto sf_series = operator_series(free, data.features, 0, T);
  const DiagnosticsSeries sc = diagnostics_series(sc_series, "state_conditioned");
  const DiagnosticsSeries sf = diagnostics_series(sf_series, "state_free");
  const std::vector<double> rv = realized_variance(data.returns, c.rv_window);

  std::string rv_csv = "t,rv\n";
  for (std::size_t t = 0; t < T; ++t) rv_csv += fmt::format("{},{}\n", t, std::isnan(rv[t]) ? "" : csv::format_double(rv[t]));

  ojson models = ojson::array();
  for (const auto* series : {&sc, &sf}) {
    ojson entry;
    entry["model"] = series->model;
    entry["pearson_entropy_rv"] = pearson_or_null(column_of(*series, &DiagnosticRecord::entropy), rv);
    entry["pearson_rho_rv"] = pearson_or_null(column_of(*series, &DiagnosticRecord::rho), rv);
    entry["stratification"] = to_json(regime_stratify(*series, rv, c.tail_fraction));
    models.push_back(std::move(entry));
  }
  ojson report;
  report["rv_window"] = c.rv_window;
  report["tail_fraction"] = c.tail_fraction;
  report["timesteps"] = T;
  report["models"] = std::move(models);

  csv::write_text(c.out_dir / "diagnostics_state_conditioned.csv", diagnostics_to_csv(sc));
  csv::write_text(c.out_dir / "diagnostics_state_free.csv", diagnostics_to_csv(sf));
  csv::write_text(c.out_dir / "realized_variance.csv", rv_csv);
  csv::write_text(c.out_dir / "stratification.json", json_text(report));
  if (c.export_operators) {
    const std::vector<OperatorSnapshot> sc_test(sc_series.begin() + static_cast<std::ptrdiff_t>(data.split.val_end), sc_series.end());
    const std::vector<OperatorSnapshot> sf_test(sf_series.begin() + static_cast<std::ptrdiff_t>(data.split.val_end), sf_series.end());
    csv::write_text(c.out_dir / "operators_state_conditioned_state_h1.jsonl", series_to_jsonl(sc_test));
    csv::write_text(c.out_dir / "operators_state_free_state_h1.jsonl", series_to_jsonl(sf_test));
  }

  auto avg = [](const DiagnosticsSeries& s, double DiagnosticRecord::*f) {
    double sum = 0.0;
    for (const auto& r : s.records) sum += r.*f;
    return sum / static_cast<double>(s.records.size());
  };
  for (const auto* s : {&sc, &sf})
    log << fmt::format("diagnose: {}: mean rho {:.4f}, mean H {:.4f}, mean delta {:.4f}\n", s->model,
                       avg(*s, &DiagnosticRecord::rho), avg(*s, &DiagnosticRecord::entropy),
                       avg(*s, &DiagnosticRecord::dobrushin));
}

void cmd_ck(const RunConfig& c, std::ostream& log) {
  const HorizonSpec* one_step = c.find_horizon(1, LabelKind::state_to_state);
  if (!one_step) throw InputError("ck needs a one-step state-to-state horizon in the config");
  std::vector<std::size_t> horizons = c.ck_horizons;
  if (horizons.empty())
    for (const auto& spec : c.horizons)
      if (spec.kind == LabelKind::state_to_state && spec.horizon > 1) horizons.push_back(spec.horizon);
  if (horizons.empty()) throw InputError("ck needs at least one state-to-state horizon (set ck.horizons)");

  const Ingested data = load_ingested(c);
  const std::size_t begin = data.split.val_end;
  const std::size_t T = data.size();
  const auto sc_one = operator_series(load_conditioned(c, *one_step), data.features, begin, T);
  const auto sf_one = operator_series(load_free(c, *one_step), data.features, begin, T);

  for (std::size_t h : horizons) {
    const HorizonSpec* spec = c.find_horizon(h, LabelKind::state_to_state);
    if (!spec) throw InputError(fmt::format("ck horizon {} has no state-to-state model in the config", h));
    if (h == 1) log << "ck: h = 1 composes a single operator; discrepancies are identically zero\n";
    const std::size_t end = T - std::min(T, h - 1);
    const auto sc_direct = operator_series(load_conditioned(c, *spec), data.features, begin, std::max(begin, end));
    const auto sf_direct = operator_series(load_free(c, *spec), data.features, begin, std::max(begin, end));
    const CkReport sc = ck_report(sc_direct, sc_one, h, "state_conditioned");
    const CkReport sf = ck_report(sf_direct, sf_one, h, "state_free");
    csv::write_text(c.out_dir / fmt::format("ck_state_conditioned_h{}.csv", h), ck_to_csv(sc));
    csv::write_text(c.out_dir / fmt::format("ck_state_free_h{}.csv", h), ck_to_csv(sf));
    ojson summary;
    summary["horizon"] = h;
    summary["range"] = {begin, end};
    summary["models"] = ojson::array();
    for (const auto* r : {&sc, &sf})
      summary["models"].push_back(
          {{"model", r->model}, {"mean_kl", r->mean_kl()}, {"mean_tv", r->mean_tv()}, {"count", r->records.size()}});
    csv::write_text(c.out_dir / fmt::format("ck_summary_h{}.json", h), json_text(summary));
    log << fmt::format("ck: h = {}: state_conditioned mean KL {:.5f}, state_free mean KL {:.5f} over {} steps\n", h,
                       sc.mean_kl(), sf.mean_kl(), sc.records.size());
  }
}

void cmd_eval(const RunConfig& c, std::ostream& log) {
  const Ingested data = load_ingested(c);
  std::vector<EvalReport> reports;
  ojson baselines = ojson::array();
  for (const auto& spec : c.horizons) {
    const LabelSeries labels = make_labels(data, spec);
    const std::string tag = horizon_tag(spec);
    const std::size_t train_end = data.split.train_end;
    const std::size_t val_end = std::min(data.split.val_end, labels.size());
    const std::size_t test_end = labels.size();
    if (val_end >= test_end) throw InputError(fmt::format("{}: no labelled test rows", tag));

    const CountMatrix counts = count_transitions(data.states, labels, 0, train_end);
    const auto span_of = [](const std::vector<int>& v, std::size_t a, std::size_t b) {
      return std::span<const int>(v.data() + a, b - a);
    };
    const SmoothingParams tuned = tune_backoff(counts, span_of(data.states.states, train_end, val_end),
                                               span_of(labels.labels, train_end, val_end), c.smoothing);
    const double alpha_min = *std::min_element(c.smoothing.alphas.begin(), c.smoothing.alphas.end());
    const Vector marginal = marginal_estimator(counts, alpha_min);
    const Matrix conditional = conditional_estimator(counts, tuned.alpha);
    const Matrix backoff = backoff_estimator(counts, tuned);

    const auto test_states = span_of(data.states.states, val_end, test_end);
    const auto test_labels = span_of(labels.labels, val_end, test_end);
    const auto N = static_cast<Eigen::Index>(test_labels.size());
    auto table_rows = [&](const Matrix& op) {
      Matrix rows(N, op.cols());
      for (Eigen::Index s = 0; s < N; ++s) rows.row(s) = op.row(test_states[static_cast<std::size_t>(s)]);
      return rows;
    };
    Matrix marginal_rows(N, marginal.size());
    marginal_rows.rowwise() = marginal.transpose();

    const std::vector<std::pair<std::string, Matrix>> models{
        {"marginal", marginal_rows},
        {"conditional", table_rows(conditional)},
        {"backoff", table_rows(backoff)},
        {"state_free", predicted_rows(load_free(c, spec), data.features, val_end, test_end)},
        {"state_conditioned", predicted_rows(load_conditioned(c, spec), data.states, data.features, val_end, test_end)},
    };

    const std::vector<double> marginal_nll = per_sample_nll(marginal_rows, test_labels);
    const std::vector<std::size_t> event = negative_event(label_edges(data, labels));
    std::vector<int> outcomes;
    for (int y : test_labels) outcomes.push_back(std::find(event.begin(), event.end(), static_cast<std::size_t>(y)) != event.end());

    BootstrapConfig boot = c.bootstrap;
    boot.seed = c.sub_seed(kSeedBootstrap + horizon_offset(spec));
    for (const auto& [name, rows] : models) {
      const std::vector<double> nll = per_sample_nll(rows, test_labels);
      std::vector<double> diff(nll.size());
      for (std::size_t s = 0; s < nll.size(); ++s) diff[s] = marginal_nll[s] - nll[s];
      EvalReport r;
      r.model = name;
      r.target = kind_name(spec.kind);
      r.horizon = spec.horizon;
      r.m = labels.m;
      r.mean_nll = mean_nll(rows, test_labels);
      r.delta_nll = mean(diff);
      r.ci = block_bootstrap_ci(diff, boot);
      r.bootstrap = boot;
      if (!event.empty()) {
        std::vector<double> probs;
        for (Eigen::Index s = 0; s < N; ++s)
          probs.push_back(std::clamp(event_probability(rows.row(s).transpose(), event), 0.0, 1.0));
        r.ece = ece(probs, outcomes, c.ece_bins);
      }
      reports.push_back(r);
    }

    const auto deg = degeneracy_metrics(counts);
    csv::write_text(c.out_dir / fmt::format("counts_{}.csv", tag), counts_to_csv(counts));
    baselines.push_back({{"target", tag},
                         {"train_pairs", counts.total},
                         {"zero_fraction", deg.zero_fraction},
                         {"below_threshold_fraction", deg.below_threshold_fraction},
                         {"median_row_support", deg.median_row_support},
                         {"tuned_alpha", tuned.alpha},
                         {"tuned_lambda", tuned.lambda},
                         {"marginal_alpha", alpha_min},
                         {"negative_event_bins", event}});
  }

  ojson out;
  out["reports"] = ojson::array();
  for (const auto& r : reports) out["reports"].push_back(to_json(r));
  out["count_baselines"] = std::move(baselines);
  const std::string table = render_table(reports);
  csv::write_text(c.out_dir / "eval_report.json", json_text(out));
  csv::write_text(c.out_dir / "eval_table.txt", table);
  log << table;
}

}  // namespace inhomarkov
