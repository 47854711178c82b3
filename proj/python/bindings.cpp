#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "inhomarkov/config.hpp"
#include "inhomarkov/count_estimators.hpp"
#include "inhomarkov/csv.hpp"
#include "inhomarkov/discretization.hpp"
#include "inhomarkov/evaluation.hpp"
#include "inhomarkov/operator_diagnostics.hpp"
#include "inhomarkov/operator_models.hpp"
#include "inhomarkov/pipeline.hpp"
#include "inhomarkov/stats.hpp"
#include "inhomarkov/synthetic.hpp"
#include "inhomarkov/timeseries.hpp"

namespace py = pybind11;
using namespace inhomarkov;

namespace {

StateSeries as_states(std::vector<int> states, std::size_t n) { return StateSeries{std::move(states), n}; }

std::vector<OperatorSnapshot> as_snapshots(const std::vector<Matrix>& mats, std::size_t first_t = 0) {
  std::vector<OperatorSnapshot> out;
  for (std::size_t k = 0; k < mats.size(); ++k) out.push_back({first_t + k, 1, mats[k]});
  return out;
}

std::vector<Matrix> matrices(const std::vector<OperatorSnapshot>& snaps) {
  std::vector<Matrix> out;
  for (const auto& s : snaps) out.push_back(s.matrix);
  return out;
}

CountMatrix counts_from(const std::vector<int>& states, const std::vector<int>& labels, std::size_t n, std::size_t m) {
  return count_pairs(states, labels, n, m);
}

py::dict train_result_dict(const TrainResult& r) {
  py::list history;
  for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.train_nll, e.val_nll));
  py::dict d;
  d["history"] = history;
  d["best_epoch"] = r.best_epoch;
  d["diverged"] = r.diverged;
  d["message"] = r.message;
  return d;
}

TrainConfig train_config(py::dict overrides) {
  TrainConfig c;
  for (auto item : overrides) {
    const auto key = item.first.cast<std::string>();
    auto v = item.second;
    if (key == "learning_rate") c.learning_rate = v.cast<double>();
    else if (key == "weight_decay") c.weight_decay = v.cast<double>();
    else if (key == "grad_clip_norm") c.grad_clip_norm = v.cast<double>();
    else if (key == "dropout_p") c.dropout_p = v.cast<double>();
    else if (key == "batch_size") c.batch_size = v.cast<std::size_t>();
    else if (key == "max_epochs") c.max_epochs = v.cast<std::size_t>();
    else if (key == "patience") c.patience = v.cast<std::size_t>();
    else if (key == "seed") c.seed = v.cast<std::uint64_t>();
    else if (key == "label_smoothing_eps") c.label_smoothing_eps = v.cast<double>();
    else throw InputError("unknown training option '" + key + "'");
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-inhomogeneous Markov operators on discretized return series.";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // Ingest and discretization.
  m.def("compute_returns", [](const std::vector<double>& p) { return compute_returns(p); }, py::arg("prices"));
  m.def("chronological_split",
        [](std::size_t total, double train, double val) {
          const auto s = chronological_split(total, train, val);
          return py::make_tuple(s.train_end, s.val_end, s.total);
        },
        py::arg("total"), py::arg("train_fraction") = 0.70, py::arg("val_fraction") = 0.15);
  m.def("realized_variance", [](const std::vector<double>& r, std::size_t w) { return realized_variance(r, w); },
        py::arg("returns"), py::arg("window") = 21);
  m.def("mutual_information", [](const std::vector<int>& a, const std::vector<int>& b) { return mutual_information(a, b); });
  m.def("fit_quantile_bins", [](const std::vector<double>& v, std::size_t n) { return fit_quantile_bins(v, n).interior; },
        py::arg("train_values"), py::arg("n"), "Interior bin edges (duplicates collapsed).");
  m.def("discretize",
        [](const std::vector<double>& v, const std::vector<double>& edges) {
          return discretize(v, BinEdges{edges, edges.size() + 1}).states;
        },
        py::arg("values"), py::arg("edges"));
  m.def("state_labels",
        [](const std::vector<int>& states, std::size_t n, std::size_t h) { return state_labels(as_states(states, n), h).labels; },
        py::arg("states"), py::arg("n"), py::arg("horizon"));
  m.def("forward_return_labels",
        [](const std::vector<double>& prices, std::size_t h, std::size_t m_bins, std::size_t train_end) {
          const auto l = forward_return_labels(prices, h, m_bins, train_end);
          return py::make_tuple(l.labels, l.edges.interior);
        },
        py::arg("prices"), py::arg("horizon"), py::arg("m"), py::arg("train_end"));

  // Count baselines.
  m.def("count_pairs",
        [](const std::vector<int>& s, const std::vector<int>& l, std::size_t n, std::size_t mm) {
          const auto c = counts_from(s, l, n, mm);
          Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, mm);
          std::copy(c.counts.begin(), c.counts.end(), out.data());
          return out;
        },
        py::arg("states"), py::arg("labels"), py::arg("n"), py::arg("m"));
  m.def("degeneracy_metrics",
        [](const std::vector<int>& s, const std::vector<int>& l, std::size_t n, std::size_t mm, std::int64_t threshold) {
          const auto d = degeneracy_metrics(counts_from(s, l, n, mm), threshold);
          py::dict out;
          out["zero_fraction"] = d.zero_fraction;
          out["below_threshold_fraction"] = d.below_threshold_fraction;
          out["median_row_support"] = d.median_row_support;
          return out;
        },
        py::arg("states"), py::arg("labels"), py::arg("n"), py::arg("m"), py::arg("threshold") = 5);
  m.def("marginal_estimator",
        [](const std::vector<int>& s, const std::vector<int>& l, std::size_t n, std::size_t mm, double alpha) {
          return marginal_estimator(counts_from(s, l, n, mm), alpha);
        },
        py::arg("states"), py::arg("labels"), py::arg("n"), py::arg("m"), py::arg("alpha"));
  m.def("conditional_estimator",
        [](const std::vector<int>& s, const std::vector<int>& l, std::size_t n, std::size_t mm, double alpha) {
          return conditional_estimator(counts_from(s, l, n, mm), alpha);
        },
        py::arg("states"), py::arg("labels"), py::arg("n"), py::arg("m"), py::arg("alpha"));
  m.def("backoff_estimator",
        [](const std::vector<int>& s, const std::vector<int>& l, std::size_t n, std::size_t mm, double alpha,
           double lambda) { return backoff_estimator(counts_from(s, l, n, mm), {alpha, lambda}); },
        py::arg("states"), py::arg("labels"), py::arg("n"), py::arg("m"), py::arg("alpha"), py::arg("lam"));

  // Operator diagnostics.
  m.def("tv_distance", &tv_distance, py::arg("p"), py::arg("q"));
  m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"));
  m.def("row_heterogeneity", &row_heterogeneity, py::arg("operator"));
  m.def("row_entropy", &row_entropy, py::arg("operator"));
  m.def("dobrushin", &dobrushin, py::arg("operator"));
  m.def("ck_compose", [](const std::vector<Matrix>& one_step) { return ck_compose(as_snapshots(one_step)); },
        py::arg("one_step"));
  m.def("ck_discrepancy",
        [](const Matrix& direct, const Matrix& composed) {
          const auto d = ck_discrepancy(direct, composed);
          return py::make_tuple(d.kl, d.tv);
        },
        py::arg("direct"), py::arg("composed"));
  m.def("pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          const auto r = pearson(x, y);
          return py::make_tuple(r.r, r.p);
        },
        py::arg("x"), py::arg("y"));

  // Evaluation.
  m.def("mean_nll", [](const Matrix& rows, const std::vector<int>& labels) { return mean_nll(rows, labels); },
        py::arg("rows"), py::arg("labels"));
  m.def("ece",
        [](const std::vector<double>& p, const std::vector<int>& y, std::size_t bins) { return ece(p, y, bins); },
        py::arg("event_probs"), py::arg("outcomes"), py::arg("bins") = 10);
  m.def("block_bootstrap_ci",
        [](const std::vector<double>& v, std::size_t block_len, std::size_t reps, std::uint64_t seed, double level) {
          const auto ci = block_bootstrap_ci(v, {block_len, reps, seed, level});
          return py::make_tuple(ci.low, ci.high);
        },
        py::arg("values"), py::arg("block_len") = 21, py::arg("reps") = 1000, py::arg("seed") = 0, py::arg("level") = 0.95);
  m.def("welch_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          const auto r = welch_t_test(a, b);
          return py::make_tuple(r.t, r.p, r.df);
        },
        py::arg("a"), py::arg("b"));
  m.def("student_t_two_sided_p", &student_t_two_sided_p, py::arg("t"), py::arg("df"));

  // Synthetic oracle.
  py::class_<GroundTruth>(m, "GroundTruth")
      .def_property_readonly("states", [](const GroundTruth& g) { return g.states.states; })
      .def_readonly("features", &GroundTruth::features)
      .def_readonly("regime_path", &GroundTruth::regime_path)
      .def_readonly("operators", &GroundTruth::operators)
      .def("__len__", &GroundTruth::size);
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init([](std::size_t n, double persistence, double sigma, std::uint64_t seed, double stay) {
             return two_regime_spec(n, persistence, sigma, seed, stay);
           }),
           py::arg("n") = 5, py::arg("persistence") = 0.98, py::arg("noise_sigma") = 0.1, py::arg("seed") = 0,
           py::arg("stay") = 0.6)
      .def_readonly("n", &SyntheticSpec::n)
      .def_readonly("regimes", &SyntheticSpec::regimes)
      .def("generate", [](const SyntheticSpec& s, std::size_t length) { return generate(s, length, s.seed); },
           py::arg("length"))
      .def("exact_operators",
           [](const SyntheticSpec& s, const std::vector<int>& path) { return matrices(exact_operator_series(s, path)); },
           py::arg("regime_path"))
      .def("exact_h_step", [](const SyntheticSpec& s, const std::vector<int>& path, std::size_t t,
                              std::size_t h) { return exact_h_step(s, path, t, h); },
           py::arg("regime_path"), py::arg("t"), py::arg("horizon"));
  m.def("recovery_error",
        [](const std::vector<Matrix>& learned, const std::vector<Matrix>& truth) {
          return recovery_error(as_snapshots(learned), as_snapshots(truth));
        },
        py::arg("learned"), py::arg("truth"));

  // Models.
  py::class_<StateConditionedModel>(m, "StateConditionedModel")
      .def_static("load", [](const std::filesystem::path& p) { return state_conditioned_from_json(csv::read_text(p)); })
      .def_readonly("n", &StateConditionedModel::n)
      .def_readonly("d", &StateConditionedModel::d)
      .def_readonly("m", &StateConditionedModel::m)
      .def_readonly("horizon", &StateConditionedModel::horizon)
      .def("predict_row", [](const StateConditionedModel& mdl, std::size_t i, const Vector& f) { return predict_row(mdl, i, f); },
           py::arg("state"), py::arg("features"))
      .def("operator", [](const StateConditionedModel& mdl, const Vector& f) { return assemble_operator(mdl, f, 0).matrix; },
           py::arg("features"))
      .def("operator_series",
           [](const StateConditionedModel& mdl, const Matrix& f) { return matrices(operator_series(mdl, f, 0, f.rows())); },
           py::arg("features"));
  py::class_<StateFreeModel>(m, "StateFreeModel")
      .def_static("load", [](const std::filesystem::path& p) { return state_free_from_json(csv::read_text(p)); })
      .def_readonly("n", &StateFreeModel::n)
      .def_readonly("d", &StateFreeModel::d)
      .def_readonly("m", &StateFreeModel::m)
      .def("operator", [](const StateFreeModel& mdl, const Vector& f) { return assemble_statefree_operator(mdl, f, 0).matrix; },
           py::arg("features"))
      .def("operator_series",
           [](const StateFreeModel& mdl, const Matrix& f) { return matrices(operator_series(mdl, f, 0, f.rows())); },
           py::arg("features"));

  m.def("fit_state_conditioned",
        [](const std::vector<int>& states, std::size_t n, const Matrix& features, std::size_t horizon,
           std::size_t train_end, std::size_t val_end, std::uint64_t init_seed, py::dict options) {
          const StateSeries s = as_states(states, n);
          const LabelSeries labels = state_labels(s, horizon);
          const auto d = static_cast<std::size_t>(features.cols());
          const TrainConfig cfg = train_config(options);
          const TrainResult r = train(init_params(default_widths(n + d, n), init_seed),
                                      make_state_conditioned_dataset(s, labels, features, 0, train_end),
                                      make_state_conditioned_dataset(s, labels, features, train_end, val_end), cfg);
          return py::make_tuple(StateConditionedModel{r.best, n, d, n, horizon}, train_result_dict(r));
        },
        py::arg("states"), py::arg("n"), py::arg("features"), py::arg("horizon"), py::arg("train_end"),
        py::arg("val_end"), py::arg("init_seed") = 0, py::arg("options") = py::dict());
  m.def("fit_state_free",
        [](const std::vector<int>& states, std::size_t n, const Matrix& features, std::size_t horizon,
           std::size_t train_end, std::size_t val_end, std::uint64_t init_seed, py::dict options) {
          const LabelSeries labels = state_labels(as_states(states, n), horizon);
          const auto d = static_cast<std::size_t>(features.cols());
          const TrainResult r = train(init_params(default_widths(d, n), init_seed),
                                      make_state_free_dataset(labels, features, 0, train_end),
                                      make_state_free_dataset(labels, features, train_end, val_end), train_config(options));
          return py::make_tuple(StateFreeModel{r.best, n, d, n, horizon}, train_result_dict(r));
        },
        py::arg("states"), py::arg("n"), py::arg("features"), py::arg("horizon"), py::arg("train_end"),
        py::arg("val_end"), py::arg("init_seed") = 0, py::arg("options") = py::dict());

  // Pipeline stages, as run by the command-line tool.
  m.def("run_stage",
        [](const std::string& stage, const std::filesystem::path& config, std::optional<std::filesystem::path> out,
           std::optional<std::uint64_t> seed) {
          RunConfig c = load_run_config(config);
          if (out) c.out_dir = *out;
          if (seed) c.seed = *seed;
          std::ostringstream log;
          if (stage == "synth") cmd_synth(c, log);
          else if (stage == "ingest") cmd_ingest(c, log);
          else if (stage == "train") cmd_train(c, log);
          else if (stage == "diagnose") cmd_diagnose(c, log);
          else if (stage == "ck") cmd_ck(c, log);
          else if (stage == "eval") cmd_eval(c, log);
          else throw InputError("unknown stage '" + stage + "'");
          return log.str();
        },
        py::arg("stage"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        "Runs one pipeline stage and returns its log text.");
}
