#include "inhomarkov/operator_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "inhomarkov/csv.hpp"

namespace inhomarkov {

namespace {

constexpr std::size_t kColumnsPerBatch = 4096;

Vector feature_row(const Matrix& features, std::size_t t) { return features.row(static_cast<Eigen::Index>(t)).transpose(); }

void check_range(const Matrix& features, std::size_t d, std::size_t begin, std::size_t end) {
  if (static_cast<std::size_t>(features.cols()) != d)
    throw InputError(fmt::format("feature matrix has {} columns, model expects {}", features.cols(), d));
  if (begin > end || end > static_cast<std::size_t>(features.rows()))
    throw InputError(fmt::format("range [{}, {}) exceeds the {} feature rows", begin, end, features.rows()));
}

void check_model_shape(const MlpParams& params, std::size_t input, std::size_t m) {
  if (params.layers.empty()) throw InputError("model has no parameters");
  if (params.input_width() != input)
    throw InputError(fmt::format("network input width {} does not match {}", params.input_width(), input));
  if (params.output_width() != m)
    throw InputError(fmt::format("network output width {} does not match m = {}", params.output_width(), m));
}

}  // namespace

void StateConditionedModel::validate() const { check_model_shape(params, n + d, m); }
void StateFreeModel::validate() const {
  check_model_shape(params, d, m);
  if (n == 0) throw InputError("state-free model needs n > 0 rows to replicate");
}

void validate_row_stochastic(const Matrix& matrix, double tol) {
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    if ((matrix.row(i).array() < 0.0).any() || !matrix.row(i).allFinite())
      throw InputError(fmt::format("row {} has negative or non-finite entries", i));
    const double sum = matrix.row(i).sum();
    if (std::abs(sum - 1.0) > tol) throw InputError(fmt::format("row {} sums to {}, not 1", i, sum));
  }
}

Vector encode_state_input(std::size_t state, std::size_t n, const Vector& features) {
  if (state >= n) throw InputError(fmt::format("state {} out of range for n = {}", state, n));
  Vector x = Vector::Zero(static_cast<Eigen::Index>(n) + features.size());
  x(static_cast<Eigen::Index>(state)) = 1.0;
  x.tail(features.size()) = features;
  return x;
}

Vector predict_row(const StateConditionedModel& model, std::size_t state, const Vector& features) {
  if (static_cast<std::size_t>(features.size()) != model.d)
    throw InputError(fmt::format("feature vector has length {}, model expects {}", features.size(), model.d));
  return softmax(forward_eval(model.params, encode_state_input(state, model.n, features)));
}

Vector predict_row(const StateFreeModel& model, const Vector& features) {
  if (static_cast<std::size_t>(features.size()) != model.d)
    throw InputError(fmt::format("feature vector has length {}, model expects {}", features.size(), model.d));
  return softmax(forward_eval(model.params, features));
}

OperatorSnapshot assemble_operator(const StateConditionedModel& model, const Vector& features, std::size_t t) {
  OperatorSnapshot snap{t, model.horizon, Matrix(static_cast<Eigen::Index>(model.n), static_cast<Eigen::Index>(model.m))};
  for (std::size_t i = 0; i < model.n; ++i)
    snap.matrix.row(static_cast<Eigen::Index>(i)) = predict_row(model, i, features).transpose();
  return snap;
}

OperatorSnapshot assemble_statefree_operator(const StateFreeModel& model, const Vector& features, std::size_t t) {
  const Vector row = predict_row(model, features);
  OperatorSnapshot snap{t, model.horizon, Matrix(static_cast<Eigen::Index>(model.n), row.size())};
  snap.matrix.rowwise() = row.transpose();
  return snap;
}

std::vector<OperatorSnapshot> operator_series(const StateConditionedModel& model, const Matrix& features,
                                              std::size_t begin, std::size_t end) {
  model.validate();
  check_range(features, model.d, begin, end);
  std::vector<OperatorSnapshot> out;
  out.reserve(end - begin);
  const std::size_t n = model.n;
  const std::size_t steps_per_batch = std::max<std::size_t>(1, kColumnsPerBatch / n);
  for (std::size_t t0 = begin; t0 < end; t0 += steps_per_batch) {
    const std::size_t steps = std::min(steps_per_batch, end - t0);
    Matrix inputs = Matrix::Zero(static_cast<Eigen::Index>(n + model.d), static_cast<Eigen::Index>(steps * n));
    for (std::size_t s = 0; s < steps; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(s * n + i);
        inputs(static_cast<Eigen::Index>(i), c) = 1.0;
        inputs.col(c).tail(static_cast<Eigen::Index>(model.d)) = feature_row(features, t0 + s);
      }
    const Matrix probs = softmax_columns(forward(model.params, inputs, Mode::eval));
    for (std::size_t s = 0; s < steps; ++s)
      out.push_back({t0 + s, model.horizon,
                     probs.middleCols(static_cast<Eigen::Index>(s * n), static_cast<Eigen::Index>(n)).transpose()});
  }
  return out;
}

std::vector<OperatorSnapshot> operator_series(const StateFreeModel& model, const Matrix& features, std::size_t begin,
                                              std::size_t end) {
  model.validate();
  check_range(features, model.d, begin, end);
  std::vector<OperatorSnapshot> out;
  out.reserve(end - begin);
  for (std::size_t t0 = begin; t0 < end; t0 += kColumnsPerBatch) {
    const std::size_t steps = std::min(kColumnsPerBatch, end - t0);
    const Matrix inputs =
        features.middleRows(static_cast<Eigen::Index>(t0), static_cast<Eigen::Index>(steps)).transpose();
    const Matrix probs = softmax_columns(forward(model.params, inputs, Mode::eval));
    for (std::size_t s = 0; s < steps; ++s) {
      OperatorSnapshot snap{t0 + s, model.horizon, Matrix(static_cast<Eigen::Index>(model.n), probs.rows())};
      snap.matrix.rowwise() = probs.col(static_cast<Eigen::Index>(s)).transpose();
      out.push_back(std::move(snap));
    }
  }
  return out;
}

Dataset make_state_conditioned_dataset(const StateSeries& states, const LabelSeries& labels, const Matrix& features,
                                       std::size_t begin, std::size_t end) {
  end = std::min({end, labels.size(), states.size()});
  check_range(features, static_cast<std::size_t>(features.cols()), begin, end);
  const std::size_t n = states.n;
  const auto d = features.cols();
  Dataset data;
  data.classes = labels.m;
  data.inputs = Matrix::Zero(static_cast<Eigen::Index>(n) + d, static_cast<Eigen::Index>(end - begin));
  for (std::size_t t = begin; t < end; ++t) {
    const auto c = static_cast<Eigen::Index>(t - begin);
    const int s = states.states[t];
    if (s < 0 || static_cast<std::size_t>(s) >= n) throw InputError(fmt::format("state {} out of range at {}", s, t));
    data.inputs(s, c) = 1.0;
    data.inputs.col(c).tail(d) = feature_row(features, t);
    data.labels.push_back(labels.labels[t]);
  }
  return data;
}

Dataset make_state_free_dataset(const LabelSeries& labels, const Matrix& features, std::size_t begin, std::size_t end) {
  end = std::min(end, labels.size());
  check_range(features, static_cast<std::size_t>(features.cols()), begin, end);
  Dataset data;
  data.classes = labels.m;
  data.inputs = features.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)).transpose();
  data.labels.assign(labels.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                     labels.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return data;
}

Matrix predicted_rows(const StateConditionedModel& model, const StateSeries& states, const Matrix& features,
                      std::size_t begin, std::size_t end) {
  LabelSeries dummy;
  dummy.m = model.m;
  dummy.labels.assign(std::min(end, states.size()), 0);
  const Dataset data = make_state_conditioned_dataset(states, dummy, features, begin, end);
  return softmax_columns(forward(model.params, data.inputs, Mode::eval)).transpose();
}

Matrix predicted_rows(const StateFreeModel& model, const Matrix& features, std::size_t begin, std::size_t end) {
  check_range(features, model.d, begin, end);
  const Matrix inputs =
      features.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)).transpose();
  return softmax_columns(forward(model.params, inputs, Mode::eval)).transpose();
}

namespace {

template <typename Model>
std::string model_json(const Model& model, const TrainConfig& config, const char* kind) {
  nlohmann::ordered_json j;
  j["format"] = "inhomarkov-checkpoint";
  j["kind"] = kind;
  j["n"] = model.n;
  j["d"] = model.d;
  j["m"] = model.m;
  j["horizon"] = model.horizon;
  j["seed"] = config.seed;
  j["config"] = config_to_json(config);
  j["params"] = params_to_json(model.params);
  return j.dump() + "\n";
}

template <typename Model>
Model model_from(const std::string& text, const char* kind) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("kind").get<std::string>() != kind)
      throw InputError(fmt::format("checkpoint kind '{}' is not '{}'", j.at("kind").get<std::string>(), kind));
    Model model;
    model.n = j.at("n").get<std::size_t>();
    model.d = j.at("d").get<std::size_t>();
    model.m = j.at("m").get<std::size_t>();
    model.horizon = j.at("horizon").get<std::size_t>();
    model.params = params_from_json(j.at("params"));
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("invalid checkpoint: {}", e.what()));
  }
}

}  // namespace

std::string model_to_json(const StateConditionedModel& model, const TrainConfig& config) {
  return model_json(model, config, "state_conditioned");
}
std::string model_to_json(const StateFreeModel& model, const TrainConfig& config) {
  return model_json(model, config, "state_free");
}
StateConditionedModel state_conditioned_from_json(const std::string& text) {
  return model_from<StateConditionedModel>(text, "state_conditioned");
}
StateFreeModel state_free_from_json(const std::string& text) { return model_from<StateFreeModel>(text, "state_free"); }

std::string snapshot_to_csv(const OperatorSnapshot& snapshot) {
  std::string out = "i,j,value\n";
  for (Eigen::Index i = 0; i < snapshot.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < snapshot.matrix.cols(); ++j)
      out += fmt::format("{},{},{}\n", i, j, csv::format_double(snapshot.matrix(i, j)));
  return out;
}

OperatorSnapshot snapshot_from_csv(const std::string& text, std::size_t t, std::size_t horizon) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || csv::split_line(line) != std::vector<std::string>{"i", "j", "value"})
    throw InputError("snapshot CSV must start with the header i,j,value");
  std::vector<std::tuple<long, long, double>> cells;
  long rows = 0;
  long cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw InputError("snapshot CSV rows need three fields");
    const auto i = static_cast<long>(csv::parse_double(f[0], "snapshot row index"));
    const auto j = static_cast<long>(csv::parse_double(f[1], "snapshot column index"));
    if (i < 0 || j < 0) throw InputError("snapshot indices must be non-negative");
    cells.emplace_back(i, j, csv::parse_double(f[2], "snapshot value"));
    rows = std::max(rows, i + 1);
    cols = std::max(cols, j + 1);
  }
  if (static_cast<std::size_t>(rows * cols) != cells.size()) throw InputError("snapshot CSV is not a full matrix");
  OperatorSnapshot snap{t, horizon, Matrix(rows, cols)};
  for (const auto& [i, j, v] : cells) snap.matrix(i, j) = v;
  validate_row_stochastic(snap.matrix);
  return snap;
}

std::string series_to_jsonl(const std::vector<OperatorSnapshot>& series) {
  std::string out;
  for (const auto& snap : series) {
    nlohmann::ordered_json j;
    j["t"] = snap.t;
    j["h"] = snap.horizon;
    j["n"] = snap.n();
    j["m"] = snap.m();
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < snap.matrix.rows(); ++i) {
      const Vector row = snap.matrix.row(i).transpose();
      rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    j["rows"] = std::move(rows);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<OperatorSnapshot> series_from_jsonl(const std::string& text) {
  std::vector<OperatorSnapshot> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto n = j.at("n").get<Eigen::Index>();
      const auto m = j.at("m").get<Eigen::Index>();
      const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
      if (static_cast<Eigen::Index>(rows.size()) != n) throw InputError("row count does not match n");
      OperatorSnapshot snap{j.at("t").get<std::size_t>(), j.at("h").get<std::size_t>(), Matrix(n, m)};
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m)
          throw InputError("row length does not match m");
        for (Eigen::Index k = 0; k < m; ++k) snap.matrix(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      }
      validate_row_stochastic(snap.matrix);
      out.push_back(std::move(snap));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(fmt::format("operator series line {}: {}", lineno, e.what()));
    } catch (const InputError& e) {
      throw InputError(fmt::format("operator series line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

}  // namespace inhomarkov
