#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "inhomarkov/common.hpp"
#include "inhomarkov/discretization.hpp"
#include "inhomarkov/neural_net.hpp"

namespace inhomarkov {

/// Row estimator on [one_hot(state); features]. Input width n + d.
struct StateConditionedModel {
  MlpParams params;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t horizon = 1;

  void validate() const;
};

/// Feature-only estimator; its operator replicates a single row n times.
struct StateFreeModel {
  MlpParams params;
  std::size_t n = 0;  // rows in the assembled operator
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t horizon = 1;

  void validate() const;
};

/// Row-stochastic matrix at timestep t for horizon h.
struct OperatorSnapshot {
  std::size_t t = 0;
  std::size_t horizon = 1;
  Matrix matrix;

  std::size_t n() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(matrix.cols()); }
  bool square() const { return matrix.rows() == matrix.cols(); }
};

inline constexpr double kRowSumTolerance = 1e-9;

/// Throws InputError when a row is negative or does not sum to 1 within `tol`.
void validate_row_stochastic(const Matrix& matrix, double tol = kRowSumTolerance);

Vector encode_state_input(std::size_t state, std::size_t n, const Vector& features);

Vector predict_row(const StateConditionedModel& model, std::size_t state, const Vector& features);
Vector predict_row(const StateFreeModel& model, const Vector& features);

OperatorSnapshot assemble_operator(const StateConditionedModel& model, const Vector& features, std::size_t t);
OperatorSnapshot assemble_statefree_operator(const StateFreeModel& model, const Vector& features, std::size_t t);

/// Snapshots for t in [begin, end) using feature rows of `features` (T x d).
/// Rows are evaluated in batches; the result is ordered by t.
std::vector<OperatorSnapshot> operator_series(const StateConditionedModel& model, const Matrix& features,
                                              std::size_t begin, std::size_t end);
std::vector<OperatorSnapshot> operator_series(const StateFreeModel& model, const Matrix& features, std::size_t begin,
                                              std::size_t end);

/// Training pairs (input, label) for t in [begin, end), clipped to the label range.
Dataset make_state_conditioned_dataset(const StateSeries& states, const LabelSeries& labels, const Matrix& features,
                                       std::size_t begin, std::size_t end);
Dataset make_state_free_dataset(const LabelSeries& labels, const Matrix& features, std::size_t begin, std::size_t end);

/// Per-sample predicted rows (N x m) for t in [begin, end) clipped to labels.
Matrix predicted_rows(const StateConditionedModel& model, const StateSeries& states, const Matrix& features,
                      std::size_t begin, std::size_t end);
Matrix predicted_rows(const StateFreeModel& model, const Matrix& features, std::size_t begin, std::size_t end);

// Checkpoints: {"kind", n, d, m, horizon, seed, config, params}.
std::string model_to_json(const StateConditionedModel& model, const TrainConfig& config);
std::string model_to_json(const StateFreeModel& model, const TrainConfig& config);
StateConditionedModel state_conditioned_from_json(const std::string& text);
StateFreeModel state_free_from_json(const std::string& text);

/// `i,j,value` rows, row-major.
std::string snapshot_to_csv(const OperatorSnapshot& snapshot);
OperatorSnapshot snapshot_from_csv(const std::string& text, std::size_t t = 0, std::size_t horizon = 1);

/// One JSON object per line: {"t", "h", "n", "m", "rows"}.
std::string series_to_jsonl(const std::vector<OperatorSnapshot>& series);
/// Parses and validates row-stochasticity of every snapshot.
std::vector<OperatorSnapshot> series_from_jsonl(const std::string& text);

}  // namespace inhomarkov
