#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inhomarkov/common.hpp"
#include "inhomarkov/discretization.hpp"

namespace inhomarkov {

/// Empirical (state, label) counts on a training range.
struct CountMatrix {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::int64_t> counts;  // row-major n x m
  std::int64_t total = 0;

  std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * m + j]; }
  std::int64_t row_total(std::size_t i) const;
  std::int64_t column_total(std::size_t j) const;
};

struct SmoothingParams {
  double alpha = 0.0;   // additive pseudo-count, >= 0
  double lambda = 1.0;  // weight on the conditional estimate, in [0, 1]
};

struct DegeneracyMetrics {
  double zero_fraction = 0.0;
  double below_threshold_fraction = 0.0;
  double median_row_support = 0.0;
};

CountMatrix count_pairs(std::span<const int> states, std::span<const int> labels, std::size_t n, std::size_t m);

/// Counts transitions for t in [begin, end), clipped to where labels exist.
CountMatrix count_transitions(const StateSeries& states, const LabelSeries& labels, std::size_t begin, std::size_t end);

DegeneracyMetrics degeneracy_metrics(const CountMatrix& counts, std::int64_t threshold = 5);

Vector marginal_estimator(const CountMatrix& counts, double alpha);
Matrix conditional_estimator(const CountMatrix& counts, double alpha);
Matrix backoff_estimator(const CountMatrix& counts, const SmoothingParams& params);

struct SmoothingGrid {
  std::vector<double> alphas{0.01, 0.1, 0.5, 1.0};
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
};

/// Mean negative log-likelihood of (state, label) pairs under an operator.
double pairs_nll(const Matrix& op, std::span<const int> states, std::span<const int> labels);

/// Validation-NLL argmin over the grid; ties go to the smaller lambda, then
/// the smaller alpha.
SmoothingParams tune_backoff(const CountMatrix& train_counts, std::span<const int> val_states,
                             std::span<const int> val_labels, const SmoothingGrid& grid = {});

/// Row-major `i,j,value` export.
std::string counts_to_csv(const CountMatrix& counts);
std::string matrix_to_csv(const Matrix& matrix);

}  // namespace inhomarkov
