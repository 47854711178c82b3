#include "inhomarkov/count_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "inhomarkov/csv.hpp"

namespace inhomarkov {

std::int64_t CountMatrix::row_total(std::size_t i) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < m; ++j) s += at(i, j);
  return s;
}

std::int64_t CountMatrix::column_total(std::size_t j) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += at(i, j);
  return s;
}

CountMatrix count_pairs(std::span<const int> states, std::span<const int> labels, std::size_t n, std::size_t m) {
  if (states.size() != labels.size()) throw InputError("states and labels must be index-aligned");
  if (states.empty()) throw InputError("cannot count an empty range");
  CountMatrix c;
  c.n = n;
  c.m = m;
  c.counts.assign(n * m, 0);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int i = states[t];
    const int j = labels[t];
    if (i < 0 || static_cast<std::size_t>(i) >= n) throw InputError(fmt::format("state {} out of range at {}", i, t));
    if (j < 0 || static_cast<std::size_t>(j) >= m) throw InputError(fmt::format("label {} out of range at {}", j, t));
    ++c.counts[static_cast<std::size_t>(i) * m + static_cast<std::size_t>(j)];
    ++c.total;
  }
  return c;
}

CountMatrix count_transitions(const StateSeries& states, const LabelSeries& labels, std::size_t begin, std::size_t end) {
  end = std::min({end, labels.size(), states.size()});
  if (begin >= end) throw InputError("empty counting range");
  return count_pairs(std::span(states.states).subspan(begin, end - begin),
                     std::span(labels.labels).subspan(begin, end - begin), states.n, labels.m);
}

DegeneracyMetrics degeneracy_metrics(const CountMatrix& counts, std::int64_t threshold) {
  DegeneracyMetrics out;
  const double cells = static_cast<double>(counts.n * counts.m);
  if (cells == 0) return out;
  std::size_t zeros = 0;
  std::size_t below = 0;
  std::vector<double> support(counts.n, 0.0);
  for (std::size_t i = 0; i < counts.n; ++i)
    for (std::size_t j = 0; j < counts.m; ++j) {
      const auto v = counts.at(i, j);
      if (v == 0) ++zeros;
      if (v < threshold) ++below;
      if (v > 0) support[i] += 1.0;
    }
  out.zero_fraction = static_cast<double>(zeros) / cells;
  out.below_threshold_fraction = static_cast<double>(below) / cells;
  std::sort(support.begin(), support.end());
  const std::size_t mid = support.size() / 2;
  out.median_row_support = support.size() % 2 == 1 ? support[mid] : 0.5 * (support[mid - 1] + support[mid]);
  return out;
}

Vector marginal_estimator(const CountMatrix& counts, double alpha) {
  if (alpha < 0.0) throw InputError("alpha must be non-negative");
  const double denom = static_cast<double>(counts.total) + alpha * static_cast<double>(counts.m);
  if (!(denom > 0.0)) throw InputError("marginal undefined: no counts and alpha = 0");
  Vector p(static_cast<Eigen::Index>(counts.m));
  for (std::size_t j = 0; j < counts.m; ++j)
    p(static_cast<Eigen::Index>(j)) = (static_cast<double>(counts.column_total(j)) + alpha) / denom;
  return p;
}

Matrix conditional_estimator(const CountMatrix& counts, double alpha) {
  if (alpha < 0.0) throw InputError("alpha must be non-negative");
  Matrix a(static_cast<Eigen::Index>(counts.n), static_cast<Eigen::Index>(counts.m));
  for (std::size_t i = 0; i < counts.n; ++i) {
    const double denom = static_cast<double>(counts.row_total(i)) + alpha * static_cast<double>(counts.m);
    if (!(denom > 0.0)) throw InputError(fmt::format("conditional undefined: row {} is empty and alpha = 0", i));
    for (std::size_t j = 0; j < counts.m; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (static_cast<double>(counts.at(i, j)) + alpha) / denom;
  }
  return a;
}

Matrix backoff_estimator(const CountMatrix& counts, const SmoothingParams& params) {
  if (params.lambda < 0.0 || params.lambda > 1.0) throw InputError("lambda must lie in [0, 1]");
  const Vector marginal = marginal_estimator(counts, params.alpha);
  Matrix a(static_cast<Eigen::Index>(counts.n), static_cast<Eigen::Index>(counts.m));
  if (params.lambda == 0.0) {
    a.rowwise() = marginal.transpose();
    return a;
  }
  const Matrix conditional = conditional_estimator(counts, params.alpha);
  if (params.lambda == 1.0) return conditional;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    a.row(i) = params.lambda * conditional.row(i) + (1.0 - params.lambda) * marginal.transpose();
  return a;
}

double pairs_nll(const Matrix& op, std::span<const int> states, std::span<const int> labels) {
  if (states.size() != labels.size() || states.empty()) throw InputError("NLL needs non-empty aligned pairs");
  double sum = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t)
    sum -= std::log(std::max(op(states[t], labels[t]), kProbFloor));
  return sum / static_cast<double>(states.size());
}

SmoothingParams tune_backoff(const CountMatrix& train_counts, std::span<const int> val_states,
                             std::span<const int> val_labels, const SmoothingGrid& grid) {
  if (val_states.empty()) throw InputError("tuning needs validation pairs");
  if (grid.alphas.empty() || grid.lambdas.empty()) throw InputError("empty smoothing grid");
  auto lambdas = grid.lambdas;
  auto alphas = grid.alphas;
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(alphas.begin(), alphas.end());
  SmoothingParams best{alphas.front(), lambdas.front()};
  double best_nll = std::numeric_limits<double>::infinity();
  for (double lambda : lambdas)
    for (double alpha : alphas) {
      const SmoothingParams p{alpha, lambda};
      const Matrix a = backoff_estimator(train_counts, p);
      const double nll = pairs_nll(a, val_states, val_labels);
      if (nll < best_nll) {
        best_nll = nll;
        best = p;
      }
    }
  return best;
}

std::string counts_to_csv(const CountMatrix& counts) {
  std::string out = "i,j,value\n";
  for (std::size_t i = 0; i < counts.n; ++i)
    for (std::size_t j = 0; j < counts.m; ++j) out += fmt::format("{},{},{}\n", i, j, counts.at(i, j));
  return out;
}

std::string matrix_to_csv(const Matrix& matrix) {
  std::string out = "i,j,value\n";
  for (Eigen::Index i = 0; i < matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < matrix.cols(); ++j)
      out += fmt::format("{},{},{}\n", i, j, csv::format_double(matrix(i, j)));
  return out;
}

}  // namespace inhomarkov
