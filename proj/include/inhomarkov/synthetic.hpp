#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "inhomarkov/common.hpp"
#include "inhomarkov/discretization.hpp"
#include "inhomarkov/operator_models.hpp"

namespace inhomarkov {

/// Known time-inhomogeneous chain: a sticky regime process selects which true
/// operator drives the next transition, and noisy regime indicators are the
/// observable features.
struct SyntheticSpec {
  std::size_t n = 5;
  std::vector<Matrix> regimes;
  double regime_persistence = 0.98;
  double feature_noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Regime 0 keeps `stay` mass on the diagonal; regime 1 puts it on the
/// anti-diagonal. Remaining mass favours outer states in regime 0 and central
/// states in regime 1.
SyntheticSpec two_regime_spec(std::size_t n, double persistence, double noise_sigma, std::uint64_t seed = 0,
                              double stay = 0.6);

/// n = 5, persistence 0.98, noise 0.1.
SyntheticSpec headline_spec(std::uint64_t seed = 0);

struct GroundTruth {
  StateSeries states;
  Matrix features;  // T x regimes: one-hot regime plus Gaussian noise
  std::vector<int> regime_path;
  std::vector<Matrix> operators;

  /// Operator that generated the transition out of t.
  const Matrix& true_operator_at(std::size_t t) const { return operators[static_cast<std::size_t>(regime_path[t])]; }
  std::size_t size() const { return regime_path.size(); }
};

/// X[t+1] ~ operator(regime[t]) row X[t]; features[t] = one_hot(regime[t]) + noise.
GroundTruth generate(const SyntheticSpec& spec, std::size_t length, std::uint64_t seed);

/// Snapshot t is the operator of regime_path[t].
std::vector<OperatorSnapshot> exact_operator_series(const SyntheticSpec& spec, const std::vector<int>& regime_path);

/// Exact h-step transition law out of t: the product of true one-step
/// operators for t, ..., t+h-1, accumulated entrywise.
Matrix exact_h_step(const SyntheticSpec& spec, const std::vector<int>& regime_path, std::size_t t, std::size_t horizon);

/// Mean over snapshots and rows of the TV distance between learned and true rows.
double recovery_error(const std::vector<OperatorSnapshot>& learned, const std::vector<OperatorSnapshot>& truth);

/// Stationary distribution by power iteration.
Vector stationary_distribution(const Matrix& op, std::size_t iterations = 10000);

/// State s maps to the return interval [(s - n/2) w, (s - n/2 + 1) w).
double synthetic_return(std::size_t state, std::size_t n, double u, double width = 0.01);

/// Ingest-schema CSV: date,price,regime_0,... with one more row than the
/// truth (the base price). Row k >= 1 carries the return of state k-1.
std::string to_ingest_csv(const GroundTruth& truth, std::uint64_t seed);

/// Sidecar with operators, regime path and states.
std::string truth_to_json(const SyntheticSpec& spec, const GroundTruth& truth);

}  // namespace inhomarkov
