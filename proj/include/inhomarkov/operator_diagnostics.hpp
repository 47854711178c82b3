#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "inhomarkov/common.hpp"
#include "inhomarkov/evaluation.hpp"
#include "inhomarkov/operator_models.hpp"

namespace inhomarkov {

double tv_distance(const Vector& p, const Vector& q);

/// KL(p || q) in nats; q floored at 1e-12, 0 log 0 = 0.
double kl_divergence(const Vector& p, const Vector& q);

/// Mean pairwise TV distance between rows.
double row_heterogeneity(const Matrix& op);
/// Mean Shannon entropy of the rows (nats).
double row_entropy(const Matrix& op);
/// Dobrushin ergodic coefficient: max pairwise TV distance between rows.
double dobrushin(const Matrix& op);

struct DiagnosticRecord {
  std::size_t t = 0;
  double rho = 0.0;
  double entropy = 0.0;
  double dobrushin = 0.0;
};

struct DiagnosticsSeries {
  std::string model;
  std::vector<DiagnosticRecord> records;
};

/// Per-snapshot diagnostics. Rectangular snapshots are rejected unless
/// `entropy_only` is set, in which case rho and dobrushin are left at NaN.
DiagnosticsSeries diagnostics_series(const std::vector<OperatorSnapshot>& snapshots, const std::string& model = "",
                                     bool entropy_only = false);

/// Left-to-right product of consecutive one-step snapshots.
Matrix ck_compose(std::span<const OperatorSnapshot> one_step);

struct CkDiscrepancy {
  double kl = 0.0;
  double tv = 0.0;
};

/// Row-averaged KL(direct || composed) and TV.
CkDiscrepancy ck_discrepancy(const Matrix& direct, const Matrix& composed);

struct CkRecord {
  std::size_t t = 0;
  double kl = 0.0;
  double tv = 0.0;
};

struct CkReport {
  std::string model;
  std::size_t horizon = 1;
  std::vector<CkRecord> records;

  double mean_kl() const;
  double mean_tv() const;
};

/// Compares direct[t] with the composition of one_step[t .. t+h-1] for every
/// direct snapshot whose window is covered by the one-step series.
CkReport ck_report(const std::vector<OperatorSnapshot>& direct, const std::vector<OperatorSnapshot>& one_step,
                   std::size_t horizon, const std::string& model = "");

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct StratifiedMetric {
  std::string metric;
  double mean_high = 0.0;  // top-q realized variance
  double mean_low = 0.0;   // bottom-q realized variance
  std::optional<TTestResult> test;  // empty when Welch is undefined (both strata constant)
};

struct StratificationReport {
  std::string model;
  double tail_fraction = 0.2;
  std::size_t stratum_size = 0;
  std::vector<StratifiedMetric> metrics;  // rho, entropy, dobrushin
};

/// Splits timesteps by realized variance (NaN entries skipped; rv[k] aligns
/// with series.records[k]) into the top and bottom `tail_fraction` and
/// compares means per metric.
StratificationReport regime_stratify(const DiagnosticsSeries& series, std::span<const double> rv,
                                     double tail_fraction = 0.2);

std::string diagnostics_to_csv(const DiagnosticsSeries& series);
std::string ck_to_csv(const CkReport& report);
nlohmann::ordered_json to_json(const StratificationReport& report);
nlohmann::ordered_json to_json(const PearsonResult& result);

}  // namespace inhomarkov
