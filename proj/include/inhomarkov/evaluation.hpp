#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "inhomarkov/common.hpp"

namespace inhomarkov {

/// Mean of -log p[label] over samples; rows are samples (N x m).
double mean_nll(const Matrix& rows, std::span<const int> labels);

/// Per-sample -log p[label].
std::vector<double> per_sample_nll(const Matrix& rows, std::span<const int> labels);

/// mean_nll(marginal) - mean_nll(model); positive means the model is better.
double delta_nll(const Matrix& model_rows, const Vector& marginal, std::span<const int> labels);

double event_probability(const Vector& row, std::span<const std::size_t> event);

/// Equal-width-bin expected calibration error; empty bins are skipped.
double ece(std::span<const double> event_probs, std::span<const int> outcomes, std::size_t bins = 10);

struct BootstrapConfig {
  std::size_t block_len = 21;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Circular block bootstrap of the mean with a percentile interval.
Interval block_bootstrap_ci(std::span<const double> values, const BootstrapConfig& config = {});

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Welch two-sample t-test with Welch-Satterthwaite degrees of freedom.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct EvalReport {
  std::string model;
  std::string target = "state";  // state or forward
  std::size_t horizon = 1;
  std::size_t m = 0;
  double mean_nll = 0.0;
  double delta_nll = 0.0;
  std::optional<double> ece;
  Interval ci;
  BootstrapConfig bootstrap;
};

nlohmann::ordered_json to_json(const EvalReport& report);

/// Fixed-width comparison table: model, target, horizon, NLL, dNLL, CI, ECE.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace inhomarkov
