#include "inhomarkov/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "inhomarkov/discretization.hpp"
#include "inhomarkov/rng.hpp"
#include "inhomarkov/stats.hpp"

namespace inhomarkov {

std::vector<double> per_sample_nll(const Matrix& rows, std::span<const int> labels) {
  if (static_cast<std::size_t>(rows.rows()) != labels.size())
    throw InputError(fmt::format("{} predicted rows for {} labels", rows.rows(), labels.size()));
  std::vector<double> out(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int j = labels[s];
    if (j < 0 || j >= rows.cols()) throw InputError(fmt::format("label {} out of range at sample {}", j, s));
    out[s] = -std::log(std::max(rows(static_cast<Eigen::Index>(s), j), kProbFloor));
  }
  return out;
}

double mean_nll(const Matrix& rows, std::span<const int> labels) {
  if (labels.empty()) throw InputError("NLL of an empty sample");
  return mean(per_sample_nll(rows, labels));
}

double delta_nll(const Matrix& model_rows, const Vector& marginal, std::span<const int> labels) {
  if (marginal.size() != model_rows.cols()) throw InputError("marginal length does not match model rows");
  Matrix marginal_rows(model_rows.rows(), marginal.size());
  marginal_rows.rowwise() = marginal.transpose();
  return mean_nll(marginal_rows, labels) - mean_nll(model_rows, labels);
}

double event_probability(const Vector& row, std::span<const std::size_t> event) {
  if (event.empty()) throw InputError("event must contain at least one state");
  double p = 0.0;
  for (std::size_t j : event) {
    if (j >= static_cast<std::size_t>(row.size())) throw InputError(fmt::format("event state {} out of range", j));
    p += row(static_cast<Eigen::Index>(j));
  }
  return p;
}

double ece(std::span<const double> event_probs, std::span<const int> outcomes, std::size_t bins) {
  if (bins < 2) throw InputError("ECE needs at least 2 bins");
  if (event_probs.size() != outcomes.size()) throw InputError("probabilities and outcomes are misaligned");
  if (event_probs.empty()) throw InputError("ECE of an empty sample");
  std::vector<double> prob_sum(bins, 0.0);
  std::vector<double> hit_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t s = 0; s < event_probs.size(); ++s) {
    const double p = event_probs[s];
    if (!(p >= 0.0 && p <= 1.0)) throw InputError(fmt::format("probability {} outside [0, 1] at {}", p, s));
    if (outcomes[s] != 0 && outcomes[s] != 1) throw InputError(fmt::format("outcome at {} is not binary", s));
    const auto b = std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
    prob_sum[b] += p;
    hit_sum[b] += outcomes[s];
    ++count[b];
  }
  const double total = static_cast<double>(event_probs.size());
  double e = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    e += nb / total * std::abs(prob_sum[b] / nb - hit_sum[b] / nb);
  }
  return e;
}

Interval block_bootstrap_ci(std::span<const double> values, const BootstrapConfig& config) {
  const std::size_t n = values.size();
  if (config.block_len == 0) throw InputError("block length must be positive");
  if (n < config.block_len) throw InputError(fmt::format("series of length {} is shorter than the block length {}", n, config.block_len));
  if (config.reps == 0) throw InputError("bootstrap needs at least one replicate");
  if (!(config.level > 0.0 && config.level < 1.0)) throw InputError("confidence level must lie in (0, 1)");

  const std::size_t blocks = (n + config.block_len - 1) / config.block_len;
  std::vector<double> means(config.reps);
  std::vector<double> resample(n);
  for (std::size_t r = 0; r < config.reps; ++r) {
    Rng rng(derive_seed(config.seed, r));
    std::size_t taken = 0;
    for (std::size_t b = 0; b < blocks && taken < n; ++b) {
      const std::size_t start = rng.index(n);
      for (std::size_t k = 0; k < config.block_len && taken < n; ++k, ++taken) resample[taken] = values[(start + k) % n];
    }
    means[r] = mean(resample);
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - config.level);
  return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InputError("Welch test needs at least two samples per group");
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  if (!(va + vb > 0.0)) throw InputError("Welch test undefined: both samples have zero variance");
  TTestResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["target"] = report.target;
  j["horizon"] = report.horizon;
  j["m"] = report.m;
  j["mean_nll"] = report.mean_nll;
  j["delta_nll"] = report.delta_nll;
  j["ece"] = report.ece ? nlohmann::ordered_json(*report.ece) : nlohmann::ordered_json(nullptr);
  j["ci_low"] = report.ci.low;
  j["ci_high"] = report.ci.high;
  j["bootstrap"] = {{"block_len", report.bootstrap.block_len},
                    {"reps", report.bootstrap.reps},
                    {"seed", report.bootstrap.seed},
                    {"level", report.bootstrap.level}};
  return j;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::string out = fmt::format("{:<20} {:<8} {:>3} {:>10} {:>10} {:>22} {:>8}\n", "model", "target", "h", "NLL", "dNLL", "CI", "ECE");
  for (const auto& r : reports) {
    const std::string ci = fmt::format("[{:+.4f}, {:+.4f}]", r.ci.low, r.ci.high);
    const std::string e = r.ece ? fmt::format("{:.4f}", *r.ece) : std::string("n/a");
    out += fmt::format("{:<20} {:<8} {:>3} {:>10.4f} {:>+10.4f} {:>22} {:>8}\n", r.model, r.target, r.horizon, r.mean_nll, r.delta_nll,
                       ci, e);
  }
  return out;
}

}  // namespace inhomarkov
