#include "inhomarkov/operator_diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "inhomarkov/csv.hpp"
#include "inhomarkov/stats.hpp"

namespace inhomarkov {

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw InputError(fmt::format("TV distance of vectors of length {} and {}", p.size(), q.size()));
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw InputError(fmt::format("KL divergence of vectors of length {} and {}", p.size(), q.size()));
  double kl = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p(j) <= 0.0 || p(j) == q(j)) continue;
    kl += p(j) * std::log(p(j) / std::max(q(j), kProbFloor));
  }
  return kl;
}

namespace {

void require_rows(const Matrix& op, const char* what) {
  if (op.rows() < 2) throw InputError(fmt::format("{} needs at least two rows", what));
}

double row_tv(const Matrix& op, Eigen::Index i, Eigen::Index k) { return 0.5 * (op.row(i) - op.row(k)).cwiseAbs().sum(); }

double row_entropy_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j)
    if (row(j) > 0.0) h -= row(j) * std::log(row(j));
  return h;
}

}  // namespace

double row_heterogeneity(const Matrix& op) {
  require_rows(op, "row heterogeneity");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index k = i + 1; k < op.rows(); ++k, ++pairs) sum += row_tv(op, i, k);
  return sum / static_cast<double>(pairs);
}

double row_entropy(const Matrix& op) {
  if (op.rows() == 0) throw InputError("entropy of an empty operator");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < op.rows(); ++i) sum += row_entropy_of(op.row(i));
  return sum / static_cast<double>(op.rows());
}

double dobrushin(const Matrix& op) {
  require_rows(op, "Dobrushin coefficient");
  double best = 0.0;
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index k = i + 1; k < op.rows(); ++k) best = std::max(best, row_tv(op, i, k));
  return best;
}

DiagnosticsSeries diagnostics_series(const std::vector<OperatorSnapshot>& snapshots, const std::string& model,
                                     bool entropy_only) {
  DiagnosticsSeries out;
  out.model = model;
  out.records.reserve(snapshots.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& snap : snapshots) {
    if (!snap.square() && !entropy_only)
      throw InputError(fmt::format("snapshot at t = {} is {}x{}; heterogeneity needs a square operator", snap.t,
                                   snap.n(), snap.m()));
    if (entropy_only) {
      out.records.push_back({snap.t, nan, row_entropy(snap.matrix), nan});
    } else {
      out.records.push_back({snap.t, row_heterogeneity(snap.matrix), row_entropy(snap.matrix), dobrushin(snap.matrix)});
    }
  }
  return out;
}

Matrix ck_compose(std::span<const OperatorSnapshot> one_step) {
  if (one_step.empty()) throw InputError("composition needs at least one snapshot");
  Matrix product = one_step.front().matrix;
  if (!one_step.front().square()) throw InputError("composition needs square snapshots");
  for (std::size_t k = 1; k < one_step.size(); ++k) {
    const auto& snap = one_step[k];
    if (!snap.square() || snap.n() != one_step.front().n())
      throw InputError(fmt::format("snapshot at t = {} does not match the state space", snap.t));
    if (snap.t != one_step[k - 1].t + 1)
      throw InputError(fmt::format("timestep gap between t = {} and t = {}", one_step[k - 1].t, snap.t));
    product = product * snap.matrix;
  }
  return product;
}

CkDiscrepancy ck_discrepancy(const Matrix& direct, const Matrix& composed) {
  if (direct.rows() != composed.rows() || direct.cols() != composed.cols())
    throw InputError("direct and composed operators differ in shape");
  if (direct.rows() != direct.cols()) throw InputError("CK discrepancy needs square operators");
  CkDiscrepancy d;
  for (Eigen::Index i = 0; i < direct.rows(); ++i) {
    const Vector p = direct.row(i).transpose();
    const Vector q = composed.row(i).transpose();
    d.kl += kl_divergence(p, q);
    d.tv += tv_distance(p, q);
  }
  d.kl /= static_cast<double>(direct.rows());
  d.tv /= static_cast<double>(direct.rows());
  return d;
}

double CkReport::mean_kl() const {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.kl;
  return s / static_cast<double>(records.size());
}

double CkReport::mean_tv() const {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.tv;
  return s / static_cast<double>(records.size());
}

CkReport ck_report(const std::vector<OperatorSnapshot>& direct, const std::vector<OperatorSnapshot>& one_step,
                   std::size_t horizon, const std::string& model) {
  if (horizon < 1) throw InputError("CK horizon must be at least 1");
  CkReport report;
  report.model = model;
  report.horizon = horizon;
  if (one_step.empty()) return report;
  const std::size_t first = one_step.front().t;
  for (const auto& snap : direct) {
    if (snap.t < first || snap.t + horizon > first + one_step.size()) continue;
    const std::span<const OperatorSnapshot> window(one_step.data() + (snap.t - first), horizon);
    if (window.front().t != snap.t) throw InputError("one-step series is not contiguous");
    const auto d = ck_discrepancy(snap.matrix, ck_compose(window));
    report.records.push_back({snap.t, d.kl, d.tv});
  }
  return report;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("Pearson needs aligned series");
  if (x.size() < 3) throw InputError("Pearson needs at least 3 samples");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw InputError("Pearson correlation undefined for a constant series");
  PearsonResult out;
  out.n = x.size();
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size() - 2);
  const double denom = 1.0 - out.r * out.r;
  out.p = denom <= 0.0 ? 0.0 : student_t_two_sided_p(out.r * std::sqrt(df / denom), df);
  return out;
}

StratificationReport regime_stratify(const DiagnosticsSeries& series, std::span<const double> rv, double tail_fraction) {
  if (rv.size() != series.records.size()) throw InputError("realized variance is not aligned with the diagnostics");
  if (!(tail_fraction > 0.0 && tail_fraction <= 0.5)) throw InputError("tail fraction must lie in (0, 0.5]");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < rv.size(); ++k)
    if (!std::isnan(rv[k])) idx.push_back(k);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rv[a] < rv[b]; });
  const auto k = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(idx.size()) + 1e-9));
  if (k < 2) throw InputError("each realized-variance stratum needs at least 2 samples");

  StratificationReport report;
  report.model = series.model;
  report.tail_fraction = tail_fraction;
  report.stratum_size = k;
  const std::pair<const char*, double DiagnosticRecord::*> fields[] = {
      {"rho", &DiagnosticRecord::rho}, {"entropy", &DiagnosticRecord::entropy}, {"dobrushin", &DiagnosticRecord::dobrushin}};
  for (const auto& [name, field] : fields) {
    std::vector<double> low;
    std::vector<double> high;
    for (std::size_t i = 0; i < k; ++i) {
      low.push_back(series.records[idx[i]].*field);
      high.push_back(series.records[idx[idx.size() - 1 - i]].*field);
    }
    StratifiedMetric metric{name, mean(high), mean(low), std::nullopt};
    if (sample_variance(high) + sample_variance(low) > 0.0) metric.test = welch_t_test(high, low);
    report.metrics.push_back(metric);
  }
  return report;
}

std::string diagnostics_to_csv(const DiagnosticsSeries& series) {
  std::string out = "t,rho,entropy,dobrushin\n";
  for (const auto& r : series.records)
    out += fmt::format("{},{},{},{}\n", r.t, csv::format_double(r.rho), csv::format_double(r.entropy),
                       csv::format_double(r.dobrushin));
  return out;
}

std::string ck_to_csv(const CkReport& report) {
  std::string out = "t,kl,tv\n";
  for (const auto& r : report.records)
    out += fmt::format("{},{},{}\n", r.t, csv::format_double(r.kl), csv::format_double(r.tv));
  return out;
}

nlohmann::ordered_json to_json(const StratificationReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["tail_fraction"] = report.tail_fraction;
  j["stratum_size"] = report.stratum_size;
  auto metrics = nlohmann::ordered_json::array();
  for (const auto& m : report.metrics) {
    nlohmann::ordered_json e;
    e["metric"] = m.metric;
    e["mean_high_rv"] = m.mean_high;
    e["mean_low_rv"] = m.mean_low;
    if (m.test) {
      e["welch_t"] = m.test->t;
      e["welch_df"] = m.test->df;
      e["p_value"] = m.test->p;
    } else {
      e["welch_t"] = nullptr;
      e["welch_df"] = nullptr;
      e["p_value"] = nullptr;
    }
    metrics.push_back(std::move(e));
  }
  j["metrics"] = std::move(metrics);
  return j;
}

nlohmann::ordered_json to_json(const PearsonResult& result) {
  return nlohmann::ordered_json{{"r", result.r}, {"p_value", result.p}, {"n", result.n}};
}

}  // namespace inhomarkov
