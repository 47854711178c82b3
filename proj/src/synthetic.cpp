#include "inhomarkov/synthetic.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "inhomarkov/csv.hpp"
#include "inhomarkov/operator_diagnostics.hpp"
#include "inhomarkov/rng.hpp"
#include "inhomarkov/timeseries.hpp"

namespace inhomarkov {

void SyntheticSpec::validate() const {
  if (n < 2) throw InputError("synthetic chain needs at least 2 states");
  if (regimes.empty()) throw InputError("synthetic chain needs at least one regime");
  if (!(regime_persistence > 0.0 && regime_persistence <= 1.0)) throw InputError("persistence must lie in (0, 1]");
  if (!(feature_noise_sigma >= 0.0)) throw InputError("feature noise must be non-negative");
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    const auto& a = regimes[r];
    if (a.rows() != static_cast<Eigen::Index>(n) || a.cols() != static_cast<Eigen::Index>(n))
      throw InputError(fmt::format("regime {} operator is not {}x{}", r, n, n));
    try {
      validate_row_stochastic(a, 1e-12);
    } catch (const InputError& e) {
      throw InputError(fmt::format("regime {}: {}", r, e.what()));
    }
  }
}

SyntheticSpec two_regime_spec(std::size_t n, double persistence, double noise_sigma, std::uint64_t seed, double stay) {
  if (n < 2) throw InputError("synthetic chain needs at least 2 states");
  if (!(stay >= 0.0 && stay <= 1.0)) throw InputError("synthetic stay probability must lie in [0, 1]");
  const auto N = static_cast<Eigen::Index>(n);
  const double centre = 0.5 * static_cast<double>(n - 1);
  // Leftover mass leans towards the tails in the persistent regime and towards
  // the centre in the reverting one, so the regimes differ in stationary law
  // and in return volatility.
  auto build = [&](auto stay_column, auto weight) {
    Matrix a = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const Eigen::Index target = stay_column(i);
      double total = 0.0;
      for (Eigen::Index j = 0; j < N; ++j)
        if (j != target) total += weight(j);
      for (Eigen::Index j = 0; j < N; ++j) a(i, j) = j == target ? stay : (1.0 - stay) * weight(j) / total;
    }
    return a;
  };
  auto distance = [&](Eigen::Index j) { return std::abs(static_cast<double>(j) - centre); };
  const Matrix persist = build([](Eigen::Index i) { return i; }, [&](Eigen::Index j) { return 1.0 + distance(j); });
  const Matrix revert =
      build([&](Eigen::Index i) { return N - 1 - i; }, [&](Eigen::Index j) { return 1.0 + centre - distance(j); });
  SyntheticSpec spec;
  spec.n = n;
  spec.regimes = {persist, revert};
  spec.regime_persistence = persistence;
  spec.feature_noise_sigma = noise_sigma;
  spec.seed = seed;
  return spec;
}

SyntheticSpec headline_spec(std::uint64_t seed) { return two_regime_spec(5, 0.98, 0.1, seed); }

GroundTruth generate(const SyntheticSpec& spec, std::size_t length, std::uint64_t seed) {
  spec.validate();
  if (length < 100) throw InputError(fmt::format("synthetic series needs at least 100 steps, got {}", length));
  Rng rng(seed);
  const std::size_t regimes = spec.regimes.size();
  GroundTruth truth;
  truth.operators = spec.regimes;
  truth.states.n = spec.n;
  truth.states.states.resize(length);
  truth.regime_path.resize(length);
  truth.features.resize(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(regimes));

  int regime = static_cast<int>(rng.index(regimes));
  int state = static_cast<int>(rng.index(spec.n));
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      const Matrix& op = spec.regimes[static_cast<std::size_t>(truth.regime_path[t - 1])];
      state = static_cast<int>(rng.categorical(op.row(truth.states.states[t - 1]), spec.n));
      if (regimes > 1 && rng.uniform() >= spec.regime_persistence) {
        const auto other = rng.index(regimes - 1);
        regime = static_cast<int>(other >= static_cast<std::size_t>(regime) ? other + 1 : other);
      }
    }
    truth.states.states[t] = state;
    truth.regime_path[t] = regime;
    for (std::size_t r = 0; r < regimes; ++r)
      truth.features(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r)) =
          (static_cast<int>(r) == regime ? 1.0 : 0.0) + spec.feature_noise_sigma * rng.normal();
  }
  return truth;
}

std::vector<OperatorSnapshot> exact_operator_series(const SyntheticSpec& spec, const std::vector<int>& regime_path) {
  std::vector<OperatorSnapshot> out;
  out.reserve(regime_path.size());
  for (std::size_t t = 0; t < regime_path.size(); ++t) {
    const int r = regime_path[t];
    if (r < 0 || static_cast<std::size_t>(r) >= spec.regimes.size())
      throw InputError(fmt::format("regime {} out of range at t = {}", r, t));
    out.push_back({t, 1, spec.regimes[static_cast<std::size_t>(r)]});
  }
  return out;
}

Matrix exact_h_step(const SyntheticSpec& spec, const std::vector<int>& regime_path, std::size_t t, std::size_t horizon) {
  if (horizon < 1 || t + horizon > regime_path.size()) throw InputError("h-step window exceeds the regime path");
  const std::size_t n = spec.n;
  std::vector<double> acc(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) acc[i * n + i] = 1.0;
  for (std::size_t s = t; s < t + horizon; ++s) {
    const Matrix& a = spec.regimes[static_cast<std::size_t>(regime_path[s])];
    std::vector<double> next(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
          next[i * n + j] += acc[i * n + k] * a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    acc.swap(next);
  }
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc[i * n + j];
  return out;
}

double recovery_error(const std::vector<OperatorSnapshot>& learned, const std::vector<OperatorSnapshot>& truth) {
  if (learned.size() != truth.size() || learned.empty()) throw InputError("recovery needs aligned, non-empty series");
  double sum = 0.0;
  std::size_t rows = 0;
  for (std::size_t k = 0; k < learned.size(); ++k) {
    const auto& a = learned[k];
    const auto& b = truth[k];
    if (a.t != b.t) throw InputError(fmt::format("snapshot {} misaligned: t = {} vs {}", k, a.t, b.t));
    if (a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols())
      throw InputError(fmt::format("snapshot at t = {} differs in shape", a.t));
    for (Eigen::Index i = 0; i < a.matrix.rows(); ++i, ++rows)
      sum += 0.5 * (a.matrix.row(i) - b.matrix.row(i)).cwiseAbs().sum();
  }
  return sum / static_cast<double>(rows);
}

Vector stationary_distribution(const Matrix& op, std::size_t iterations) {
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(op.rows(), 1.0 / static_cast<double>(op.rows()));
  for (std::size_t k = 0; k < iterations; ++k) {
    Eigen::RowVectorXd next = pi * op;
    const double change = (next - pi).cwiseAbs().sum();
    pi = next / next.sum();
    if (change < 1e-15) break;
  }
  return pi.transpose();
}

double synthetic_return(std::size_t state, std::size_t n, double u, double width) {
  const double lo = (static_cast<double>(state) - 0.5 * static_cast<double>(n)) * width;
  return lo + u * width;
}

std::string to_ingest_csv(const GroundTruth& truth, std::uint64_t seed) {
  Rng rng(seed);
  const auto regimes = truth.features.cols();
  std::string out = "date,price";
  for (Eigen::Index r = 0; r < regimes; ++r) out += fmt::format(",regime_{}", r);
  out += '\n';
  const Date start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 3};
  auto write_row = [&](std::size_t row, double price, std::size_t feature_row) {
    out += format_date(start + std::chrono::days{static_cast<int>(row)});
    out += ',';
    out += csv::format_double(price);
    for (Eigen::Index r = 0; r < regimes; ++r) {
      out += ',';
      out += csv::format_double(truth.features(static_cast<Eigen::Index>(feature_row), r));
    }
    out += '\n';
  };
  double price = 100.0;
  write_row(0, price, 0);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    // Jitter inside the state's interval keeps returns continuous so quantile
    // edges fall between states rather than on tied values.
    const double u = 0.05 + 0.9 * rng.uniform();
    price *= 1.0 + synthetic_return(static_cast<std::size_t>(truth.states.states[t]), truth.states.n, u);
    write_row(t + 1, price, t);
  }
  return out;
}

std::string truth_to_json(const SyntheticSpec& spec, const GroundTruth& truth) {
  nlohmann::ordered_json j;
  j["n"] = spec.n;
  j["regime_persistence"] = spec.regime_persistence;
  j["feature_noise_sigma"] = spec.feature_noise_sigma;
  j["seed"] = spec.seed;
  auto ops = nlohmann::ordered_json::array();
  for (const auto& a : spec.regimes) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Vector row = a.row(i).transpose();
      rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    ops.push_back(std::move(rows));
  }
  j["operators"] = std::move(ops);
  j["regime_path"] = truth.regime_path;
  j["states"] = truth.states.states;
  return j.dump() + "\n";
}

}  // namespace inhomarkov
