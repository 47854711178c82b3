#include "inhomarkov/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <fmt/format.h>

#include "inhomarkov/csv.hpp"

namespace inhomarkov {

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (text[i] < '0' || text[i] > '9') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

FillMode parse_fill_mode(std::string_view text) {
  if (text == "forward_fill") return FillMode::forward_fill;
  if (text == "interpolate") return FillMode::interpolate;
  throw InputError(fmt::format("unknown fill mode '{}'", text));
}

std::vector<Date> RawSeries::price_grid() const {
  std::vector<Date> grid;
  for (std::size_t i = 0; i < dates.size(); ++i)
    if (prices[i]) grid.push_back(dates[i]);
  return grid;
}

std::vector<double> RawSeries::grid_prices() const {
  std::vector<double> out;
  for (const auto& p : prices)
    if (p) out.push_back(*p);
  return out;
}

RawSeries read_raw_series(const std::filesystem::path& path, const std::map<std::string, FillMode>& fill_modes,
                          FillMode default_mode) {
  const csv::Table table = csv::read(path);
  if (table.header.size() < 2 || table.header[0] != "date" || table.header[1] != "price")
    throw InputError(fmt::format("'{}': header must start with date,price", path.string()));

  RawSeries raw;
  for (std::size_t c = 2; c < table.header.size(); ++c) {
    FeatureColumn col;
    col.name = table.header[c];
    if (col.name.empty()) throw InputError(fmt::format("'{}': empty feature column name at position {}", path.string(), c));
    const auto it = fill_modes.find(col.name);
    col.mode = it == fill_modes.end() ? default_mode : it->second;
    raw.features.push_back(std::move(col));
  }

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    const auto date = parse_date(row[0]);
    if (!date) throw InputError(fmt::format("line {}: unparseable date '{}'", line, row[0]));
    if (!raw.dates.empty() && *date <= raw.dates.back())
      throw InputError(fmt::format("line {}: date {} is not after the previous row", line, row[0]));
    raw.dates.push_back(*date);

    if (row[1].empty()) {
      raw.prices.push_back(std::nullopt);
    } else {
      const double price = csv::parse_double(row[1], fmt::format("line {} column price", line));
      if (!(price > 0.0)) throw InputError(fmt::format("line {}: price must be positive, got {}", line, row[1]));
      raw.prices.push_back(price);
    }
    for (std::size_t c = 2; c < row.size(); ++c) {
      auto& values = raw.features[c - 2].values;
      if (row[c].empty()) {
        values.push_back(std::nullopt);
      } else {
        const double v = csv::parse_double(row[c], fmt::format("line {} column {}", line, table.header[c]));
        if (!std::isfinite(v)) throw InputError(fmt::format("line {} column {}: non-finite value", line, table.header[c]));
        values.push_back(v);
      }
    }
  }
  return raw;
}

std::vector<double> compute_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw InputError("need at least two prices to form a return");
  for (std::size_t i = 0; i < prices.size(); ++i)
    if (!(prices[i] > 0.0)) throw InputError(fmt::format("non-positive price at index {}", i));
  std::vector<double> out(prices.size() - 1);
  for (std::size_t t = 0; t + 1 < prices.size(); ++t) out[t] = (prices[t + 1] - prices[t]) / prices[t];
  return out;
}

AlignedFeatures align_features(const RawSeries& raw, std::span<const Date> grid, const AlignOptions& options) {
  AlignedFeatures out;
  const std::size_t T = grid.size();
  std::vector<std::vector<double>> columns;

  for (const auto& col : raw.features) {
    // A release on a non-grid date becomes visible at the next grid date; a
    // later release landing on the same grid date supersedes it.
    std::vector<std::optional<double>> observed(T);
    std::size_t g = 0;
    for (std::size_t r = 0; r < raw.dates.size(); ++r) {
      while (g < T && grid[g] < raw.dates[r]) ++g;
      if (g == T) break;
      if (col.values[r]) observed[g] = col.values[r];
    }
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < T; ++i)
      if (observed[i]) positions.push_back(i);

    if (positions.empty()) {
      out.dropped.push_back({col.name, "no observations"});
      continue;
    }
    if (positions.front() >= options.max_leading_missing) {
      out.dropped.push_back({col.name, fmt::format("first observation after {} grid days (extrapolation required)",
                                                   options.max_leading_missing)});
      continue;
    }

    std::vector<double> filled(T, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < positions.size(); ++k) {
      const std::size_t p = positions[k];
      const double v = *observed[p];
      const std::size_t next = k + 1 < positions.size() ? positions[k + 1] : T;
      filled[p] = v;
      const bool interpolate = col.mode == FillMode::interpolate && next < T && next - p - 1 <= options.max_interp_gap;
      for (std::size_t i = p + 1; i < next; ++i) {
        if (interpolate) {
          const double w = static_cast<double>(i - p) / static_cast<double>(next - p);
          filled[i] = v + w * (*observed[next] - v);
        } else {
          filled[i] = v;
        }
      }
    }
    out.first_row = std::max(out.first_row, positions.front());
    out.names.push_back(col.name);
    columns.push_back(std::move(filled));
  }

  const std::size_t rows = T > out.first_row ? T - out.first_row : 0;
  out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (std::size_t i = 0; i < rows; ++i)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns[j][out.first_row + i];
  return out;
}

SplitIndex chronological_split(std::size_t total, double train_fraction, double val_fraction) {
  if (total < 10) throw InputError(fmt::format("series of length {} is too short to split (minimum 10)", total));
  if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || train_fraction + val_fraction >= 1.0)
    throw InputError("split fractions must be positive and leave a test segment");
  const double n = static_cast<double>(total);
  SplitIndex split;
  split.total = total;
  // The small offset absorbs representation error such as 0.7 * 100 = 69.999...
  split.train_end = static_cast<std::size_t>(std::floor(train_fraction * n + 1e-9));
  split.val_end = static_cast<std::size_t>(std::floor((train_fraction + val_fraction) * n + 1e-9));
  if (!(0 < split.train_end && split.train_end < split.val_end && split.val_end < total))
    throw InputError(fmt::format("split of {} rows leaves an empty segment", total));
  return split;
}

FeatureMatrix standardize(const Matrix& raw, const std::vector<std::string>& names, const SplitIndex& split) {
  if (split.train_end == 0 || split.train_end > static_cast<std::size_t>(raw.rows()))
    throw InputError("training segment is empty or exceeds the feature matrix");
  if (names.size() != static_cast<std::size_t>(raw.cols())) throw InputError("feature names do not match columns");
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
      if (!std::isfinite(raw(i, j))) throw InputError(fmt::format("feature matrix has a missing entry at ({}, {})", i, j));

  const auto train = raw.topRows(static_cast<Eigen::Index>(split.train_end));
  std::vector<Eigen::Index> kept;
  std::vector<double> means;
  std::vector<double> stds;
  FeatureMatrix out;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double mean = train.col(j).mean();
    const double var = (train.col(j).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < kMinTrainStd) {
      out.dropped.push_back({names[static_cast<std::size_t>(j)], "constant on the training segment"});
      continue;
    }
    kept.push_back(j);
    means.push_back(mean);
    stds.push_back(sd);
    out.names.push_back(names[static_cast<std::size_t>(j)]);
  }
  const auto d = static_cast<Eigen::Index>(kept.size());
  out.train_mean = Eigen::Map<const Vector>(means.data(), d);
  out.train_std = Eigen::Map<const Vector>(stds.data(), d);
  Matrix selected(raw.rows(), d);
  for (Eigen::Index k = 0; k < d; ++k) selected.col(k) = raw.col(kept[static_cast<std::size_t>(k)]);
  out.values = apply_standardization(selected, out.train_mean, out.train_std);
  return out;
}

Matrix apply_standardization(const Matrix& raw, const Vector& mean, const Vector& std) {
  if (raw.cols() != mean.size() || raw.cols() != std.size()) throw InputError("standardization statistics do not match columns");
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) out.col(j) = (raw.col(j).array() - mean(j)) / std(j);
  return out;
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw InputError("mutual information needs aligned sequences");
  if (a.empty()) return 0.0;
  const int na = *std::max_element(a.begin(), a.end()) + 1;
  const int nb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> joint(static_cast<std::size_t>(na * nb), 0.0);
  std::vector<double> pa(static_cast<std::size_t>(na), 0.0);
  std::vector<double> pb(static_cast<std::size_t>(nb), 0.0);
  const double w = 1.0 / static_cast<double>(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] < 0 || b[t] < 0) throw InputError("mutual information needs non-negative codes");
    joint[static_cast<std::size_t>(a[t] * nb + b[t])] += w;
    pa[static_cast<std::size_t>(a[t])] += w;
    pb[static_cast<std::size_t>(b[t])] += w;
  }
  double mi = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double pij = joint[static_cast<std::size_t>(i * nb + j)];
      if (pij > 0.0) mi += pij * std::log(pij / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
    }
  return std::max(mi, 0.0);
}

std::vector<double> feature_mutual_information(const Matrix& features, const LabelSeries& labels,
                                               const SplitIndex& split, std::size_t quantile_bins) {
  const std::size_t rows = std::min({split.train_end, labels.size(), static_cast<std::size_t>(features.rows())});
  if (rows == 0) throw InputError("no labelled training rows for feature ranking");
  std::span<const int> train_labels(labels.labels.data(), rows);
  std::vector<double> mi(static_cast<std::size_t>(features.cols()), 0.0);
  std::vector<double> column(rows);
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    for (std::size_t t = 0; t < rows; ++t) column[t] = features(static_cast<Eigen::Index>(t), j);
    if (std::all_of(column.begin(), column.end(), [&](double v) { return v == column.front(); })) continue;
    const BinEdges edges = fit_quantile_bins(column, std::min(quantile_bins, rows));
    const StateSeries codes = discretize(column, edges);
    mi[static_cast<std::size_t>(j)] = mutual_information(codes.states, train_labels);
  }
  return mi;
}

std::vector<std::size_t> rank_features_mi(const Matrix& features, const LabelSeries& labels, const SplitIndex& split,
                                          std::size_t k, std::size_t quantile_bins) {
  if (k == 0) throw InputError("k must be positive");
  if (k > static_cast<std::size_t>(features.cols()))
    throw InputError(fmt::format("k = {} exceeds the {} available features", k, features.cols()));
  const std::vector<double> mi = feature_mutual_information(features, labels, split, quantile_bins);
  std::vector<std::size_t> order(mi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mi[a] > mi[b]; });
  order.resize(k);
  return order;
}

std::vector<double> realized_variance(std::span<const double> returns, std::size_t window) {
  if (window <= 1) throw InputError("realized-variance window must exceed 1");
  if (returns.size() < window)
    throw InputError(fmt::format("need at least {} returns for the realized-variance window", window));
  std::vector<double> out(returns.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = window - 1; t < returns.size(); ++t) {
    double sum = 0.0;
    for (std::size_t s = t + 1 - window; s <= t; ++s) sum += returns[s] * returns[s];
    out[t] = sum / static_cast<double>(window);
  }
  return out;
}

}  // namespace inhomarkov
