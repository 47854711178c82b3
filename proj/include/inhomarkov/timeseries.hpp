#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inhomarkov/common.hpp"
#include "inhomarkov/discretization.hpp"

namespace inhomarkov {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; returns nullopt for anything else (including invalid days).
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);

enum class FillMode { forward_fill, interpolate };

FillMode parse_fill_mode(std::string_view text);

struct FeatureColumn {
  std::string name;
  std::vector<std::optional<double>> values;  // one entry per RawSeries row
  FillMode mode = FillMode::forward_fill;
};

/// Raw table as read from disk. Rows are calendar dates; a row without a price
/// is not part of the daily grid but may still carry feature releases.
struct RawSeries {
  std::vector<Date> dates;
  std::vector<std::optional<double>> prices;
  std::vector<FeatureColumn> features;

  /// Dates with a price, in order.
  std::vector<Date> price_grid() const;
  /// Prices on the grid.
  std::vector<double> grid_prices() const;
};

/// Loads `date,price,<features...>`; validates ordering and price positivity.
/// Columns missing from `fill_modes` use `default_mode`.
RawSeries read_raw_series(const std::filesystem::path& path, const std::map<std::string, FillMode>& fill_modes,
                          FillMode default_mode = FillMode::forward_fill);

/// Simple returns; out[t] = (P[t+1] - P[t]) / P[t] belongs to the later date.
std::vector<double> compute_returns(std::span<const double> prices);

struct AlignOptions {
  std::size_t max_interp_gap = 5;       // longer internal gaps are forward-filled
  std::size_t max_leading_missing = 30;  // first release later than this many grid days => drop
};

struct DroppedFeature {
  std::string name;
  std::string reason;
};

/// Features on the grid, before standardization. Rows cover grid positions
/// [first_row, grid.size()); earlier rows precede some column's first release.
struct AlignedFeatures {
  Matrix values;
  std::vector<std::string> names;
  std::size_t first_row = 0;
  std::vector<DroppedFeature> dropped;
};

AlignedFeatures align_features(const RawSeries& raw, std::span<const Date> grid, const AlignOptions& options = {});

struct SplitIndex {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
};

SplitIndex chronological_split(std::size_t total, double train_fraction = 0.70, double val_fraction = 0.15);

/// Standardized covariates with the train-segment statistics that produced them.
struct FeatureMatrix {
  Matrix values;  // T x d
  std::vector<std::string> names;
  Vector train_mean;
  Vector train_std;
  std::vector<DroppedFeature> dropped;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

inline constexpr double kMinTrainStd = 1e-12;

/// Population-std z-scoring with statistics from rows [0, split.train_end).
FeatureMatrix standardize(const Matrix& raw, const std::vector<std::string>& names, const SplitIndex& split);

/// Applies already-fit statistics to a new matrix with the same columns.
Matrix apply_standardization(const Matrix& raw, const Vector& mean, const Vector& std);

/// Plug-in mutual information (nats) between two discrete sequences.
double mutual_information(std::span<const int> a, std::span<const int> b);

/// Mutual information of every column with the labels on train rows, each
/// column cut into `quantile_bins` train-fit quantile bins.
std::vector<double> feature_mutual_information(const Matrix& features, const LabelSeries& labels,
                                               const SplitIndex& split, std::size_t quantile_bins = 10);

/// Top-k columns by mutual information, ties broken by lower column index.
std::vector<std::size_t> rank_features_mi(const Matrix& features, const LabelSeries& labels, const SplitIndex& split,
                                          std::size_t k, std::size_t quantile_bins = 10);

/// Trailing-window mean of squared returns; the first window-1 entries are NaN.
std::vector<double> realized_variance(std::span<const double> returns, std::size_t window = 21);

}  // namespace inhomarkov
