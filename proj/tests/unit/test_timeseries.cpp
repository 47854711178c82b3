#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "inhomarkov/rng.hpp"
#include "inhomarkov/timeseries.hpp"
#include "support.hpp"

using namespace inhomarkov;

namespace {

Date day(int offset) { return Date{std::chrono::days{10957 + offset}}; }  // 2000-01-01 + offset

RawSeries one_column(std::vector<std::optional<double>> values, FillMode mode) {
  RawSeries raw;
  for (std::size_t k = 0; k < values.size(); ++k) {
    raw.dates.push_back(day(static_cast<int>(k)));
    raw.prices.push_back(100.0);
  }
  raw.features.push_back({"x", std::move(values), mode});
  return raw;
}

std::vector<double> column(const AlignedFeatures& a, Eigen::Index j = 0) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < a.values.rows(); ++r) out.push_back(a.values(r, j));
  return out;
}

}  // namespace

TEST_CASE("compute_returns") {
  const std::vector<double> r = compute_returns(std::vector<double>{100, 110, 99});
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(0.10).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(-0.10).epsilon(1e-15));
  CHECK(compute_returns(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0});
  try {
    compute_returns(std::vector<double>{100, 0, 50});
    FAIL("expected rejection");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_returns(std::vector<double>{100}), InputError);
}

TEST_CASE("align_features fill modes") {
  const RawSeries ff = one_column({5.0, std::nullopt, std::nullopt, 8.0}, FillMode::forward_fill);
  CHECK(column(align_features(ff, ff.price_grid())) == std::vector<double>{5, 5, 5, 8});

  const RawSeries li = one_column({5.0, std::nullopt, std::nullopt, 8.0}, FillMode::interpolate);
  CHECK(column(align_features(li, li.price_grid())) == std::vector<double>{5, 6, 7, 8});

  // A gap longer than the threshold falls back to forward fill.
  AlignOptions narrow;
  narrow.max_interp_gap = 1;
  CHECK(column(align_features(li, li.price_grid(), narrow)) == std::vector<double>{5, 5, 5, 8});

  // Trailing gaps have no right neighbour and are carried forward.
  const RawSeries tail = one_column({1.0, 2.0, std::nullopt}, FillMode::interpolate);
  CHECK(column(align_features(tail, tail.price_grid())) == std::vector<double>{1, 2, 2});
}

TEST_CASE("align_features drops and trims") {
  RawSeries raw = one_column({std::nullopt, 2.0, 3.0, 4.0}, FillMode::forward_fill);
  raw.features.push_back({"empty", {std::nullopt, std::nullopt, std::nullopt, std::nullopt}, FillMode::forward_fill});
  const AlignedFeatures a = align_features(raw, raw.price_grid());
  REQUIRE(a.names == std::vector<std::string>{"x"});
  REQUIRE(a.dropped.size() == 1);
  CHECK(a.dropped[0].name == "empty");
  CHECK(a.first_row == 1);
  CHECK(column(a) == std::vector<double>{2, 3, 4});

  // First release beyond the leading-missing window: dropped.
  std::vector<std::optional<double>> late(40, std::nullopt);
  late[35] = 1.0;
  RawSeries raw_late = one_column(late, FillMode::forward_fill);
  raw_late.features.push_back({"early", std::vector<std::optional<double>>(40, 0.5), FillMode::forward_fill});
  const AlignedFeatures b = align_features(raw_late, raw_late.price_grid());
  CHECK(b.names == std::vector<std::string>{"early"});
  REQUIRE(b.dropped.size() == 1);
  CHECK(b.dropped[0].name == "x");
  CHECK(b.first_row == 0);
}

TEST_CASE("align_features maps off-grid releases to the next grid day") {
  RawSeries raw;
  raw.dates = {day(0), day(1), day(2), day(3)};
  raw.prices = {100.0, std::nullopt, 101.0, 102.0};
  raw.features.push_back({"x", {1.0, 7.0, std::nullopt, std::nullopt}, FillMode::forward_fill});
  const AlignedFeatures a = align_features(raw, raw.price_grid());
  CHECK(column(a) == std::vector<double>{1, 7, 7});
}

TEST_CASE("align_features is idempotent on fully observed input") {
  const RawSeries raw = one_column({1.0, 2.5, -3.0, 4.0}, FillMode::interpolate);
  const AlignedFeatures a = align_features(raw, raw.price_grid());
  const AlignedFeatures b = align_features(raw, raw.price_grid());
  CHECK(column(a) == std::vector<double>{1.0, 2.5, -3.0, 4.0});
  CHECK(a.values == b.values);
}

TEST_CASE("read_raw_series validation") {
  const auto dir = test_support::work_dir("read_raw_series");
  const auto good = test_support::write_file(dir, "good.csv",
                                             "date,price,a,b\n2020-01-01,100,1,\n2020-01-02,,2,\n2020-01-03,101,,5\n");
  const RawSeries raw = read_raw_series(good, {{"b", FillMode::interpolate}});
  CHECK(raw.dates.size() == 3);
  CHECK(raw.price_grid().size() == 2);
  CHECK(raw.features[1].mode == FillMode::interpolate);
  CHECK(raw.features[0].mode == FillMode::forward_fill);
  CHECK_FALSE(raw.features[1].values[0].has_value());

  const auto bad_date = test_support::write_file(dir, "bad_date.csv", "date,price\n2020-01-01,100\n2020-13-01,101\n");
  try {
    read_raw_series(bad_date, {});
    FAIL("expected rejection");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  const auto dup = test_support::write_file(dir, "dup.csv", "date,price\n2020-01-01,100\n2020-01-01,101\n");
  CHECK_THROWS_AS(read_raw_series(dup, {}), InputError);
  const auto neg = test_support::write_file(dir, "neg.csv", "date,price\n2020-01-01,100\n2020-01-02,-1\n");
  CHECK_THROWS_AS(read_raw_series(neg, {}), InputError);
  const auto header = test_support::write_file(dir, "header.csv", "day,price\n2020-01-01,100\n");
  CHECK_THROWS_AS(read_raw_series(header, {}), InputError);
}

TEST_CASE("parse_date") {
  CHECK(parse_date("2020-02-29").has_value());
  CHECK_FALSE(parse_date("2021-02-29").has_value());
  CHECK_FALSE(parse_date("2021-2-1").has_value());
  CHECK(format_date(*parse_date("1999-12-31")) == "1999-12-31");
}

TEST_CASE("chronological_split") {
  auto s = chronological_split(100);
  CHECK(s.train_end == 70);
  CHECK(s.val_end == 85);
  CHECK(s.total == 100);
  s = chronological_split(10);
  CHECK(s.train_end == 7);
  CHECK(s.val_end == 8);
  CHECK_THROWS_AS(chronological_split(3), InputError);
}

TEST_CASE("standardize") {
  Matrix raw(3, 2);
  raw << 1, 4, 3, 4, 5, 4;
  const FeatureMatrix f = standardize(raw, {"a", "const"}, {2, 2, 3});
  REQUIRE(f.cols() == 1);
  CHECK(f.names == std::vector<std::string>{"a"});
  CHECK(f.train_mean(0) == 2.0);
  CHECK(f.train_std(0) == 1.0);
  CHECK(f.values(0, 0) == -1.0);
  CHECK(f.values(1, 0) == 1.0);
  CHECK(f.values(2, 0) == 3.0);
  REQUIRE(f.dropped.size() == 1);
  CHECK(f.dropped[0].name == "const");

  // Train columns come out with zero mean and unit population std; a second
  // pass over already-standardized data is the identity.
  Rng rng(11);
  Matrix x(200, 3);
  for (auto& v : x.reshaped()) v = 5.0 + 3.0 * rng.normal();
  const SplitIndex split = chronological_split(200);
  const FeatureMatrix z = standardize(x, {"a", "b", "c"}, split);
  const auto train = z.values.topRows(static_cast<Eigen::Index>(split.train_end));
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mu = train.col(j).mean();
    const double sd = std::sqrt((train.col(j).array() - mu).square().mean());
    CHECK(std::abs(mu) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
  const FeatureMatrix again = standardize(z.values, z.names, split);
  CHECK((again.values - z.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((apply_standardization(x, z.train_mean, z.train_std) - z.values).cwiseAbs().maxCoeff() == 0.0);
}

namespace {

double entropy_of(std::span<const int> v) {
  std::map<int, double> counts;
  for (int x : v) counts[x] += 1.0;
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = c / static_cast<double>(v.size());
    h -= p * std::log(p);
  }
  return h;
}

// Joint-histogram plug-in MI written out directly.
double brute_force_mi(std::span<const int> a, std::span<const int> b) {
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  for (std::size_t k = 0; k < a.size(); ++k) {
    joint[{a[k], b[k]}] += 1.0 / n;
    pa[a[k]] += 1.0 / n;
    pb[b[k]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, p] : joint) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
  return mi;
}

}  // namespace

TEST_CASE("mutual information and feature ranking") {
  Rng rng(5);
  const std::size_t T = 200;
  StateSeries states;
  states.n = 4;
  for (std::size_t t = 0; t < T + 1; ++t) states.states.push_back(static_cast<int>(rng.index(4)));
  const LabelSeries labels = state_labels(states, 1);
  const SplitIndex split{T, T, T + 1};

  std::vector<std::size_t> perm(T);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Matrix features(T + 1, 3);
  for (std::size_t t = 0; t < T; ++t) {
    features(static_cast<Eigen::Index>(t), 0) = static_cast<double>(labels.labels[perm[t]]);  // shuffled: independent
    features(static_cast<Eigen::Index>(t), 1) = static_cast<double>(labels.labels[t]);         // identical to the label
    features(static_cast<Eigen::Index>(t), 2) = rng.normal();
  }
  features.row(T).setZero();

  const std::vector<double> mi = feature_mutual_information(features, labels, split, 10);
  const std::span<const int> train_labels(labels.labels.data(), T);
  CHECK(mi[1] == doctest::Approx(entropy_of(train_labels)).epsilon(1e-12));

  std::vector<int> shuffled(T);
  for (std::size_t t = 0; t < T; ++t) shuffled[t] = labels.labels[perm[t]];
  CHECK(mi[0] == doctest::Approx(brute_force_mi(shuffled, train_labels)).epsilon(1e-12));
  CHECK(mi[0] < 0.1);

  const auto ranked = rank_features_mi(features, labels, split, 3, 10);
  CHECK(ranked.front() == 1);
  auto sorted = ranked;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2});
  CHECK(rank_features_mi(features, labels, split, 1, 10) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(rank_features_mi(features, labels, split, 0, 10), InputError);
  CHECK_THROWS_AS(rank_features_mi(features, labels, split, 4, 10), InputError);

  // Ties go to the lower index.
  Matrix twins(T + 1, 2);
  twins.col(0) = features.col(1);
  twins.col(1) = features.col(1);
  CHECK(rank_features_mi(twins, labels, split, 1, 10) == std::vector<std::size_t>{0});

  // MI of a discrete sequence with itself is its entropy.
  CHECK(mutual_information(train_labels, train_labels) == doctest::Approx(entropy_of(train_labels)).epsilon(1e-12));
}

TEST_CASE("realized_variance") {
  const auto zero = realized_variance(std::vector<double>(30, 0.0), 21);
  CHECK(std::isnan(zero[19]));
  CHECK(zero[20] == 0.0);
  const auto c = realized_variance(std::vector<double>(25, 0.03), 21);
  CHECK(c[24] == doctest::Approx(0.0009).epsilon(1e-12));
  const auto small = realized_variance(std::vector<double>{0.1, -0.1, 0.2}, 3);
  CHECK(small[2] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK_THROWS_AS(realized_variance(std::vector<double>{0.1, 0.2}, 1), InputError);

  Rng rng(3);
  std::vector<double> r(500);
  for (auto& v : r) v = 0.01 * rng.normal();
  for (double v : realized_variance(r, 21))
    if (!std::isnan(v)) CHECK(v >= 0.0);
}
