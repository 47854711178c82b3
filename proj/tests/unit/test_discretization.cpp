#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "inhomarkov/common.hpp"
#include "inhomarkov/discretization.hpp"
#include "inhomarkov/rng.hpp"

using namespace inhomarkov;

namespace {

// Linear interpolation between order statistics at position q * (N - 1).
double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("fit_quantile_bins") {
  std::vector<double> eight(8);
  std::iota(eight.begin(), eight.end(), 1.0);
  const BinEdges two = fit_quantile_bins(eight, 2);
  REQUIRE(two.interior.size() == 1);
  CHECK(two.interior[0] == 4.5);

  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  const BinEdges four = fit_quantile_bins(hundred, 4);
  REQUIRE(four.interior.size() == 3);
  CHECK(four.interior[0] == doctest::Approx(25.75).epsilon(1e-14));
  CHECK(four.interior[1] == doctest::Approx(50.5).epsilon(1e-14));
  CHECK(four.interior[2] == doctest::Approx(75.25).epsilon(1e-14));

  Rng rng(8);
  std::vector<double> noise(333);
  for (auto& v : noise) v = rng.normal();
  const BinEdges seven = fit_quantile_bins(noise, 7);
  for (std::size_t k = 1; k < 7; ++k)
    CHECK(std::abs(seven.interior[k - 1] - oracle_quantile(noise, static_cast<double>(k) / 7.0)) < 1e-12);

  CHECK_THROWS_AS(fit_quantile_bins(std::vector<double>(10, 3.0), 4), InputError);
  CHECK_THROWS_AS(fit_quantile_bins(eight, 1), InputError);
  CHECK_THROWS_AS(fit_quantile_bins(eight, 9), InputError);

  // Duplicate edges collapse and the reduction is visible.
  const BinEdges lumpy = fit_quantile_bins(std::vector<double>{0, 0, 0, 0, 0, 0, 1, 2}, 4);
  CHECK(lumpy.requested == 4);
  CHECK(lumpy.collapsed());
  CHECK(std::is_sorted(lumpy.interior.begin(), lumpy.interior.end()));
  CHECK(std::adjacent_find(lumpy.interior.begin(), lumpy.interior.end()) == lumpy.interior.end());
}

TEST_CASE("discretize") {
  const BinEdges e{{4.5}, 2};
  CHECK(discretize(std::vector<double>{1, 9}, e).states == std::vector<int>{0, 1});
  CHECK(discretize(std::vector<double>{4.5}, e).states == std::vector<int>{1});
  CHECK(discretize(std::vector<double>{-1e300, 1e300}, e).states == std::vector<int>{0, 1});
  try {
    discretize(std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}, e);
    FAIL("expected rejection");
  } catch (const InputError& ex) {
    CHECK(std::string(ex.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("quantile bins give roughly uniform, non-empty train states") {
  Rng rng(21);
  std::vector<double> r(800);
  for (auto& v : r) v = 0.01 * rng.normal() * (rng.uniform() < 0.1 ? 4.0 : 1.0);
  for (std::size_t n : {2, 5, 11, 20}) {
    const StateSeries s = discretize(r, fit_quantile_bins(r, n));
    std::vector<double> freq(n, 0.0);
    for (int x : s.states) freq[static_cast<std::size_t>(x)] += 1.0 / static_cast<double>(r.size());
    for (double f : freq) {
      CHECK(f > 0.0);
      CHECK(std::abs(f - 1.0 / static_cast<double>(n)) <= 0.3 / static_cast<double>(n));
    }
  }
}

TEST_CASE("state_labels") {
  const StateSeries s{{0, 1, 2}, 3};
  const LabelSeries one = state_labels(s, 1);
  CHECK(one.labels == std::vector<int>{1, 2});
  CHECK(one.m == 3);
  CHECK(state_labels(s, 2).labels == std::vector<int>{2});
  CHECK_THROWS_AS(state_labels(s, 0), InputError);
  CHECK_THROWS_AS(state_labels(s, 3), InputError);

  Rng rng(4);
  StateSeries long_s;
  long_s.n = 6;
  for (int k = 0; k < 100; ++k) long_s.states.push_back(static_cast<int>(rng.index(6)));
  const LabelSeries five = state_labels(long_s, 5);
  for (std::size_t t = 0; t < five.size(); ++t) CHECK(five.labels[t] == long_s.states[t + 5]);
}

TEST_CASE("forward_return_labels") {
  // R_t = (P[t+2] - P[t+1]) / P[t+1] at h = 1: [0.1, 0.1, -0.1].
  const std::vector<double> prices{100, 100, 110, 121, 108.9};
  const LabelSeries f = forward_return_labels(prices, 1, 2, 3);
  CHECK(f.kind == LabelKind::forward_return);
  CHECK(f.labels == std::vector<int>{1, 1, 0});
  REQUIRE(f.edges.interior.size() == 1);
  CHECK(f.edges.interior[0] == doctest::Approx(0.1).epsilon(1e-12));

  const LabelSeries flat = forward_return_labels(std::vector<double>(12, 50.0), 2, 3, 6);
  CHECK(flat.labels.size() == 9);
  CHECK(std::all_of(flat.labels.begin(), flat.labels.end(), [&](int y) { return y == flat.labels.front(); }));

  CHECK_THROWS_AS(forward_return_labels(prices, 1, 1, 3), InputError);
  CHECK_THROWS_AS(forward_return_labels(prices, 4, 2, 3), InputError);
  CHECK_THROWS_AS(forward_return_labels(prices, 0, 2, 3), InputError);
}

TEST_CASE("bin edges JSON round trip") {
  Rng rng(2);
  std::vector<double> v(50);
  for (auto& x : v) x = rng.normal() / 3.0;
  const BinEdges e = fit_quantile_bins(v, 6);
  const BinEdges back = bin_edges_from_json(to_json(e));
  CHECK(back.interior == e.interior);
  CHECK(back.requested == e.requested);
  CHECK_THROWS_AS(bin_edges_from_json("{\"n\": 3}"), InputError);
}
