#include <doctest.h>

#include <cmath>

#include "inhomarkov/operator_diagnostics.hpp"
#include "inhomarkov/rng.hpp"
#include "inhomarkov/stats.hpp"

using namespace inhomarkov;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Vector random_simplex(Rng& rng, std::size_t m) {
  Vector v(static_cast<Eigen::Index>(m));
  for (auto& x : v) x = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

Matrix random_stochastic(Rng& rng, std::size_t n) {
  Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) = random_simplex(rng, n).transpose();
  return a;
}

Matrix three_rows() {
  Matrix a(3, 2);
  a << 1, 0, 0, 1, 0.5, 0.5;
  return a;
}

}  // namespace

TEST_CASE("tv_distance") {
  CHECK(tv_distance(vec({0.2, 0.8}), vec({0.2, 0.8})) == 0.0);
  CHECK(tv_distance(vec({1, 0}), vec({0, 1})) == 1.0);
  CHECK(tv_distance(vec({0.5, 0.5}), vec({0.25, 0.75})) == 0.25);
  CHECK_THROWS_AS(tv_distance(vec({1}), vec({0.5, 0.5})), InputError);
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const Vector p = random_simplex(rng, 6), q = random_simplex(rng, 6), r = random_simplex(rng, 6);
    CHECK(tv_distance(p, q) == tv_distance(q, p));
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12);
  }
}

TEST_CASE("kl_divergence") {
  const Vector p = vec({0.3, 0.7});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(vec({1, 0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(kl_divergence(vec({0.5, 0.5}), vec({1, 0}))));
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vector a = random_simplex(rng, 5), b = random_simplex(rng, 5);
    CHECK(kl_divergence(a, b) >= -1e-12);
    CHECK(kl_divergence(a, a) == 0.0);
  }
}

TEST_CASE("row_heterogeneity, entropy, dobrushin") {
  CHECK(row_heterogeneity(Matrix::Constant(4, 3, 1.0 / 3.0)) == 0.0);
  CHECK(row_heterogeneity(Matrix::Identity(2, 2)) == 1.0);
  CHECK(row_heterogeneity(three_rows()) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(row_heterogeneity(Matrix::Ones(1, 1)), InputError);

  CHECK(row_entropy(Matrix::Constant(3, 55, 1.0 / 55.0)) == doctest::Approx(std::log(55.0)).epsilon(1e-14));
  CHECK(row_entropy(Matrix::Identity(3, 3)) == 0.0);
  Matrix two(2, 2);
  two << 1, 0, 0.5, 0.5;
  CHECK(row_entropy(two) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-15));

  CHECK(dobrushin(Matrix::Constant(3, 3, 1.0 / 3.0)) == 0.0);
  CHECK(dobrushin(Matrix::Identity(2, 2)) == 1.0);
  CHECK(dobrushin(three_rows()) == 1.0);
  CHECK_THROWS_AS(dobrushin(Matrix::Ones(1, 1)), InputError);

  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Matrix a = random_stochastic(rng, 2 + rng.index(10));
    const double rho = row_heterogeneity(a), delta = dobrushin(a), h = row_entropy(a);
    CHECK(0.0 <= rho);
    CHECK(rho <= delta);
    CHECK(delta <= 1.0);
    CHECK(0.0 <= h);
    CHECK(h <= std::log(static_cast<double>(a.cols())) + 1e-12);
  }
}

TEST_CASE("diagnostics_series") {
  std::vector<OperatorSnapshot> uniform{{0, 1, Matrix::Constant(4, 4, 0.25)}, {1, 1, Matrix::Constant(4, 4, 0.25)}};
  const DiagnosticsSeries u = diagnostics_series(uniform, "u");
  REQUIRE(u.records.size() == 2);
  for (const auto& r : u.records) {
    CHECK(r.rho == 0.0);
    CHECK(r.dobrushin == 0.0);
    CHECK(r.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  const auto single = diagnostics_series({{7, 1, three_rows().leftCols(2).topRows(2)}});
  CHECK(single.records[0].t == 7);
  CHECK(single.records[0].rho == 1.0);

  std::vector<OperatorSnapshot> rect{{0, 1, Matrix::Constant(2, 3, 1.0 / 3.0)}};
  CHECK_THROWS_AS(diagnostics_series(rect), InputError);
  const auto entropy_only = diagnostics_series(rect, "", true);
  CHECK(std::isnan(entropy_only.records[0].rho));
  CHECK(entropy_only.records[0].entropy == doctest::Approx(std::log(3.0)).epsilon(1e-15));

  CHECK(diagnostics_to_csv(u).rfind("t,rho,entropy,dobrushin\n0,0,", 0) == 0);
}

TEST_CASE("ck_compose and ck_discrepancy") {
  Rng rng(4);
  const Matrix a = random_stochastic(rng, 4);
  const Matrix b = random_stochastic(rng, 4);
  std::vector<OperatorSnapshot> one{{0, 1, a}};
  CHECK(ck_compose(one) == a);

  std::vector<OperatorSnapshot> hom{{0, 1, a}, {1, 1, a}, {2, 1, a}};
  CHECK((ck_compose(hom) - a * a * a).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<OperatorSnapshot> two{{5, 1, a}, {6, 1, b}};
  const Matrix ab = ck_compose(two);
  Matrix brute = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) brute(i, j) += a(i, k) * b(k, j);
  CHECK((ab - brute).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ab.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

  std::vector<OperatorSnapshot> gap{{0, 1, a}, {2, 1, b}};
  CHECK_THROWS_AS(ck_compose(gap), InputError);
  std::vector<OperatorSnapshot> rect{{0, 1, Matrix::Constant(2, 3, 1.0 / 3.0)}};
  CHECK_THROWS_AS(ck_compose(rect), InputError);

  const CkDiscrepancy same = ck_discrepancy(ab, ab);
  CHECK(same.kl == 0.0);
  CHECK(same.tv == 0.0);
  const CkDiscrepancy d = ck_discrepancy(Matrix::Identity(2, 2), Matrix::Constant(2, 2, 0.5));
  CHECK(d.kl == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(d.tv == 0.5);
  CHECK_THROWS_AS(ck_discrepancy(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), InputError);
}

TEST_CASE("ck_report") {
  Rng rng(5);
  std::vector<OperatorSnapshot> one_step;
  for (std::size_t t = 10; t < 20; ++t) one_step.push_back({t, 1, random_stochastic(rng, 3)});
  std::vector<OperatorSnapshot> direct;
  for (std::size_t t = 10; t + 3 <= 20; ++t)
    direct.push_back({t, 3, ck_compose(std::span(one_step).subspan(t - 10, 3))});
  direct.push_back({18, 3, Matrix::Identity(3, 3)});  // window not covered: skipped
  const CkReport r = ck_report(direct, one_step, 3, "exact");
  CHECK(r.records.size() == 8);
  CHECK(r.mean_kl() == 0.0);
  CHECK(r.mean_tv() == 0.0);

  const CkReport trivial = ck_report(one_step, one_step, 1);
  CHECK(trivial.records.size() == 10);
  CHECK(trivial.mean_kl() == 0.0);
  CHECK(ck_to_csv(r).rfind("t,kl,tv\n10,0,0\n", 0) == 0);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  CHECK(pearson(x, y).r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, z).r == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pearson(x, y).p == 0.0);
  const PearsonResult small = pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 2});
  CHECK(small.r == doctest::Approx(0.8660254).epsilon(1e-6));
  // t = r sqrt((n-2)/(1-r^2)) = sqrt(3) at n = 3, df = 1: p = 1 - 2 atan(sqrt 3)/pi = 1/3.
  CHECK(small.p == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), InputError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InputError);
}

TEST_CASE("regime_stratify") {
  DiagnosticsSeries same;
  std::vector<double> rv;
  for (std::size_t t = 0; t < 50; ++t) {
    same.records.push_back({t, 0.3 + 0.01 * static_cast<double>(t % 2), 1.0 + 0.01 * static_cast<double>(t % 2), 0.5 + 0.01 * static_cast<double>(t % 2)});
    rv.push_back(static_cast<double>(t));
  }
  // Alternating metric with a monotone RV: both strata have the same mix.
  const auto flat = regime_stratify(same, rv, 0.2);
  CHECK(flat.stratum_size == 10);
  for (const auto& m : flat.metrics) {
    REQUIRE(m.test.has_value());
    CHECK(m.test->t == 0.0);
    CHECK(m.test->p == 1.0);
  }

  Rng rng(6);
  DiagnosticsSeries affine;
  std::vector<double> rv2;
  for (std::size_t t = 0; t < 200; ++t) {
    const double v = 0.5 + rng.uniform();
    rv2.push_back(v);
    affine.records.push_back({t, 0.2 + 0.05 * rng.normal(), -v, 0.6 + 0.05 * rng.normal()});
  }
  const auto strat = regime_stratify(affine, rv2, 0.2);
  const auto& entropy = strat.metrics[1];
  CHECK(entropy.metric == "entropy");
  CHECK(entropy.mean_high < entropy.mean_low);
  REQUIRE(entropy.test.has_value());
  CHECK(entropy.test->p < 0.01);

  const auto half = regime_stratify(affine, rv2, 0.5);
  CHECK(half.stratum_size == 100);

  std::vector<double> with_nan = rv2;
  for (std::size_t t = 0; t < 20; ++t) with_nan[t] = std::nan("");
  CHECK(regime_stratify(affine, with_nan, 0.2).stratum_size == 36);

  DiagnosticsSeries tiny;
  tiny.records.resize(5);
  CHECK_THROWS_AS(regime_stratify(tiny, std::vector<double>{1, 2, 3, 4, 5}, 0.2), InputError);

  // Constant strata (state-free rho): no test, but means reported.
  DiagnosticsSeries zero_rho = affine;
  for (auto& r : zero_rho.records) r.rho = 0.0;
  const auto z = regime_stratify(zero_rho, rv2, 0.2);
  CHECK_FALSE(z.metrics[0].test.has_value());
  CHECK(z.metrics[0].mean_high == 0.0);
}
