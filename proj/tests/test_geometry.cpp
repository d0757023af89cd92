#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "gapgrad/error.hpp"
#include "gapgrad/geometry.hpp"
#include "gapgrad/regression.hpp"
#include "oracles.hpp"

using namespace gapgrad;

namespace {

WeightSpec mixed_spec() {
  WeightSpec w;
  w.d = 4;
  w.m = 3.0;
  w.kappa0 = 2.0;
  w.kappa = {1.0, 0.5, 3.0};
  w.setA = {1, 2};
  w.setB = {3};
  return w;
}

// Random valid spec: d in {3,4,5}, m in [2,6], random partition and coefficients.
WeightSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dd(3, 5);
  std::uniform_real_distribution<double> mm(2.0, 6.0), kk(0.2, 5.0);
  std::bernoulli_distribution coin(0.5);
  WeightSpec w;
  w.d = dd(rng);
  w.m = mm(rng);
  w.kappa0 = kk(rng);
  for (int i = 1; i <= w.d - 1; ++i) {
    w.kappa.push_back(kk(rng));
    (coin(rng) ? w.setA : w.setB).push_back(i);
  }
  return w;
}

std::vector<double> random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n;
  std::vector<double> x(dim);
  double s = 0.0;
  for (double& v : x) v = n(rng), s += v * v;
  for (double& v : x) v /= std::sqrt(s);
  return x;
}

}  // namespace

TEST_CASE("kappa_weight: single-term and radial evaluations") {
  const auto sum2 = WeightSpec::power_sum(3, 4.0);
  const std::vector<double> e1{1.0, 0.0}, diag{std::sqrt(0.5), std::sqrt(0.5)};
  CHECK(kappa_weight(sum2, e1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kappa_weight(WeightSpec::power_sum(3, 7.3), e1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kappa_weight(sum2, diag) == doctest::Approx(0.5).epsilon(1e-14));
  const auto rad = WeightSpec::radial(3, 5.0, 2.0);
  CHECK(kappa_weight(rad, diag) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(kappa_weight(rad, std::vector<double>{0.6, 0.8}) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("kappa_weight: non-unit input and invalid specs are rejected") {
  const auto w = WeightSpec::power_sum(3, 2.0);
  CHECK_THROWS_AS(kappa_weight(w, std::vector<double>{1.0, 0.1}), InputError);
  CHECK_THROWS_AS(kappa_weight(w, std::vector<double>{1.0, 0.0, 0.0}), InputError);
  WeightSpec bad = w;
  bad.setB = {1};
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = w;
  bad.m = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = w;
  bad.kappa = {1.0, -1.0};
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("derived_constants: closed forms") {
  SUBCASE("sum of fourth powers") {
    const auto k = derived_constants(WeightSpec::power_sum(3, 4.0));
    CHECK(k.theta1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(k.theta2 == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-14));
    CHECK(k.theta3 == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-14));
    CHECK(k.varrho == doctest::Approx(0.25).epsilon(1e-14));
    const long double c0 = std::min(1.0L / (4.0L * std::pow(1.0L + std::sqrt(2.0L), 0.25L)),
                                    1.0L / (16.0L * 4.0L * std::pow(2.0L, 0.25L) * std::pow(2.0L, 1.5L)));
    CHECK(k.c0 == doctest::Approx(static_cast<double>(c0)).epsilon(1e-13));
    CHECK(k.c0 == doctest::Approx(4.645e-3).epsilon(1e-3));
    CHECK(k.cbar0 == doctest::Approx(1.159e-2).epsilon(1e-3));
  }
}

TEST_CASE("delta: origin value and a pure power") {
  const auto w = WeightSpec::power_sum(3, 4.0);
  CHECK(delta(w, 1e-4, std::vector<double>{0.0, 0.0}) == 1e-4);
  CHECK(delta(w, 0.0, std::vector<double>{0.5, 0.0}) == doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("property: sandwich varrho <= kappa <= theta1 on random specs") {
  std::mt19937_64 rng(20241017);
  for (int s = 0; s < 20; ++s) {
    const WeightSpec w = random_spec(rng);
    const auto k = derived_constants(w);
    int violations = 0;
    for (int q = 0; q < 10000; ++q) {
      const double v = kappa_weight(w, random_unit(rng, w.dim()));
      if (v < k.varrho || v > k.theta1) ++violations;
    }
    INFO(describe(w));
    CHECK(violations == 0);
    CHECK(k.cbar0 <= 0.5);
    CHECK((1.0 - k.cbar0) * (1.0 - k.cbar0) >= 0.25);
  }
}

TEST_CASE("property: delta sandwich on random points") {
  std::mt19937_64 rng(7);
  const WeightSpec w = mixed_spec();
  const auto k = derived_constants(w);
  std::uniform_real_distribution<double> rad(0.0, 1.0);
  for (int q = 0; q < 10000; ++q) {
    auto x = random_unit(rng, w.dim());
    const double r = rad(rng);
    for (double& v : x) v *= r;
    const double eps = 1e-3;
    const double dv = delta(w, eps, x);
    CHECK(dv >= eps + k.varrho * std::pow(r, w.m) * (1.0 - 1e-14));
    CHECK(dv <= eps + k.theta1 * std::pow(r, w.m) * (1.0 + 1e-14));
  }
}

TEST_CASE("property: gradient bound |grad delta| <= m theta2 |x|^{m-1}") {
  std::mt19937_64 rng(11);
  for (int s = 0; s < 10; ++s) {
    const WeightSpec w = random_spec(rng);
    const auto k = derived_constants(w);
    std::uniform_real_distribution<double> rad(0.05, 1.0);
    for (int q = 0; q < 500; ++q) {
      auto x = random_unit(rng, w.dim());
      const double r = rad(rng);
      for (double& v : x) v *= r;
      // Finite-difference gradient, compared with the analytic one and the bound.
      const auto g = delta_gradient(w, x);
      double fd2 = 0.0, an2 = 0.0;
      for (int i = 0; i < w.dim(); ++i) {
        const double h = 1e-6 * r;
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (delta(w, 0.0, xp) - delta(w, 0.0, xm)) / (2 * h);
        CHECK(fd == doctest::Approx(g[i]).epsilon(1e-5).scale(std::pow(r, w.m - 1)));
        fd2 += fd * fd;
        an2 += g[i] * g[i];
      }
      CHECK(std::sqrt(fd2) <= w.m * k.theta2 * std::pow(r, w.m - 1) * (1.0 + 1e-6));
    }
  }
}

TEST_CASE("property: height equivalence in the c0-neighborhood") {
  std::mt19937_64 rng(13);
  for (int s = 0; s < 6; ++s) {
    const WeightSpec w = random_spec(rng);
    const auto k = derived_constants(w);
    const double eps = 1e-4;
    std::uniform_real_distribution<double> rad(std::pow(eps, 1.0 / w.m), 1.0), unit(0.0, 1.0);
    for (int q = 0; q < 200; ++q) {
      auto x0 = random_unit(rng, w.dim());
      const double r0 = rad(rng);
      for (double& v : x0) v *= r0;
      const double d0 = delta(w, eps, x0);
      const double reach = 2.0 * k.c0 * std::pow(d0, 1.0 / w.m);
      for (int t = 0; t < 20; ++t) {
        auto dir = random_unit(rng, w.dim());
        auto x = x0;
        const double len = reach * unit(rng);
        for (int i = 0; i < w.dim(); ++i) x[i] += len * dir[i];
        const double dv = delta(w, eps, x);
        CHECK(dv >= 0.5 * d0);
        CHECK(dv <= 1.5 * d0);
      }
    }
  }
}

TEST_CASE("cube_profile: weight coefficient and Taylor remainder") {
  CHECK(cube_profile({1.0, 1.0, 4.0}).kappabar == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cube_profile({1.0, 2.0, 2.0}).kappabar == doctest::Approx(0.75).epsilon(1e-15));
  const auto p = cube_profile({1.0, 1.0, 2.0});
  const std::vector<double> x{0.1, 0.0};
  const double exact = 2.0 * (1.0 - std::sqrt(1.0 - 0.01));
  CHECK(p.gap(x) == doctest::Approx(exact).epsilon(1e-14));
  // Remainder of the quadratic model: 2(1 - sqrt(1 - t)) - t = t^2/4 + ..., bounded by C |x|^4.
  CHECK(std::abs(p.gap(x) - 0.01) <= 1e-4 * p.remainder_bound);
  CHECK(p.remainder_bound == doctest::Approx(0.25).epsilon(0.05));
  const auto w = cube_weight_spec({1.0, 2.0, 4.0});
  CHECK(w.setA.empty());
  CHECK(w.kappa[0] == doctest::Approx((1.0 + std::pow(2.0, -3.0)) / 4.0));
}

TEST_CASE("weighted_norm: cancellation, zero field and boundary supremum") {
  std::vector<FieldSample> pow_field, zero, lin;
  const double sigma = 0.5, m = 2.0;
  for (int i = 1; i <= 200; ++i) {
    const double r = i / 200.0;
    for (int j = 0; j < 8; ++j) {
      const double t = 2 * std::numbers::pi * j / 8;
      const Point x{r * std::cos(t), r * std::sin(t)};
      pow_field.push_back({x, {std::pow(r, sigma + m)}});
      zero.push_back({x, {0.0, 0.0}});
      lin.push_back({x, {r * std::cos(t), r * std::sin(t)}});
    }
  }
  CHECK(weighted_norm(pow_field, {0.0, sigma, 0.0}, m) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(weighted_norm(zero, {0.0, 0.3, 0.2}, m) == 0.0);
  CHECK(weighted_norm(lin, {0.0, 0.0, 1.0}, m) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK_THROWS_AS(weighted_norm(std::span<const FieldSample>{}, {0.0, 0.0, 0.0}, m), InputError);
}

TEST_CASE("weighted_average: constants, odd functions, second moment") {
  const auto cube = WeightSpec::power_sum(3, 4.0);
  const auto one = WeightSpec::radial(3, 2.0, 1.0);
  auto constant = [](std::span<const double>) { return 3.25; };
  auto odd = [](std::span<const double> x) { return x[0] * (1.0 + x[1] * x[1]); };
  auto sq = [](std::span<const double> x) { return x[0] * x[0]; };
  for (Surface s : {Surface::sphere, Surface::ball}) {
    CHECK(weighted_average(constant, cube, 0.3, s, 1.0) == doctest::Approx(3.25).epsilon(1e-14));
    CHECK(std::abs(weighted_average(odd, cube, 0.3, s, 1.0)) <= 1e-12);
  }
  CHECK(weighted_average(sq, one, 1.0, Surface::sphere, 2.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("gap_transform: anchors map to the slab faces and midline") {
  GapProfile g;
  g.eps = 0.01;
  g.R0 = 0.5;
  g.h1 = [](std::span<const double> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); };
  g.h2 = [](std::span<const double> x) { return -0.25 * (x[0] * x[0] + x[1] * x[1]); };
  const std::vector<double> xp{0.1, 0.2};
  const double top = g.eps / 2 + g.h1(xp), bottom = -g.eps / 2 + g.h2(xp);
  const double delta0 = 0.7;
  CHECK(gap_transform(g, std::vector<double>{0.1, 0.2, top}, delta0)[2] == doctest::Approx(delta0).epsilon(1e-14));
  CHECK(gap_transform(g, std::vector<double>{0.1, 0.2, bottom}, delta0)[2] ==
        doctest::Approx(-delta0).epsilon(1e-14));
  const auto mid = gap_transform(g, std::vector<double>{0.1, 0.2, 0.5 * (top + bottom)}, delta0);
  CHECK(std::abs(mid[2]) <= 1e-14);
  CHECK(mid[0] == 0.1);
  CHECK(mid[1] == 0.2);
  CHECK_THROWS_AS(gap_transform(g, std::vector<double>{0.1, 0.2, top + 1e-3}, delta0), DomainError);
}

TEST_CASE("validate_H_conditions: cube passes, exact power has zero remainder, steep height fails") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts;
  for (int q = 0; q < 300; ++q) {
    const double t = 2 * std::numbers::pi * u(rng), r = 0.45 * std::pow(10.0, -1.5 * u(rng));
    pts.push_back({r * std::cos(t), r * std::sin(t)});
  }
  SUBCASE("cube r1 = r2 = 1") {
    const CubeSpec cube{1.0, 1.0, 4.0};
    const auto p = cube_profile(cube);
    GapProfile g{0.0, 0.25, p.h1, p.h2, 0.5, 4.0, 1e3};
    const auto rep = validate_H_conditions(g, cube_weight_spec(cube), pts);
    CHECK(rep.passes());
    REQUIRE(rep.remainder_exponent);
    CHECK(*rep.remainder_exponent >= 2 * cube.m - (cube.m + g.gamma));
  }
  SUBCASE("exact power") {
    const auto w = WeightSpec::radial(3, 2.0, 1.0);
    GapProfile g;
    g.R0 = 0.25;
    g.h1 = [](std::span<const double> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); };
    g.h2 = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); };
    g.tau1 = 1.5;  // |grad h_j| = |x'| exactly
    g.tau2 = 10.0;
    const auto rep = validate_H_conditions(g, w, pts);
    CHECK(rep.remainder_constant <= 1e-12);
    CHECK_FALSE(rep.remainder_exponent);
    CHECK(rep.gradient_ok);
    CHECK(rep.remainder_ok);
    CHECK(rep.c2_ok);
  }
  SUBCASE("gradient twice the allowed constant") {
    const auto w = WeightSpec::radial(3, 2.0, 2.0);
    GapProfile g;
    g.R0 = 0.25;
    g.tau1 = 1.0;
    g.tau2 = 100.0;
    g.h1 = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    g.h2 = [](std::span<const double> x) { return -(x[0] * x[0] + x[1] * x[1]); };
    const auto rep = validate_H_conditions(g, w, pts);
    CHECK(rep.max_gradient_ratio == doctest::Approx(2.0).epsilon(1e-4));
    CHECK_FALSE(rep.gradient_ok);
  }
}

TEST_CASE("fit_line and fit_loglog") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) pts.push_back({x, 3.0 * x * x});
  const auto f = fit_loglog(pts, 2.0);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-13));
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(f.relative_error <= 1e-12);

  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<std::pair<double, double>> noisy;
  for (int i = 0; i <= 20; ++i) {
    const double x = std::pow(10.0, -2.0 + i / 10.0);
    noisy.push_back({x, std::pow(x, 0.41421) * (1.0 + noise(rng))});
  }
  CHECK(fit_loglog(noisy).slope == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(0.015));

  const std::vector<std::pair<double, double>> three{{1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(fit_loglog(three), InputError);
}
