#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stratmc/errors.hpp"
#include "stratmc/integrand.hpp"
#include "stratmc/rng.hpp"

using namespace stratmc;

namespace {

// Interior point clear of the function's advertised jumps and of the
// domain boundary, so finite differences stay valid.
bool usable_fd_point(const Integrand& f, std::span<const double> x, double margin) {
  for (int j = 0; j < f.dim; ++j) {
    if (x[static_cast<std::size_t>(j)] < margin || x[static_cast<std::size_t>(j)] > 1.0 - margin) return false;
    if (static_cast<std::size_t>(j) < f.splits.size()) {
      for (double s : f.splits[static_cast<std::size_t>(j)]) {
        if (std::abs(x[static_cast<std::size_t>(j)] - s) < margin) return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("corpus carries the advertised reference data") {
  const auto& fns = corpus();
  CHECK(fns.count("const1d") == 1);
  CHECK(fns.count("linear1d") == 1);
  CHECK(fns.count("quadratic1d") == 1);
  CHECK(fns.count("oscillator1d") == 1);
  CHECK(fns.count("sinsin2d") == 1);

  const double x = 0.25;
  CHECK(fns.at("linear1d").eval({&x, 1}) == 0.25);
  CHECK(*fns.at("linear1d").exact_integral == 0.5);
  CHECK(*fns.at("linear1d").grad_bound == 1.0);
  CHECK(*fns.at("quadratic1d").exact_integral == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(*fns.at("quadratic1d").grad_bound == 2.0);
  CHECK(*fns.at("sinsin2d").exact_integral ==
        doctest::Approx(4.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-15));
  const double mid[] = {0.5, 0.5};
  CHECK(fns.at("sinsin2d").eval(mid) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(corpus_function("nope"), ConfigError);
}

TEST_CASE("oscillator jump sits strictly above 0.9") {
  const auto& f = corpus_function("oscillator1d");
  const double at = 0.9;
  CHECK(f.eval({&at, 1}) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  const double above = std::nextafter(0.9, 1.0);
  const double expected = std::sin(1.0 / (above + 0.1)) + std::sin(1.0 / (above - 0.7));
  CHECK(f.eval({&above, 1}) == doctest::Approx(expected).epsilon(1e-15));
  REQUIRE(f.splits.size() == 1);
  CHECK(f.splits[0] == std::vector<double>{0.9});
}

TEST_CASE("oscillator committed integral and gradient bound") {
  const auto& f = corpus_function("oscillator1d");
  // committed constant, agreed to 25 digits by adaptive quadrature and the
  // closed form through the cosine integral
  CHECK(*f.exact_integral == doctest::Approx(0.5243090038357422178).epsilon(1e-15));

  // the bound is the 10^6-point grid maximum of |f'|, inflated 10%
  double best = 0.0;
  constexpr int kGridPoints = 1000000;
  std::vector<double> g(1);
  for (int i = 0; i < kGridPoints; ++i) {
    const double x = static_cast<double>(i) / (kGridPoints - 1);
    f.gradient({&x, 1}, g);
    best = std::max(best, std::abs(g[0]));
  }
  CHECK(*f.grad_bound == doctest::Approx(1.1 * best).epsilon(1e-12));
  CHECK(*f.grad_bound == doctest::Approx(99.869985619523959).epsilon(1e-9));
}

TEST_CASE("analytic gradients match central differences") {
  SplitMix64 gen(7);
  for (const auto& [name, f] : corpus()) {
    if (!f.has_gradient()) continue;
    std::vector<double> x(static_cast<std::size_t>(f.dim));
    std::vector<double> analytic(static_cast<std::size_t>(f.dim));
    std::vector<double> fd(static_cast<std::size_t>(f.dim));
    int checked = 0;
    while (checked < 100) {
      gen.fill_unit_point(x);
      if (!usable_fd_point(f, x, 1e-3)) continue;
      ++checked;
      f.gradient(x, analytic);
      f.fd_gradient(x, fd);
      for (int j = 0; j < f.dim; ++j) {
        const double a = analytic[static_cast<std::size_t>(j)];
        REQUIRE(std::abs(a - fd[static_cast<std::size_t>(j)]) <= 1e-4 * (1.0 + std::abs(a)));
      }
    }
  }
}

TEST_CASE("gradient bounds hold at random points") {
  SplitMix64 gen(11);
  for (const auto& [name, f] : corpus()) {
    if (!f.has_gradient() || !f.grad_bound) continue;
    std::vector<double> x(static_cast<std::size_t>(f.dim));
    std::vector<double> g(static_cast<std::size_t>(f.dim));
    for (int trial = 0; trial < 10000; ++trial) {
      gen.fill_unit_point(x);
      f.gradient(x, g);
      double norm = 0.0;
      for (double v : g) norm += v * v;
      REQUIRE(std::sqrt(norm) <= *f.grad_bound);
    }
  }
}

TEST_CASE("piecewise-affine deviation has the closed form") {
  {
    PiecewiseLinearSpec flat{HyperCubePartition::make(1, 1), {{0.0}}, {2.0}};
    CHECK(pl_sigma_k(flat, 0) == 0.0);
  }
  {
    PiecewiseLinearSpec slope1{HyperCubePartition::make(1, 1), {{1.0}}, {0.0}};
    CHECK(pl_sigma_k(slope1, 0) ==
          doctest::Approx(1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-14));
    CHECK_THROWS_AS(pl_sigma_k(slope1, 1), IndexOutOfRange);
  }
  {
    PiecewiseLinearSpec spec{HyperCubePartition::make(2, 4),
                             {{3.0, 4.0}, {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}},
                             {0.0, 0.0, 0.0, 0.0}};
    // |theta| = 5, w^{1/d} = 1/2
    CHECK(pl_sigma_k(spec, 0) == doctest::Approx(0.72168783648703220563).epsilon(1e-12));
  }
}

TEST_CASE("piecewise-affine integrand matches its defining pieces") {
  PiecewiseLinearSpec spec{HyperCubePartition::make(1, 2), {{1.0}, {3.0}}, {0.0, -1.0}};
  const Integrand f = pl_integrand(spec);
  CHECK(f.dim == 1);
  CHECK(*f.exact_integral == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(*f.grad_bound == 3.0);
  REQUIRE(f.splits.size() == 1);
  CHECK(f.splits[0] == std::vector<double>{0.5});

  SplitMix64 gen(3);
  std::vector<double> x(1);
  std::vector<double> g(1);
  for (int trial = 0; trial < 1000; ++trial) {
    gen.fill_unit_point(x);
    const double expected = x[0] <= 0.5 ? x[0] : 3.0 * x[0] - 1.0;
    CHECK(f.eval(x) == doctest::Approx(expected).epsilon(1e-14));
    f.gradient(x, g);
    CHECK(g[0] == (x[0] <= 0.5 ? 1.0 : 3.0));
  }

  PiecewiseLinearSpec bad{HyperCubePartition::make(1, 2), {{1.0}}, {0.0, 0.0}};
  CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
}
