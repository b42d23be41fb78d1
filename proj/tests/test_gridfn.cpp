#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>

#include "susyforge/gridfn.hpp"

using namespace susyforge;

namespace {
const Grid kDefault = Grid::make(12.0, 2049);
const Grid kSmall = Grid::make(5.0, 1025);
}  // namespace

TEST_CASE("grid invariants") {
  CHECK_THROWS_AS(Grid::make(0.0, 65), Error);
  CHECK_THROWS_AS(Grid::make(1.0, 64), Error);   // even
  CHECK_THROWS_AS(Grid::make(1.0, 33), Error);   // too few
  Grid g = Grid::make(12.0, 2049);
  CHECK(g.spacing() == Catch::Approx(24.0 / 2048));
  CHECK(g.x((g.n_points - 1) / 2) == 0.0);  // odd count puts a sample at the origin
}

TEST_CASE("grid function basics") {
  GridFunction f = GridFunction::sample(kSmall, [](double x) { return x; });
  GridFunction g = GridFunction::sample(Grid::make(5.0, 513), [](double x) { return x; });
  CHECK_THROWS_AS(f + g, Error);  // arithmetic needs identical grids
  CHECK_THROWS_WITH(GridFunction::sample(kSmall, [](double x) { return 1.0 / x; }),
                    Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("derivative reproduces polynomials exactly") {
  GridFunction f = GridFunction::sample(kDefault, [](double x) { return x * x; });
  GridFunction d2 = derivative(f, 2);
  // boundary stencils amplify roundoff of |f| ~ L^2; interior ones barely
  double worst = 0.0;
  for (int i = 0; i < d2.size(); ++i) worst = std::max(worst, std::abs(d2[i] - 2.0));
  CHECK(worst < 1e-6);
  CHECK(max_abs_interior(d2 - GridFunction::constant(kDefault, 2.0)) < 1e-9);
}

TEST_CASE("derivative of exp against analytic oracle") {
  GridFunction f = GridFunction::sample(kSmall, [](double x) { return std::exp(x); });
  GridFunction d = derivative(f, 1);
  GridFunction err = d - f;  // (e^x)' = e^x
  CHECK(max_abs_interior(err) < 1e-10);
}

TEST_CASE("fourth derivative of sin against analytic oracle") {
  Grid g = Grid::make(12.0, 1025);
  GridFunction f = GridFunction::sample(g, [](double x) { return std::sin(x); });
  GridFunction d4 = derivative(f, 4);
  GridFunction err = d4 - f;  // sin'''' = sin
  CHECK(max_abs_interior(err) < 1e-6);
}

TEST_CASE("derivative is linear") {
  GridFunction f = GridFunction::sample(kSmall, [](double x) { return std::sin(2 * x); });
  GridFunction g =
      GridFunction::sample(kSmall, [](double x) { return std::exp(-x * x / 4); });
  Complex a(2.0, 1.0), b(-0.5, 3.0);
  GridFunction lhs = derivative(a * f + b * g, 1);
  GridFunction rhs = a * derivative(f, 1) + b * derivative(g, 1);
  CHECK(rel_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("stacked first derivatives agree with one second derivative") {
  // Coarse grid so truncation dominates roundoff; bound is 10 h^p.
  Grid g = Grid::make(12.0, 129);
  double hp = std::pow(g.spacing(), kFdAccuracy);
  GridFunction f = GridFunction::sample(g, [](double x) { return std::sin(x); });
  CHECK(rel_diff(derivative(derivative(f, 1), 1), derivative(f, 2)) < 10 * hp);
}

TEST_CASE("wronskian closed forms") {
  SECTION("single function is returned as-is") {
    GridFunction f = GridFunction::sample(kSmall, [](double x) { return std::exp(x); });
    GridFunction w = wronskian({f});
    CHECK(rel_diff(w, f) == 0.0);
  }
  SECTION("two exponentials") {
    GridFunction f3 = GridFunction::sample(kSmall, [](double x) { return std::exp(3 * x); });
    GridFunction f2 = GridFunction::sample(kSmall, [](double x) { return std::exp(2 * x); });
    GridFunction w = wronskian({f3, f2});
    GridFunction oracle =
        GridFunction::sample(kSmall, [](double x) { return -std::exp(5 * x); });
    CHECK(rel_diff(w, oracle) < 1e-9);
  }
  SECTION("three exponentials (Vandermonde)") {
    GridFunction f3 = GridFunction::sample(kSmall, [](double x) { return std::exp(3 * x); });
    GridFunction f2 = GridFunction::sample(kSmall, [](double x) { return std::exp(2 * x); });
    GridFunction f1 = GridFunction::sample(kSmall, [](double x) { return std::exp(x); });
    GridFunction w = wronskian({f3, f2, f1});
    GridFunction oracle =
        GridFunction::sample(kSmall, [](double x) { return -2 * std::exp(6 * x); });
    CHECK(rel_diff(w, oracle) < 1e-8);
  }
}

TEST_CASE("wronskian is antisymmetric under row swap") {
  GridFunction f = GridFunction::sample(kSmall, [](double x) { return std::cosh(x); });
  GridFunction g = GridFunction::sample(kSmall, [](double x) { return std::sinh(2 * x); });
  GridFunction w1 = wronskian({f, g});
  GridFunction w2 = wronskian({g, f});
  CHECK(rel_diff(w1, Complex(-1.0) * w2) < 1e-12);
}

TEST_CASE("sign change counting") {
  CHECK(count_sign_changes(GridFunction::sample(
            kDefault, [](double x) { return std::cosh(x); })) == 0);
  CHECK(count_sign_changes(GridFunction::sample(
            kDefault, [](double x) { return std::sinh(x); })) == 1);
  // oscillator second excited state shape: roots at +-1/sqrt(2)
  CHECK(count_sign_changes(GridFunction::sample(kDefault, [](double x) {
          return (4 * x * x - 2) * std::exp(-x * x / 2);
        })) == 2);
  GridFunction cplx = GridFunction::sample(kDefault, [](double x) {
    return Complex(std::cos(x), std::sin(x));
  });
  CHECK_THROWS_WITH(count_sign_changes(cplx),
                    Catch::Matchers::ContainsSubstring("not real-valued"));
}

TEST_CASE("interpolation is spectral-quality for smooth data") {
  GridFunction f = GridFunction::sample(kSmall, [](double x) { return std::exp(x); });
  for (double x : {-3.14159, -0.7071, 0.001, 2.5}) {
    CHECK(std::abs(f.interp(x) - std::exp(x)) < 1e-11 * std::exp(x));
  }
}

TEST_CASE("csv round trip is exact") {
  GridFunction f = GridFunction::sample(Grid::make(3.0, 65), [](double x) {
    return Complex(std::sin(7 * x) * 1e-7, std::cos(3 * x) * 1e5);
  });
  std::string path = "gridfn_roundtrip.csv";
  write_csv(f, path);
  GridFunction g = read_csv(path);
  REQUIRE(g.grid() == f.grid());
  for (int i = 0; i < f.size(); ++i) {
    CHECK(f[i].real() == g[i].real());
    CHECK(f[i].imag() == g[i].imag());
  }
  std::remove(path.c_str());
}
