#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "susyforge/crum.hpp"

using namespace susyforge;
using namespace susyforge::crum;
using schrod::cf_cosh;
using schrod::cf_exp;
using schrod::cf_hermite;
using schrod::cf_sinh;

namespace {
const Grid kGrid = Grid::make(12.0, 2049);

Hamiltonian free_h() { return Hamiltonian(GridFunction::constant(kGrid, 0.0)); }
Hamiltonian oscillator() {
  return Hamiltonian(GridFunction::sample(kGrid, [](double x) { return x * x; }));
}

JordanChain single(Complex lambda, GridFunction f) {
  return JordanChain{lambda, {std::move(f)}};
}

JordanBasis exp_basis() {
  return JordanBasis{{single(-1.0, cf_exp(kGrid, 1.0)), single(-4.0, cf_exp(kGrid, 2.0)),
                      single(-9.0, cf_exp(kGrid, 3.0))}};
}

JordanBasis soliton3_basis() {
  return JordanBasis{{single(-1.0, cf_cosh(kGrid, 1.0)), single(-4.0, cf_sinh(kGrid, 2.0)),
                      single(-9.0, cf_cosh(kGrid, 3.0))}};
}
}  // namespace

TEST_CASE("one-soliton intertwiner is the Darboux operator of cosh") {
  JordanBasis basis{{single(-1.0, cf_cosh(kGrid, 1.0))}};
  LinearDiffOperator q = build_intertwiner(free_h(), basis);
  LinearDiffOperator oracle = LinearDiffOperator::darboux(
      GridFunction::sample(kGrid, [](double x) { return -std::tanh(x); }));
  CHECK(op_distance(q, oracle) < 1e-9);
}

TEST_CASE("exponential basis reproduces the constant-coefficient cubic") {
  LinearDiffOperator q = build_intertwiner(free_h(), exp_basis());
  LinearDiffOperator oracle =
      LinearDiffOperator::from_constants(kGrid, {-6.0, 11.0, -6.0, 1.0});
  CHECK(op_distance(q, oracle) < 1e-8);
  for (const GridFunction* f : exp_basis().flat())
    CHECK(kernel_residual(q, *f) < 1e-8);
}

TEST_CASE("paired exponentials force d^2 - 1 with unit leading coefficient") {
  JordanBasis basis{{single(-1.0, cf_exp(kGrid, 1.0)), single(-1.0, cf_exp(kGrid, -1.0))}};
  LinearDiffOperator q = build_intertwiner(free_h(), basis);
  LinearDiffOperator oracle = LinearDiffOperator::from_constants(kGrid, {-1.0, 0.0, 1.0});
  CHECK(op_distance(q, oracle) < 1e-9);
}

TEST_CASE("singular Wronskian is refused with zero locations") {
  JordanBasis basis{{single(-1.0, cf_sinh(kGrid, 1.0))}};
  CHECK_THROWS_WITH(build_intertwiner(free_h(), basis),
                    Catch::Matchers::ContainsSubstring("singular Wronskian"));
}

TEST_CASE("kernel property holds for every basis function") {
  LinearDiffOperator q = build_intertwiner(free_h(), soliton3_basis());
  for (const GridFunction* f : soliton3_basis().flat())
    CHECK(kernel_residual(q, *f) < 1e-5);
}

TEST_CASE("partner potentials") {
  SECTION("one soliton") {
    JordanBasis basis{{single(-1.0, cf_cosh(kGrid, 1.0))}};
    GridFunction V2 = partner_potential(GridFunction::constant(kGrid, 0.0), basis);
    GridFunction oracle = GridFunction::sample(kGrid, [](double x) {
      double s = 1.0 / std::cosh(x);
      return -2.0 * s * s;
    });
    CHECK(rel_diff(V2, oracle) < 1e-7);
    CHECK(std::abs(V2[(kGrid.n_points - 1) / 2] - Complex(-2.0)) < 1e-8);
  }
  SECTION("pure exponential leaves the potential unchanged") {
    JordanBasis basis{{single(-4.0, cf_exp(kGrid, 2.0))}};
    GridFunction V2 = partner_potential(GridFunction::constant(kGrid, 0.0), basis);
    CHECK(max_abs_interior(V2) < 1e-9);
  }
  SECTION("oscillator ground state shifts by 2") {
    JordanBasis basis{{single(1.0, cf_hermite(kGrid, 0))}};
    GridFunction V1 = GridFunction::sample(kGrid, [](double x) { return x * x; });
    GridFunction V2 = partner_potential(V1, basis);
    GridFunction oracle = GridFunction::sample(kGrid, [](double x) { return x * x + 2.0; });
    CHECK(rel_diff(V2, oracle) < 1e-7);
  }
  SECTION("alpha coefficient cross-check (Eq. p2 family)") {
    JordanBasis basis = soliton3_basis();
    GridFunction V1 = GridFunction::constant(kGrid, 0.0);
    GridFunction V2 = partner_potential(V1, basis);
    LinearDiffOperator q = build_intertwiner(free_h(), basis);
    CHECK(partner_alpha_residual(V1, V2, q) < 1e-5);
  }
}

TEST_CASE("chain factorization of the exponential basis") {
  FactorizationChain chain = chain_factorize(free_h(), exp_basis());
  REQUIRE(chain.factors.size() == 3);
  // closed-form Wronskians W1 = -2e^{6x}, W2 = -e^{5x}, W3 = e^{3x}
  // give w = (6, 5, 3) and chi = (-1, -2, -3)
  for (int j = 0; j < 3; ++j) {
    double expected = -(j + 1.0);
    GridFunction c = GridFunction::constant(kGrid, expected);
    CHECK(rel_diff(chain.superpotentials[j], c) < 1e-7);
    CHECK_FALSE(chain.singular_flags[j]);
    CHECK_FALSE(chain.complex_flags[j]);
  }
  REQUIRE(chain.intermediate_potentials.size() == 2);
  for (const GridFunction& v : chain.intermediate_potentials)
    CHECK(max_abs_interior(v) < 1e-6);  // intermediate potentials vanish here
  for (double r : chain.beta_residuals) CHECK(r < 1e-6);
  CHECK(chain.composition_residual >= 0.0);
  CHECK(chain.composition_residual < kOpTol);
}

TEST_CASE("single-function chain has no intermediates") {
  JordanBasis basis{{single(-1.0, cf_cosh(kGrid, 1.0))}};
  FactorizationChain chain = chain_factorize(free_h(), basis);
  CHECK(chain.factors.size() == 1);
  CHECK(chain.intermediate_potentials.empty());
  LinearDiffOperator oracle = LinearDiffOperator::darboux(
      GridFunction::sample(kGrid, [](double x) { return -std::tanh(x); }));
  CHECK(op_distance(chain.factors[0], oracle) < 1e-9);
}

TEST_CASE("oscillator chains and singular intermediates") {
  Hamiltonian h = oscillator();
  SECTION("first excited state alone has a nodal Wronskian") {
    JordanBasis basis{{single(3.0, cf_hermite(kGrid, 1))}};
    CHECK_THROWS_WITH(chain_factorize(h, basis),
                      Catch::Matchers::ContainsSubstring("singular Wronskian"));
  }
  SECTION("psi1-psi2 pair: nodeless W1, singular intermediate step") {
    JordanBasis basis{{single(3.0, cf_hermite(kGrid, 1)), single(5.0, cf_hermite(kGrid, 2))}};
    FactorizationChain chain = chain_factorize(h, basis);
    REQUIRE(chain.factors.size() == 2);
    CHECK_FALSE(chain.singular_flags[0]);  // W1 = -4(2x^2+1)e^{-x^2} nodeless
    CHECK(chain.singular_flags[1]);        // W2 = psi2 has two nodes
  }
}

TEST_CASE("telescoping of superpotentials") {
  for (const JordanBasis& basis : {exp_basis(), soliton3_basis()}) {
    FactorizationChain chain = chain_factorize(free_h(), basis);
    GridFunction sum = chain.superpotentials[0];
    for (size_t j = 1; j < chain.superpotentials.size(); ++j)
      sum += chain.superpotentials[j];
    GridFunction w1 = partial_wronskian(basis, 1);
    GridFunction minus_w1 = GridFunction::constant(kGrid, 0.0);
    GridFunction dw1 = derivative(w1, 1);
    for (int i = 0; i < kGrid.n_points; ++i) minus_w1[i] = -dw1[i] / w1[i];
    CHECK(rel_diff(sum, minus_w1) < 1e-6);
  }
}

TEST_CASE("action of trailing factors reproduces Wronskian ratios (Eq. aaaos)") {
  for (const JordanBasis& basis : {exp_basis(), soliton3_basis()}) {
    FactorizationChain chain = chain_factorize(free_h(), basis);
    const int n = basis.size();
    std::vector<const GridFunction*> flat = basis.flat();
    for (int j = 2; j <= n; ++j) {
      std::vector<LinearDiffOperator> tail(chain.factors.begin() + (j - 1),
                                           chain.factors.end());
      GridFunction lhs = apply(compose_chain(tail), *flat[j - 2]);
      GridFunction wjm1 = partial_wronskian(basis, j - 1);
      GridFunction wj = partial_wronskian(basis, j);
      GridFunction rhs = GridFunction::constant(kGrid, 0.0);
      for (int i = 0; i < kGrid.n_points; ++i) rhs[i] = wjm1[i] / wj[i];
      CHECK(rel_diff(lhs, rhs) < 1e-5);
    }
  }
}

TEST_CASE("partner symmetry: last intermediate relation gives V2") {
  JordanBasis basis = soliton3_basis();
  GridFunction V1 = GridFunction::constant(kGrid, 0.0);
  FactorizationChain chain = chain_factorize(free_h(), basis);
  // h0 = h^-: V2 = chi_1^2 + chi_1' + lambda_1
  const GridFunction& c1 = chain.superpotentials[0];
  GridFunction v0 = c1 * c1 + derivative_any(c1, 1) + GridFunction::constant(kGrid, -1.0);
  GridFunction V2 = partner_potential(V1, basis);
  CHECK(rel_diff(v0, V2) < 1e-5);
}

TEST_CASE("partial-Wronskian system residuals") {
  SECTION("exponential constants") {
    CHECK(partial_wronskian_system_residual(exp_basis(), GridFunction::constant(kGrid, 0.0),
                                            {-1.0, -4.0, -9.0}) < 1e-8);
  }
  SECTION("one-soliton identity") {
    JordanBasis basis{{single(-1.0, cf_cosh(kGrid, 1.0))}};
    CHECK(partial_wronskian_system_residual(basis, GridFunction::constant(kGrid, 0.0),
                                            {-1.0}) < 1e-8);
  }
  SECTION("three-soliton basis") {
    CHECK(partial_wronskian_system_residual(soliton3_basis(),
                                            GridFunction::constant(kGrid, 0.0),
                                            {-1.0, -4.0, -9.0}) < 1e-6);
  }
}

TEST_CASE("basis validation catches broken chains") {
  JordanBasis bad{{JordanChain{-1.0, {cf_cosh(kGrid, 1.0), cf_cosh(kGrid, 2.0)}}}};
  CHECK_THROWS_WITH(bad.validate(free_h()),
                    Catch::Matchers::ContainsSubstring("broken Jordan chain"));
  JordanBasis not_eigen{{single(-2.0, cf_cosh(kGrid, 1.0))}};
  CHECK_THROWS_AS(not_eigen.validate(free_h()), Error);
}

TEST_CASE("three-soliton partner is a deep reflectionless well") {
  GridFunction V2 = partner_potential(GridFunction::constant(kGrid, 0.0), soliton3_basis());
  double mn = 0.0;
  for (int i = 0; i < V2.size(); ++i) mn = std::min(mn, V2[i].real());
  CHECK(mn < -2.0);
  CHECK(std::abs(mn + 12.0) < 0.5);  // -n(n+1) sech^2 depth at n = 3
}
