#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "susyforge/diffop.hpp"
#include "susyforge/gridfn.hpp"
#include "susyforge/schrod.hpp"

namespace susyforge::crum {

/// One Jordan chain: functions[0] is the eigenfunction, functions[i] the i-th
/// associated function, (h - lambda) functions[i] = functions[i-1].
struct JordanChain {
  Complex lambda;
  std::vector<GridFunction> functions;
};

/// Canonical basis of ker q_N^-: ordered Jordan chains of transformation
/// functions. Determinants use the paper's flat order phi_1..phi_N: chains in
/// the given order, each chain listed top associate first and eigenfunction
/// last. Only with the eigenfunction in the trailing slot are the trailing
/// subsets {phi_j..phi_N} closed under (h - lambda), which the partial
/// Wronskian identities require.
struct JordanBasis {
  std::vector<JordanChain> chains;

  int size() const {
    int n = 0;
    for (const JordanChain& c : chains) n += static_cast<int>(c.functions.size());
    return n;
  }

  const Grid& grid() const {
    if (chains.empty() || chains[0].functions.empty()) throw Error("empty basis");
    return chains[0].functions[0].grid();
  }

  /// Determinant (paper) order: chains in user order, each reversed in-chain.
  std::vector<const GridFunction*> flat() const {
    std::vector<const GridFunction*> out;
    for (const JordanChain& c : chains)
      for (size_t i = c.functions.size(); i-- > 0;) out.push_back(&c.functions[i]);
    return out;
  }

  std::vector<Complex> flat_lambdas() const {
    std::vector<Complex> out;
    for (const JordanChain& c : chains)
      for (size_t i = 0; i < c.functions.size(); ++i) out.push_back(c.lambda);
    return out;
  }

  /// User (ascending) order: chains in user order, eigenfunction first. This is
  /// the order used by the S-matrix collocation.
  std::vector<const GridFunction*> flat_ascending() const {
    std::vector<const GridFunction*> out;
    for (const JordanChain& c : chains)
      for (const GridFunction& f : c.functions) out.push_back(&f);
    return out;
  }

  /// Chain-consistency invariants (levelwise; see canbas1): the eigenfunction
  /// solves (h - lambda) phi = 0, each higher member maps to the one below.
  void validate(const Hamiltonian& h) const {
    if (size() > 6) throw Error("basis larger than the supported N = 6");
    for (const JordanChain& c : chains) {
      if (c.functions.empty()) throw Error("empty chain");
      GridFunction zero = GridFunction::constant(grid(), 0.0);
      if (schrod::schrod_residual(h, c.lambda, c.functions[0], zero) > 1e-6)
        throw Error("basis: chain head is not a formal eigenfunction");
      for (size_t i = 1; i < c.functions.size(); ++i)
        if (schrod::schrod_residual(h, c.lambda, c.functions[i], c.functions[i - 1]) > 1e-4)
          throw Error("basis: broken Jordan chain");
    }
    // No eigenvalue may occur in more than two chains (Remark 1).
    for (size_t a = 0; a < chains.size(); ++a) {
      int same = 0;
      for (size_t b = 0; b < chains.size(); ++b)
        if (std::abs(chains[a].lambda - chains[b].lambda) < 1e-9) ++same;
      if (same > 2) throw Error("basis: more than two chains share an eigenvalue");
    }
  }
};

/// Generalized Crum determinant W_j: Wronskian of the trailing subset, rows
/// phi_N (top) down to phi_j (bottom). j is 1-based; W_{N+1} = 1.
inline GridFunction partial_wronskian(const JordanBasis& basis, int j) {
  const int n = basis.size();
  if (j < 1 || j > n + 1) throw Error("partial wronskian: index out of range");
  if (j == n + 1) return GridFunction::constant(basis.grid(), 1.0);
  std::vector<const GridFunction*> flat = basis.flat();
  std::vector<GridFunction> rows;
  for (int i = n - 1; i >= j - 1; --i) rows.push_back(*flat[i]);
  return wronskian(rows);
}

namespace detail {

inline std::string format_zeros(const GridFunction& f) {
  std::vector<int> idx = node_scan(f);
  std::string s;
  char buf[32];
  for (size_t i = 0; i < idx.size() && i < 6; ++i) {
    std::snprintf(buf, sizeof buf, "%s%.4g", i ? ", " : "", f.grid().x(idx[i]));
    s += buf;
  }
  if (idx.size() > 6) s += ", ...";
  return s;
}

/// W'/W with dips masked to zero; reports whether masking happened.
inline GridFunction log_derivative(const GridFunction& W, bool* masked = nullptr) {
  GridFunction d = derivative_any(W, 1);
  GridFunction r = GridFunction::constant(W.grid(), 0.0);
  bool hit = false;
  for (int i = 0; i < W.size(); ++i) {
    if (std::abs(W[i]) < 1e-9 * local_max_abs(W, i)) {
      hit = true;
      r[i] = 0.0;
    } else {
      r[i] = d[i] / W[i];
    }
  }
  if (masked) *masked = hit;
  return r;
}

/// Derivative columns 0..max_order for each function.
inline std::vector<std::vector<GridFunction>> derivative_table(
    const std::vector<const GridFunction*>& fs, int max_order) {
  std::vector<std::vector<GridFunction>> t(fs.size());
  for (size_t i = 0; i < fs.size(); ++i) {
    t[i].push_back(*fs[i]);
    for (int o = 1; o <= max_order; ++o) t[i].push_back(derivative_any(t[i][o - 1], 1));
  }
  return t;
}

}  // namespace detail

enum class Sign { minus, plus };

/// Residual of q f = 0 measured against the magnitudes of the individual
/// c_k f^{(k)} terms (kernel membership certificate).
inline double kernel_residual(const LinearDiffOperator& q, const GridFunction& f) {
  std::vector<GridFunction> terms;
  GridFunction d = f;
  for (int k = 0; k <= q.order(); ++k) {
    if (k > 0) d = derivative_any(d, 1);
    terms.push_back(q.coeff(k) * d);
  }
  GridFunction acc = terms[0];
  for (size_t k = 1; k < terms.size(); ++k) acc += terms[k];
  return schrod::term_relative_residual(acc, terms);
}

/// Intertwining operator from the Crum determinant formula: the order-N operator
/// annihilating every basis function, with leading coefficient (+1)^N for the
/// minus sign; sign=plus returns the transpose. Coefficient of d^k is
/// (-1)^{N+k} M_k / W_1 with M_k the minor over derivative columns != k, rows
/// phi_N..phi_1.
inline LinearDiffOperator build_intertwiner(const Hamiltonian& h, const JordanBasis& basis,
                                            Sign sign = Sign::minus) {
  basis.validate(h);
  const int n = basis.size();
  const Grid& g = basis.grid();

  GridFunction w1 = partial_wronskian(basis, 1);
  if (has_node(w1)) {
    throw Error("singular Wronskian: partner potential singular (zeros near x = " +
                detail::format_zeros(w1) + ")");
  }

  std::vector<const GridFunction*> flat = basis.flat();
  std::vector<const GridFunction*> rev(flat.rbegin(), flat.rend());
  auto table = detail::derivative_table(rev, n);

  std::vector<GridFunction> coeffs(static_cast<size_t>(n) + 1,
                                   GridFunction::constant(g, 0.0));
  std::vector<Complex> m(static_cast<size_t>(n) * n);
  for (int p = 0; p < g.n_points; ++p) {
    Complex w1p = w1[p];
    for (int k = 0; k <= n; ++k) {
      // minor over derivative columns excluding k
      for (int r = 0; r < n; ++r) {
        int cc = 0;
        for (int c = 0; c <= n; ++c) {
          if (c == k) continue;
          m[r * n + cc++] = table[r][c][p];
        }
      }
      Complex det = susyforge::detail::small_det(m, n);
      double s = ((n + k) % 2 == 0) ? 1.0 : -1.0;
      coeffs[k][p] = s * det / w1p;
    }
  }
  LinearDiffOperator q(std::move(coeffs));
  return sign == Sign::minus ? q : transpose(q);
}

/// V2 = V1 - 2 (ln W1)'' evaluated as V1 - 2(W1''/W1 - (W1'/W1)^2), cross-checked
/// against V2 - V1 = 2 alpha' with alpha the d^{N-1} coefficient of the built
/// intertwiner. For a complex-conjugate-pair basis W1 is purely imaginary
/// (Corollary 6); that is verified before taking logs.
inline GridFunction partner_potential(const GridFunction& V1, const JordanBasis& basis) {
  GridFunction w1 = partial_wronskian(basis, 1);
  if (has_node(w1))
    throw Error("singular Wronskian: partner potential singular (zeros near x = " +
                detail::format_zeros(w1) + ")");

  bool conj_pair = false;
  for (size_t a = 0; a < basis.chains.size() && !conj_pair; ++a)
    for (size_t b = a + 1; b < basis.chains.size(); ++b)
      if (std::abs(basis.chains[a].lambda - std::conj(basis.chains[b].lambda)) < 1e-9 &&
          std::abs(basis.chains[a].lambda.imag()) > 1e-12) {
        conj_pair = true;
        break;
      }
  if (conj_pair && !(Complex(0, -1) * w1).is_real() && !w1.is_real())
    throw Error("partner potential: Wronskian of a conjugate pair is neither real nor purely imaginary");

  GridFunction dw = derivative(w1, 1);
  GridFunction d2w = derivative(w1, 2);
  GridFunction inv = GridFunction::sample(w1.grid(), [](double) { return 0.0; });
  for (int i = 0; i < w1.size(); ++i) inv[i] = 1.0 / w1[i];
  GridFunction logdd = d2w * inv - (dw * inv) * (dw * inv);
  GridFunction V2 = V1 - (Complex(2.0) * logdd);
  if (!V2.is_real(1e-7)) {
    double im = 0.0;
    for (int i = interior_begin(V2.grid()); i < interior_end(V2.grid()); ++i)
      im = std::max(im, std::abs(V2[i].imag()));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", im);
    throw Error(std::string("partner potential essentially complex (max imag ") + buf + ")");
  }
  return V2.real_part();
}

/// Cross-check of Eq. p2 generalization: V2 - V1 = 2 alpha' with alpha the
/// d^{N-1} coefficient of q. Returns the term-relative residual.
inline double partner_alpha_residual(const GridFunction& V1, const GridFunction& V2,
                                     const LinearDiffOperator& q) {
  GridFunction alpha = q.coeff(q.order() - 1);
  GridFunction rhs = Complex(2.0) * derivative(alpha, 1);
  GridFunction lhs = V2 - V1;
  GridFunction r = lhs - rhs;
  return schrod::term_relative_residual(
      r, {lhs, rhs, GridFunction::constant(V1.grid(), 1.0)});
}

/// First-order chain of an intertwiner: factors r_j = d/dx + chi_j with
/// chi_j = -W_j'/W_j + W_{j+1}'/W_{j+1}; intermediate potentials from both
/// expressions of Eq. beta with their mismatch recorded.
struct FactorizationChain {
  std::vector<LinearDiffOperator> factors;          // r_1 .. r_N, applied right to left
  std::vector<GridFunction> superpotentials;        // chi_1 .. chi_N
  std::vector<GridFunction> intermediate_potentials;  // v_1 .. v_{N-1}
  std::vector<bool> singular_flags;                 // W_j has a zero (per factor)
  std::vector<bool> complex_flags;                  // chi_j essentially complex
  std::vector<double> beta_residuals;               // mismatch of the two v_j routes
  double composition_residual = -1.0;               // vs build_intertwiner, if comparable
};

inline FactorizationChain chain_factorize(const Hamiltonian& h, const JordanBasis& basis) {
  basis.validate(h);
  const int n = basis.size();
  const Grid& g = basis.grid();

  std::vector<GridFunction> W;
  W.reserve(n + 1);
  for (int j = 1; j <= n + 1; ++j) W.push_back(partial_wronskian(basis, j));
  if (has_node(W[0]))
    throw Error("singular Wronskian: partner potential singular");

  // degenerate guard: a partial Wronskian that is ~0 on a wide band
  // (dips are judged against the local neighborhood, not the global max)
  for (int j = 1; j < n; ++j) {
    int dead = 0;
    for (int i = 0; i < g.n_points; ++i)
      if (std::abs(W[j][i]) < 1e-9 * local_max_abs(W[j], i)) ++dead;
    if (dead > g.n_points / 5) throw Error("degenerate partial Wronskian");
  }

  // w_j = W_j'/W_j with node dips masked (flagged steps are report-only)
  std::vector<GridFunction> w;
  std::vector<bool> masked(n + 1, false);
  for (int j = 0; j <= n; ++j) {
    bool hit = false;
    w.push_back(detail::log_derivative(W[j], &hit));
    masked[j] = hit;
  }

  FactorizationChain chain;
  std::vector<Complex> lambdas = basis.flat_lambdas();
  for (int j = 0; j < n; ++j) {
    GridFunction chi = w[j + 1] - w[j];
    chain.singular_flags.push_back(has_node(W[j]) || masked[j]);
    chain.complex_flags.push_back(!chi.is_real());
    chain.factors.push_back(LinearDiffOperator::darboux(chi));
    chain.superpotentials.push_back(std::move(chi));
  }
  for (int j = 0; j + 1 < n; ++j) {
    // v_j = chi_j^2 - chi_j' + lambda_j = chi_{j+1}^2 + chi_{j+1}' + lambda_{j+1}
    const GridFunction& cj = chain.superpotentials[j];
    const GridFunction& cj1 = chain.superpotentials[j + 1];
    GridFunction v_a = cj * cj - derivative_any(cj, 1) + GridFunction::constant(g, lambdas[j]);
    GridFunction v_b =
        cj1 * cj1 + derivative_any(cj1, 1) + GridFunction::constant(g, lambdas[j + 1]);
    chain.beta_residuals.push_back(rel_diff(v_a, v_b));
    chain.intermediate_potentials.push_back(std::move(v_a));
  }

  bool any_singular = false;
  for (bool s : chain.singular_flags) any_singular |= s;
  if (!any_singular) {
    LinearDiffOperator q = build_intertwiner(h, basis, Sign::minus);
    chain.composition_residual = op_distance(compose_chain(chain.factors), q);
  }
  return chain;
}

/// Max interior residual of the partial-Wronskian system: Eq. aaa3 for
/// j = 1..N-1 (with w_{N+1} = 0 from W_{N+1} = 1) and Eq. aaa4, each relative to
/// its largest term.
inline double partial_wronskian_system_residual(const JordanBasis& basis,
                                                const GridFunction& V1,
                                                const std::vector<Complex>& lambdas_flat) {
  const int n = basis.size();
  if (static_cast<int>(lambdas_flat.size()) != n)
    throw Error("partial wronskian system: lambda count mismatch");
  const Grid& g = basis.grid();

  std::vector<GridFunction> w, dw;
  for (int j = 1; j <= n + 1; ++j) {
    GridFunction W = partial_wronskian(basis, j);
    if (j <= n && has_node(W, kBoundaryMargin))
      throw Error("partial wronskian system: W_" + std::to_string(j) +
                  " vanishes in the evaluation region");
    w.push_back(detail::log_derivative(W));
    dw.push_back(derivative_any(w.back(), 1));
  }

  double worst = 0.0;
  auto add = [&](const GridFunction& res, const std::vector<GridFunction>& terms) {
    worst = std::max(worst, schrod::term_relative_residual(res, terms));
  };

  GridFunction zero = GridFunction::constant(g, 0.0);
  for (int j = 0; j + 1 < n; ++j) {
    const GridFunction& wj = w[j];
    const GridFunction& wj1 = w[j + 1];
    const GridFunction& wj2 = w[j + 2];  // w_{N+1} slot holds zero via W_{N+1}=1
    GridFunction t1 = dw[j] - dw[j + 2];
    GridFunction t2 = wj * wj - wj2 * wj2;
    GridFunction t3 = Complex(-2.0) * (wj1 * (wj - wj2));
    GridFunction t4 = GridFunction::constant(g, lambdas_flat[j] - lambdas_flat[j + 1]);
    add(t1 + t2 + t3 + t4, {t1, t2, t3, t4, GridFunction::constant(g, 1.0)});
  }
  {
    GridFunction t1 = dw[n - 1];
    GridFunction t2 = w[n - 1] * w[n - 1];
    GridFunction t3 = GridFunction::constant(g, lambdas_flat[n - 1]);
    GridFunction r = t1 + t2 + t3 - V1;
    add(r, {t1, t2, t3, V1, GridFunction::constant(g, 1.0)});
  }
  return worst;
}

}  // namespace susyforge::crum
