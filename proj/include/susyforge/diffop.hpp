#pragma once

#include <string>
#include <utility>
#include <vector>

#include "susyforge/gridfn.hpp"

namespace susyforge {

/// Linear ordinary differential operator sum_k c_k(x) d^k/dx^k with GridFunction
/// coefficients. The leading coefficient is expected to be nowhere zero.
/// Normalized intertwiners q_N^-/q_N^+ carry leading coefficient (+1)^N/(-1)^N.
class LinearDiffOperator {
 public:
  LinearDiffOperator() = default;

  explicit LinearDiffOperator(std::vector<GridFunction> coeffs)
      : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw Error("operator: needs at least the order-0 coefficient");
    for (const GridFunction& c : coeffs_) coeffs_[0].require_same_grid(c);
  }

  static LinearDiffOperator from_constants(const Grid& g, const std::vector<Complex>& c) {
    std::vector<GridFunction> coeffs;
    coeffs.reserve(c.size());
    for (Complex v : c) coeffs.push_back(GridFunction::constant(g, v));
    return LinearDiffOperator(std::move(coeffs));
  }

  static LinearDiffOperator identity(const Grid& g) { return from_constants(g, {1.0}); }
  static LinearDiffOperator dx(const Grid& g) { return from_constants(g, {0.0, 1.0}); }

  /// d/dx + chi(x)
  static LinearDiffOperator darboux(const GridFunction& chi) {
    std::vector<GridFunction> c{chi, GridFunction::constant(chi.grid(), 1.0)};
    return LinearDiffOperator(std::move(c));
  }

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  const Grid& grid() const { return coeffs_[0].grid(); }
  const std::vector<GridFunction>& coeffs() const { return coeffs_; }
  const GridFunction& coeff(int k) const { return coeffs_[k]; }

  LinearDiffOperator& operator*=(Complex c) {
    for (GridFunction& f : coeffs_) f *= c;
    return *this;
  }
  friend LinearDiffOperator operator*(Complex c, LinearDiffOperator op) { return op *= c; }

 private:
  std::vector<GridFunction> coeffs_;
};

inline GridFunction apply(const LinearDiffOperator& op, const GridFunction& f) {
  op.coeff(0).require_same_grid(f);
  GridFunction acc = op.coeff(0) * f;
  GridFunction d = f;
  for (int k = 1; k <= op.order(); ++k) {
    d = derivative_any(d, 1);
    acc += op.coeff(k) * d;
  }
  return acc;
}

/// Coefficients of a∘b expanded by the Leibniz rule.
inline LinearDiffOperator compose(const LinearDiffOperator& a, const LinearDiffOperator& b) {
  a.coeff(0).require_same_grid(b.coeff(0));
  const Grid& g = a.grid();
  const int na = a.order(), nb = b.order();
  std::vector<GridFunction> out(static_cast<size_t>(na + nb) + 1,
                                GridFunction::constant(g, 0.0));
  for (int j = 0; j <= nb; ++j) {
    // b_j and its derivatives up to the order of a
    GridFunction bder = b.coeff(j);
    for (int k = 0; k <= na; ++k) {
      if (k > 0) bder = derivative_any(bder, 1);
      double binom = 1.0;
      for (int i = k; i <= na; ++i) {
        if (i > k) binom = binom * i / (i - k);  // C(i, k) built up incrementally
        out[static_cast<size_t>(i - k + j)] += Complex(binom) * (a.coeff(i) * bder);
      }
    }
  }
  return LinearDiffOperator(std::move(out));
}

/// Composition of several factors, applied right-to-left: ops[0]∘ops[1]∘...
/// Built as a balanced tree to bound the stencil-differentiation depth.
inline LinearDiffOperator compose_chain(const std::vector<LinearDiffOperator>& ops) {
  if (ops.empty()) throw Error("compose_chain: empty factor list");
  std::function<LinearDiffOperator(int, int)> rec = [&](int lo, int hi) {
    if (hi - lo == 1) return ops[lo];
    int mid = (lo + hi) / 2;
    return compose(rec(lo, mid), rec(mid, hi));
  };
  return rec(0, static_cast<int>(ops.size()));
}

/// Formal transpose sum_k (-d/dx)^k ∘ c_k(x), expanded to coefficient form.
inline LinearDiffOperator transpose(const LinearDiffOperator& op) {
  const Grid& g = op.grid();
  const int n = op.order();
  std::vector<GridFunction> out(static_cast<size_t>(n) + 1, GridFunction::constant(g, 0.0));
  for (int k = 0; k <= n; ++k) {
    GridFunction der = op.coeff(k);
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      // contribution of (-1)^k C(k, j) c_k^{(j)} to the coefficient of d^{k-j}
      if (j > 0) {
        binom = binom * (k - j + 1) / j;
        der = derivative_any(der, 1);
      }
      out[static_cast<size_t>(k - j)] += Complex(sign * binom) * der;
    }
  }
  return LinearDiffOperator(std::move(out));
}

/// Coefficientwise interior distance between operators, relative to the largest
/// coefficient scale. Operators are "equal" below kOpTol.
inline double op_distance(const LinearDiffOperator& a, const LinearDiffOperator& b,
                          double margin = kBoundaryMargin) {
  const int n = std::max(a.order(), b.order());
  const Grid& g = a.grid();
  GridFunction zero = GridFunction::constant(g, 0.0);
  double scale = kTiny, diff = 0.0;
  for (int k = 0; k <= n; ++k) {
    const GridFunction& ca = k <= a.order() ? a.coeff(k) : zero;
    const GridFunction& cb = k <= b.order() ? b.coeff(k) : zero;
    scale = std::max({scale, max_abs_interior(ca, margin), max_abs_interior(cb, margin)});
    GridFunction d = ca - cb;
    diff = std::max(diff, max_abs_interior(d, margin));
  }
  return diff / scale;
}

/// Schrödinger Hamiltonian h = -d²/dx² + V(x) with a real potential.
struct Hamiltonian {
  GridFunction potential;

  explicit Hamiltonian(GridFunction V) : potential(std::move(V)) {
    if (!potential.is_real()) throw Error("hamiltonian: potential must be real");
  }

  const Grid& grid() const { return potential.grid(); }

  LinearDiffOperator as_operator() const {
    const Grid& g = potential.grid();
    std::vector<GridFunction> c{potential, GridFunction::constant(g, 0.0),
                                GridFunction::constant(g, -1.0)};
    return LinearDiffOperator(std::move(c));
  }
};

inline GridFunction apply_h(const Hamiltonian& h, const GridFunction& f) {
  return h.potential * f - derivative(f, 2);
}

/// Gaussian bumps centered across the window, negligible at the boundary margin.
inline std::vector<GridFunction> gaussian_test_set(const Grid& g, int count = 5) {
  std::vector<GridFunction> fs;
  const double L = g.half_width;
  const double width = L / 8.0;
  for (int k = 0; k < count; ++k) {
    double c = (count == 1) ? 0.0 : -L / 2.0 + k * (L / (count - 1));
    fs.push_back(GridFunction::sample(
        g, [=](double x) { return std::exp(-(x - c) * (x - c) / (width * width)); }));
  }
  return fs;
}

/// max over test functions of interior max|(q h+ - h- q) f| / max|q h+ f|.
inline double intertwining_residual(const LinearDiffOperator& q, const Hamiltonian& hplus,
                                    const Hamiltonian& hminus,
                                    const std::vector<GridFunction>& test_set,
                                    double margin = kBoundaryMargin) {
  if (test_set.empty()) throw Error("intertwining residual: empty test set");
  double worst = 0.0;
  for (const GridFunction& f : test_set) {
    GridFunction lhs = apply(q, apply_h(hplus, f));
    GridFunction rhs = apply_h(hminus, apply(q, f));
    GridFunction r = lhs - rhs;
    double den = std::max(max_abs_interior(lhs, margin), kTiny);
    worst = std::max(worst, max_abs_interior(r, margin) / den);
  }
  return worst;
}

// CSV serialization: header "x,c0_re,c0_im,...,cN_re,cN_im".
inline void write_csv(const LinearDiffOperator& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "x";
  for (int k = 0; k <= op.order(); ++k) out << ",c" << k << "_re,c" << k << "_im";
  out << "\n";
  char buf[64];
  const Grid& g = op.grid();
  for (int i = 0; i < g.n_points; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", g.x(i));
    out << buf;
    for (int k = 0; k <= op.order(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", op.coeff(k)[i].real(),
                    op.coeff(k)[i].imag());
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace susyforge
