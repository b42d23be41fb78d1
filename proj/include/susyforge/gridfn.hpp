#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace susyforge {

using Complex = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shared numerical defaults.
inline constexpr int kFdAccuracy = 8;           // finite-difference accuracy order p
inline constexpr double kBoundaryMargin = 0.1;  // fraction of samples excluded per side in norms
inline constexpr double kRealTol = 1e-9;        // realness threshold, relative to max|f|
inline constexpr double kZeroTol = 1e-12;       // sign-change magnitude filter
inline constexpr double kOpTol = 1e-6;          // operator coefficient equality
inline constexpr double kTiny = 1e-290;         // absolute floor for relative norms

/// Uniform symmetric grid on [-L, L]. n_points is odd so that x = 0 is a sample.
struct Grid {
  double half_width = 0.0;
  int n_points = 0;

  static Grid make(double half_width, int n_points) {
    if (!(half_width > 0.0)) throw Error("grid: half_width must be positive");
    if (n_points < 64) throw Error("grid: n_points must be at least 64");
    if (n_points % 2 == 0) throw Error("grid: n_points must be odd");
    return Grid{half_width, n_points};
  }

  double spacing() const { return 2.0 * half_width / (n_points - 1); }
  double x(int i) const { return -half_width + i * spacing(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Complex-valued function sampled on a Grid. Values are kept finite; arithmetic
/// requires identical grids.
class GridFunction {
 public:
  GridFunction() = default;

  GridFunction(Grid grid, std::vector<Complex> values)
      : grid_(grid), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_.n_points)
      throw Error("grid function: value count does not match grid");
    check_finite();
  }

  static GridFunction constant(const Grid& g, Complex c) {
    return GridFunction(g, std::vector<Complex>(g.n_points, c));
  }

  template <class F>
  static GridFunction sample(const Grid& g, F&& f) {
    std::vector<Complex> v(g.n_points);
    for (int i = 0; i < g.n_points; ++i) v[i] = Complex(f(g.x(i)));
    return GridFunction(g, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  int size() const { return grid_.n_points; }
  const std::vector<Complex>& values() const { return values_; }
  std::vector<Complex>& values() { return values_; }
  Complex operator[](int i) const { return values_[i]; }
  Complex& operator[](int i) { return values_[i]; }

  double max_abs() const {
    double m = 0.0;
    for (const Complex& v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool is_real(double tol = kRealTol) const {
    double m = max_abs();
    double im = 0.0;
    for (const Complex& v : values_) im = std::max(im, std::abs(v.imag()));
    return im <= tol * std::max(m, 1e-30);
  }

  GridFunction real_part() const {
    std::vector<Complex> v(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) v[i] = Complex(values_[i].real(), 0.0);
    return GridFunction(grid_, std::move(v));
  }

  GridFunction conj() const {
    std::vector<Complex> v(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) v[i] = std::conj(values_[i]);
    return GridFunction(grid_, std::move(v));
  }

  /// Local 8-point Lagrange interpolation; x is clamped to the grid range.
  Complex interp(double x) const {
    const int n = grid_.n_points;
    const double h = grid_.spacing();
    double t = (x + grid_.half_width) / h;
    int i0 = static_cast<int>(std::floor(t)) - 3;
    i0 = std::clamp(i0, 0, n - 8);
    Complex acc = 0.0;
    for (int j = 0; j < 8; ++j) {
      double w = 1.0;
      for (int k = 0; k < 8; ++k) {
        if (k == j) continue;
        w *= (t - (i0 + k)) / static_cast<double>(j - k);
      }
      acc += w * values_[i0 + j];
    }
    return acc;
  }

  GridFunction& operator+=(const GridFunction& o) { return zip(o, [](Complex a, Complex b) { return a + b; }); }
  GridFunction& operator-=(const GridFunction& o) { return zip(o, [](Complex a, Complex b) { return a - b; }); }
  GridFunction& operator*=(const GridFunction& o) { return zip(o, [](Complex a, Complex b) { return a * b; }); }
  GridFunction& operator*=(Complex c) {
    for (Complex& v : values_) v *= c;
    return *this;
  }

  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(GridFunction a, const GridFunction& b) { return a *= b; }
  friend GridFunction operator*(Complex c, GridFunction a) { return a *= c; }
  friend GridFunction operator*(GridFunction a, Complex c) { return a *= c; }
  friend GridFunction operator-(GridFunction a) { return a *= Complex(-1.0); }
  friend GridFunction operator+(GridFunction a, Complex c) {
    for (Complex& v : a.values_) v += c;
    return a;
  }
  friend GridFunction operator-(GridFunction a, Complex c) { return a + (-c); }

  void require_same_grid(const GridFunction& o) const {
    if (!(grid_ == o.grid_)) throw Error("grid mismatch");
  }

 private:
  template <class F>
  GridFunction& zip(const GridFunction& o, F&& f) {
    require_same_grid(o);
    for (size_t i = 0; i < values_.size(); ++i) values_[i] = f(values_[i], o.values_[i]);
    check_finite();
    return *this;
  }

  void check_finite() const {
    for (const Complex& v : values_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw Error("grid function: non-finite value");
  }

  Grid grid_{};
  std::vector<Complex> values_{};
};

// ---------------------------------------------------------------------------
// Interior-window norms. The boundary margin suppresses edge pollution from
// one-sided stencils and exponentially growing formal solutions.

inline int interior_begin(const Grid& g, double margin = kBoundaryMargin) {
  return static_cast<int>(std::floor(margin * g.n_points));
}
inline int interior_end(const Grid& g, double margin = kBoundaryMargin) {
  return g.n_points - interior_begin(g, margin);
}

inline double max_abs_interior(const GridFunction& f, double margin = kBoundaryMargin) {
  int b = interior_begin(f.grid(), margin), e = interior_end(f.grid(), margin);
  double m = 0.0;
  for (int i = b; i < e; ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

/// max|a - b| over the interior, relative to the larger interior max-norm.
inline double rel_diff(const GridFunction& a, const GridFunction& b,
                       double margin = kBoundaryMargin) {
  a.require_same_grid(b);
  int s = interior_begin(a.grid(), margin), e = interior_end(a.grid(), margin);
  double num = 0.0;
  for (int i = s; i < e; ++i) num = std::max(num, std::abs(a[i] - b[i]));
  double den = std::max({max_abs_interior(a, margin), max_abs_interior(b, margin), kTiny});
  return num / den;
}

// ---------------------------------------------------------------------------
// Finite-difference calculus.

namespace detail {

/// Fornberg weights: w[j] such that f^(m)(z) ~ sum_j w[j] f(xs[j]).
inline std::vector<double> fd_weights(double z, const std::vector<double>& xs, int m) {
  const int n = static_cast<int>(xs.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0;
    double c5 = c4;
    c4 = xs[i] - z;
    for (int j = 0; j < i; ++j) {
      double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) w[j] = c[j][m];
  return w;
}

}  // namespace detail

/// d^order/dx^order by central stencils of accuracy kFdAccuracy in the interior
/// and shifted stencils of the same width at the boundary. order is limited to 4
/// per call; chain calls (or use derivative_any) for higher orders.
inline GridFunction derivative(const GridFunction& f, int order) {
  if (order < 1 || order > 4) throw Error("derivative: order must be between 1 and 4");
  const Grid& g = f.grid();
  int width = kFdAccuracy + order;
  if (width % 2 == 0) ++width;  // odd width so interior stencils are centered
  if (width > g.n_points) throw Error("grid too coarse");

  const int half = width / 2;
  const double hm = std::pow(g.spacing(), -order);
  std::vector<double> nodes(width);
  for (int j = 0; j < width; ++j) nodes[j] = j;

  // Weight tables indexed by the evaluation offset within the window.
  std::vector<std::vector<double>> w(width);
  for (int off = 0; off < width; ++off) w[off] = detail::fd_weights(off, nodes, order);

  const int n = g.n_points;
  std::vector<Complex> out(n);
  for (int i = 0; i < n; ++i) {
    int start = std::clamp(i - half, 0, n - width);
    const std::vector<double>& wi = w[i - start];
    Complex acc = 0.0;
    for (int j = 0; j < width; ++j) acc += wi[j] * f[start + j];
    out[i] = acc * hm;
  }
  return GridFunction(g, std::move(out));
}

/// Arbitrary derivative order, chaining calls of order <= 4.
inline GridFunction derivative_any(const GridFunction& f, int order) {
  if (order < 0) throw Error("derivative: negative order");
  if (order == 0) return f;
  GridFunction g = f;
  while (order > 0) {
    int step = std::min(order, 4);
    g = derivative(g, step);
    order -= step;
  }
  return g;
}

namespace detail {

/// Determinant of a dense complex k x k matrix (row-major), partial pivoting.
inline Complex small_det(std::vector<Complex>& a, int k) {
  Complex det = 1.0;
  for (int col = 0; col < k; ++col) {
    int piv = col;
    double best = std::abs(a[col * k + col]);
    for (int r = col + 1; r < k; ++r) {
      double v = std::abs(a[r * k + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) return 0.0;
    if (piv != col) {
      for (int c = col; c < k; ++c) std::swap(a[piv * k + c], a[col * k + c]);
      det = -det;
    }
    det *= a[col * k + col];
    for (int r = col + 1; r < k; ++r) {
      Complex factor = a[r * k + col] / a[col * k + col];
      for (int c = col; c < k; ++c) a[r * k + c] -= factor * a[col * k + c];
    }
  }
  return det;
}

}  // namespace detail

/// Pointwise Wronskian determinant. Row i of the matrix holds fs[i] and its
/// derivatives up to order k-1; the caller fixes the row order (the generalized
/// Crum determinants list phi_N first, descending).
inline GridFunction wronskian(const std::vector<GridFunction>& fs) {
  if (fs.empty()) throw Error("wronskian: empty input");
  const int k = static_cast<int>(fs.size());
  for (const GridFunction& f : fs) fs[0].require_same_grid(f);
  if (k == 1) return fs[0];

  std::vector<std::vector<GridFunction>> rows(k);
  for (int i = 0; i < k; ++i) {
    rows[i].reserve(k);
    rows[i].push_back(fs[i]);
    for (int o = 1; o < k; ++o) rows[i].push_back(derivative_any(rows[i][o - 1], 1));
  }

  const Grid& g = fs[0].grid();
  std::vector<Complex> out(g.n_points);
  std::vector<Complex> m(static_cast<size_t>(k) * k);
  for (int p = 0; p < g.n_points; ++p) {
    for (int i = 0; i < k; ++i)
      for (int o = 0; o < k; ++o) m[i * k + o] = rows[i][o][p];
    out[p] = detail::small_det(m, k);
  }
  return GridFunction(g, std::move(out));
}

/// Strict sign changes of Re f across consecutive samples, ignoring samples with
/// |f| below kZeroTol * max|f|. Requires f real within kRealTol.
inline int count_sign_changes(const GridFunction& f) {
  if (!f.is_real()) throw Error("not real-valued");
  double scale = f.max_abs();
  if (scale == 0.0) return 0;
  int changes = 0;
  int prev = 0;
  for (int i = 0; i < f.size(); ++i) {
    if (std::abs(f[i]) < kZeroTol * scale) continue;
    int s = f[i].real() > 0.0 ? 1 : -1;
    if (prev != 0 && s != prev) ++changes;
    prev = s;
  }
  return changes;
}

/// Sample indices where f vanishes: sign changes of Re f between consecutive
/// live samples (real f), plus dips of |f| far below its local neighborhood.
/// Magnitudes are compared locally, never against the global max: Wronskians of
/// exponential bases legitimately span dozens of decades across the window.
inline double local_max_abs(const GridFunction& f, int i, int halfwidth = 12) {
  double m = 0.0;
  for (int k = std::max(0, i - halfwidth); k < std::min(f.size(), i + halfwidth + 1); ++k)
    m = std::max(m, std::abs(f[k]));
  return m;
}

inline std::vector<int> node_scan(const GridFunction& f, double margin = 0.0,
                                  double dip_tol = 1e-9) {
  const int b = interior_begin(f.grid(), margin), e = interior_end(f.grid(), margin);
  std::vector<int> nodes;
  auto local_max = [&](int i) { return local_max_abs(f, i); };
  const bool real = f.is_real();
  int prev = 0, prev_i = -1;
  for (int i = b; i < e; ++i) {
    double a = std::abs(f[i]);
    if (a < dip_tol * local_max(i)) {
      nodes.push_back(i);
      continue;
    }
    if (real) {
      int s = f[i].real() > 0.0 ? 1 : -1;
      if (prev != 0 && s != prev) nodes.push_back((prev_i + i) / 2);
      prev = s;
      prev_i = i;
    }
  }
  return nodes;
}

/// True if f vanishes or changes sign somewhere on the grid.
inline bool has_node(const GridFunction& f, double margin = 0.0) {
  if (f.max_abs() == 0.0) return true;
  return !node_scan(f, margin).empty();
}

// ---------------------------------------------------------------------------
// CSV serialization: header "x,re,im", one row per sample, 17 significant digits.

inline void write_csv(const GridFunction& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "x,re,im\n";
  char buf[128];
  for (int i = 0; i < f.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.grid().x(i), f[i].real(),
                  f[i].imag());
    out << buf;
  }
}

inline GridFunction read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty csv: " + path);
  std::vector<double> xs;
  std::vector<Complex> vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, re, im;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &x, &re, &im) != 3)
      throw Error("malformed csv row in " + path + ": " + line);
    xs.push_back(x);
    vs.push_back(Complex(re, im));
  }
  if (xs.size() < 2) throw Error("csv too short: " + path);
  Grid g = Grid::make(-xs.front(), static_cast<int>(xs.size()));
  return GridFunction(g, std::move(vs));
}

}  // namespace susyforge
