#pragma once

// Grid, two-component fields, quadrature, differentiation and an embedded
// Runge-Kutta integrator. Everything else in the library sits on top of this.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace solitonlab {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

// Raised when a numerical procedure cannot deliver its contract
// (step underflow, ill-conditioning, no convergence, ...).
class NumericalError : public std::runtime_error {
 public:
  enum class Kind {
    step_underflow,
    ill_conditioned,
    no_convergence,
    singular_assembly,
    out_of_range,
    near_singular,
    degenerate_fit,
    blow_up,
    outside_tube,
    normalization_mismatch,
  };
  NumericalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class GridKind { collocation, periodic };

class Grid {
 public:
  Grid() = default;
  Grid(double half_width, int n, GridKind kind) : half_width_(half_width), n_(n), kind_(kind) {
    if (!(half_width > 0.0)) throw std::invalid_argument("grid half_width must be positive");
    if (n < 16) throw std::invalid_argument("grid needs at least 16 points");
    dx_ = kind == GridKind::collocation ? 2.0 * half_width / (n - 1) : 2.0 * half_width / n;
  }

  [[nodiscard]] double half_width() const noexcept { return half_width_; }
  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(n_); }
  [[nodiscard]] GridKind kind() const noexcept { return kind_; }
  [[nodiscard]] double dx() const noexcept { return dx_; }
  [[nodiscard]] double x(std::size_t i) const noexcept {
    return -half_width_ + static_cast<double>(i) * dx_;
  }
  [[nodiscard]] std::vector<double> points() const {
    std::vector<double> xs(size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = x(i);
    return xs;
  }
  // Index of the mirror point -x_i. On a periodic grid x_0 = -L pairs with itself.
  [[nodiscard]] std::size_t mirror(std::size_t i) const noexcept {
    if (kind_ == GridKind::collocation) return size() - 1 - i;
    return i == 0 ? 0 : size() - i;
  }
  // Trapezoid weight of node i.
  [[nodiscard]] double weight(std::size_t i) const noexcept {
    if (kind_ == GridKind::collocation && (i == 0 || i + 1 == size())) return 0.5 * dx_;
    return dx_;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.n_ == b.n_ && a.kind_ == b.kind_ && a.half_width_ == b.half_width_;
  }

 private:
  double half_width_ = 1.0;
  int n_ = 16;
  GridKind kind_ = GridKind::collocation;
  double dx_ = 0.0;
};

inline Grid make_grid(double half_width, int n, GridKind kind = GridKind::collocation) {
  return Grid(half_width, n, kind);
}

// C^2-valued samples on a grid. Component 1 and 2 are stored separately so
// scalar kernels (FFT, stencils) can run on contiguous memory.
struct Field2 {
  Grid grid;
  std::vector<cplx> v1;
  std::vector<cplx> v2;

  Field2() = default;
  explicit Field2(const Grid& g) : grid(g), v1(g.size()), v2(g.size()) {}
  Field2(const Grid& g, std::vector<cplx> a, std::vector<cplx> b)
      : grid(g), v1(std::move(a)), v2(std::move(b)) {
    if (v1.size() != g.size() || v2.size() != g.size())
      throw std::invalid_argument("field length does not match grid");
  }

  template <class F1, class F2>
  static Field2 sample(const Grid& g, F1&& f1, F2&& f2) {
    Field2 out(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = g.x(i);
      out.v1[i] = f1(xi);
      out.v2[i] = f2(xi);
    }
    return out;
  }
  template <class F1>
  static Field2 scalar(const Grid& g, F1&& f1) {
    return sample(g, std::forward<F1>(f1), [](double) { return cplx{}; });
  }

  [[nodiscard]] std::size_t size() const noexcept { return v1.size(); }

  Field2& operator+=(const Field2& o) {
    for (std::size_t i = 0; i < size(); ++i) { v1[i] += o.v1[i]; v2[i] += o.v2[i]; }
    return *this;
  }
  Field2& operator-=(const Field2& o) {
    for (std::size_t i = 0; i < size(); ++i) { v1[i] -= o.v1[i]; v2[i] -= o.v2[i]; }
    return *this;
  }
  Field2& operator*=(cplx s) {
    for (std::size_t i = 0; i < size(); ++i) { v1[i] *= s; v2[i] *= s; }
    return *this;
  }
  friend Field2 operator+(Field2 a, const Field2& b) { return a += b; }
  friend Field2 operator-(Field2 a, const Field2& b) { return a -= b; }
  friend Field2 operator*(cplx s, Field2 a) { return a *= s; }
  friend Field2 operator*(double s, Field2 a) { return a *= cplx{s, 0.0}; }
};

inline void require_same_grid(const Field2& a, const Field2& b) {
  if (!(a.grid == b.grid) || a.size() != b.size()) throw std::invalid_argument("grid mismatch");
}

// Trapezoid rule for a sampled scalar.
template <class T>
inline T trapz(const Grid& g, std::span<const T> f) {
  T acc{};
  for (std::size_t i = 0; i < f.size(); ++i) acc += g.weight(i) * f[i];
  return acc;
}
inline double trapz(const Grid& g, const std::vector<double>& f) {
  return trapz<double>(g, std::span<const double>(f));
}
inline cplx trapz(const Grid& g, const std::vector<cplx>& f) {
  return trapz<cplx>(g, std::span<const cplx>(f));
}

// <u, v> = \int Re(u1 conj(v1) + u2 conj(v2)) dx.
inline double inner(const Field2& u, const Field2& v) {
  require_same_grid(u, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += u.grid.weight(i) * (std::real(u.v1[i] * std::conj(v.v1[i])) +
                               std::real(u.v2[i] * std::conj(v.v2[i])));
  }
  return acc;
}

inline double norm_l2(const Field2& u) { return std::sqrt(std::max(0.0, inner(u, u))); }

inline double norm_sup(const Field2& u) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    m = std::max({m, std::abs(u.v1[i]), std::abs(u.v2[i])});
  return m;
}

// sup norm restricted to |x| <= radius.
inline double norm_sup_window(const Field2& u, double radius) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (std::abs(u.grid.x(i)) > radius) continue;
    m = std::max({m, std::abs(u.v1[i]), std::abs(u.v2[i])});
  }
  return m;
}

inline double even_defect(const Field2& u) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const std::size_t j = u.grid.mirror(i);
    m = std::max({m, std::abs(u.v1[i] - u.v1[j]), std::abs(u.v2[i] - u.v2[j])});
  }
  return m;
}

inline bool is_even(const Field2& u, double rel_tol = 1e-10) {
  return even_defect(u) <= rel_tol * std::max(norm_sup(u), 1e-300);
}

// Owning FFTW plan pair for a fixed length. Plan creation goes through the
// global FFTW planner, which is not thread-safe; execution is.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (buf_ == nullptr) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::span<cplx> data() noexcept {
    return {reinterpret_cast<cplx*>(buf_), n_};
  }
  void forward() { fftw_execute(fwd_); }
  // Unnormalized inverse; callers divide by n.
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

// Angular wavenumbers matching FFTW's output ordering for a periodic grid.
inline std::vector<double> wavenumbers(const Grid& g) {
  const std::size_t n = g.size();
  const double period = static_cast<double>(n) * g.dx();
  std::vector<double> k(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<double>(j < n / 2 ? static_cast<long>(j)
                                                   : static_cast<long>(j) - static_cast<long>(n));
    k[j] = 2.0 * std::numbers::pi * jj / period;
  }
  return k;
}

namespace detail {

inline std::vector<cplx> fd_derivative(const Grid& g, std::span<const cplx> f, int order) {
  const std::size_t n = f.size();
  std::vector<cplx> d(n);
  const double h = g.dx();
  if (order == 1) {
    const double c = 1.0 / (12.0 * h);
    for (std::size_t i = 2; i + 2 < n; ++i)
      d[i] = c * (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]);
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    d[n - 1] = -c * (-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4] -
                     3.0 * f[n - 5]);
    d[n - 2] = -c * (-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] +
                     f[n - 5]);
  } else {
    const double c = 1.0 / (12.0 * h * h);
    for (std::size_t i = 2; i + 2 < n; ++i)
      d[i] = c * (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]);
    auto left0 = [&](auto at) {
      return c * (45.0 * at(0) - 154.0 * at(1) + 214.0 * at(2) - 156.0 * at(3) + 61.0 * at(4) -
                  10.0 * at(5));
    };
    auto left1 = [&](auto at) {
      return c * (10.0 * at(0) - 15.0 * at(1) - 4.0 * at(2) + 14.0 * at(3) - 6.0 * at(4) + at(5));
    };
    d[0] = left0([&](std::size_t j) { return f[j]; });
    d[1] = left1([&](std::size_t j) { return f[j]; });
    d[n - 1] = left0([&](std::size_t j) { return f[n - 1 - j]; });
    d[n - 2] = left1([&](std::size_t j) { return f[n - 1 - j]; });
  }
  return d;
}

inline std::vector<cplx> spectral_derivative(const Grid& g, std::span<const cplx> f, int order) {
  const std::size_t n = f.size();
  FftPlan plan(n);
  auto buf = plan.data();
  std::copy(f.begin(), f.end(), buf.begin());
  plan.forward();
  const auto k = wavenumbers(g);
  for (std::size_t j = 0; j < n; ++j) {
    cplx m = order == 1 ? I * k[j] : cplx{-k[j] * k[j], 0.0};
    if (order == 1 && j == n / 2) m = 0.0;
    buf[j] *= m / static_cast<double>(n);
  }
  plan.backward();
  return {buf.begin(), buf.end()};
}

}  // namespace detail

// d^order/dx^order of a sampled scalar: fourth-order finite differences on
// collocation grids (one-sided near the edges), spectral on periodic grids.
inline std::vector<cplx> derivative(const Grid& g, std::span<const cplx> f, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("derivative order must be 1 or 2");
  if (f.size() != g.size()) throw std::invalid_argument("grid mismatch");
  return g.kind() == GridKind::collocation ? detail::fd_derivative(g, f, order)
                                           : detail::spectral_derivative(g, f, order);
}

inline std::vector<double> derivative(const Grid& g, const std::vector<double>& f, int order) {
  std::vector<cplx> c(f.begin(), f.end());
  const auto d = derivative(g, std::span<const cplx>(c), order);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i].real();
  return out;
}

inline Field2 derivative(const Field2& u, int order) {
  return Field2(u.grid, derivative(u.grid, std::span<const cplx>(u.v1), order),
                derivative(u.grid, std::span<const cplx>(u.v2), order));
}

// Six-point Lagrange interpolation of sampled data at an arbitrary abscissa.
// Points outside the grid evaluate to zero (all interpolated fields decay).
inline cplx interpolate(const Grid& g, std::span<const cplx> f, double x) {
  const double s = (x + g.half_width()) / g.dx();
  const auto n = static_cast<long>(g.size());
  if (s < 0.0 || s > static_cast<double>(n - 1)) return {};
  long i0 = static_cast<long>(std::floor(s)) - 2;
  i0 = std::clamp(i0, 0L, n - 6);
  cplx acc{};
  for (long j = 0; j < 6; ++j) {
    double w = 1.0;
    for (long m = 0; m < 6; ++m) {
      if (m == j) continue;
      w *= (s - static_cast<double>(i0 + m)) / static_cast<double>(j - m);
    }
    acc += w * f[static_cast<std::size_t>(i0 + j)];
  }
  return acc;
}

// Resamples u onto grid g via x -> u(scale * x), multiplied by amplitude.
inline Field2 resample(const Field2& u, const Grid& g, double scale = 1.0, double amplitude = 1.0) {
  Field2 out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double xs = scale * g.x(i);
    out.v1[i] = amplitude * interpolate(u.grid, u.v1, xs);
    out.v2[i] = amplitude * interpolate(u.grid, u.v2, xs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4) integration of y' = F(x, y) on complex states.

using OdeRhs = std::function<void(double, std::span<const cplx>, std::span<cplx>)>;

struct OdeProblem {
  std::size_t dimension = 0;
  OdeRhs rhs;
  double tolerance = 1e-10;
  double min_step = 1e-12;
  std::size_t max_steps = 5'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

namespace detail {

struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

// Integrates from x0 to x1 (either direction). Step control keeps the
// embedded error estimate below tolerance * max(1, |y|) componentwise.
inline std::vector<cplx> integrate_ode(const OdeProblem& prob, std::vector<cplx> y, double x0,
                                       double x1, OdeStats* stats = nullptr) {
  using DP = detail::DormandPrince;
  if (!(prob.tolerance > 0.0)) throw std::invalid_argument("ode tolerance must be positive");
  const std::size_t d = prob.dimension;
  if (y.size() != d) throw std::invalid_argument("ode state dimension mismatch");
  if (x0 == x1) return y;
  const double dir = x1 > x0 ? 1.0 : -1.0;
  const double span_len = std::abs(x1 - x0);
  std::array<std::vector<cplx>, 7> k;
  for (auto& v : k) v.resize(d);
  std::vector<cplx> tmp(d), ynew(d);
  double x = x0;
  double h = std::min(span_len, 0.01);
  prob.rhs(x, y, k[0]);
  std::size_t steps = 0;
  bool last = false;
  while (!last) {
    if (++steps > prob.max_steps)
      throw NumericalError(NumericalError::Kind::step_underflow, "ode: too many steps");
    if (h >= std::abs(x1 - x)) {
      h = std::abs(x1 - x);
      last = true;
    }
    const double hs = dir * h;
    auto stage = [&](std::size_t s, double cx, std::initializer_list<std::pair<int, double>> a) {
      for (std::size_t i = 0; i < d; ++i) {
        cplx acc = y[i];
        for (auto [idx, coef] : a) acc += hs * coef * k[static_cast<std::size_t>(idx)][i];
        tmp[i] = acc;
      }
      prob.rhs(x + cx * hs, tmp, k[s]);
    };
    stage(1, DP::c2, {{0, DP::a21}});
    stage(2, DP::c3, {{0, DP::a31}, {1, DP::a32}});
    stage(3, DP::c4, {{0, DP::a41}, {1, DP::a42}, {2, DP::a43}});
    stage(4, DP::c5, {{0, DP::a51}, {1, DP::a52}, {2, DP::a53}, {3, DP::a54}});
    stage(5, 1.0, {{0, DP::a61}, {1, DP::a62}, {2, DP::a63}, {3, DP::a64}, {4, DP::a65}});
    for (std::size_t i = 0; i < d; ++i)
      ynew[i] = y[i] + hs * (DP::b1 * k[0][i] + DP::b3 * k[2][i] + DP::b4 * k[3][i] +
                             DP::b5 * k[4][i] + DP::b6 * k[5][i]);
    prob.rhs(x + hs, ynew, k[6]);
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const cplx e = hs * (DP::e1 * k[0][i] + DP::e3 * k[2][i] + DP::e4 * k[3][i] +
                           DP::e5 * k[4][i] + DP::e6 * k[5][i] + DP::e7 * k[6][i]);
      const double scale = prob.tolerance * std::max({1.0, std::abs(y[i]), std::abs(ynew[i])});
      err = std::max(err, std::abs(e) / scale);
    }
    if (err <= 1.0) {
      x = last ? x1 : x + hs;
      std::swap(y, ynew);
      k[0] = k[6];
      if (stats) ++stats->accepted;
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      last = false;
      if (stats) ++stats->rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.5);
      if (h < prob.min_step)
        throw NumericalError(NumericalError::Kind::step_underflow,
                             "ode: step underflow at x = " + std::to_string(x));
    }
  }
  return y;
}

// Dense output: the state at each abscissa of `xs` (monotone, xs[0] = start).
inline std::vector<std::vector<cplx>> integrate_ode_dense(const OdeProblem& prob,
                                                          std::vector<cplx> y0,
                                                          std::span<const double> xs) {
  std::vector<std::vector<cplx>> out;
  out.reserve(xs.size());
  if (xs.empty()) return out;
  out.push_back(y0);
  for (std::size_t i = 1; i < xs.size(); ++i) out.push_back(integrate_ode(prob, out.back(), xs[i - 1], xs[i]));
  return out;
}

}  // namespace solitonlab
