#pragma once

// Jost solutions of H u = E u, E = omega + k^2 (real k), their Wronskians,
// the resolvent kernel of H, the even-sector Evans function in the gap and
// a Volterra-equation cross-check.
//
// Written as u'' = Q(x) u with
//   Q = diag(omega - E, omega + E) - phi^{p-1} [[a, b], [b, a]],
//   a = (p+1)/2, b = (p-1)/2.
// States are (u1, u2, u1', u2'); the Wronskian is W[f, g] = f'.g - f.g'.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "types.hpp"

namespace solitonlab {

using JState = std::array<cplx, 4>;

// phi_omega^{p-1} in closed form.
inline double potential_weight(const Params& prm, double x) {
  const double s = 1.0 / std::cosh(0.5 * (prm.p - 1.0) * std::sqrt(prm.omega) * x);
  return 0.5 * prm.omega * (prm.p + 1.0) * s * s;
}

// Default matching abscissa: the potential tail beyond X0 is below ~1e-10.
inline double default_matching_point(const Params& prm) {
  return 30.0 / std::min(1.0, 0.5 * (prm.p - 1.0)) / std::sqrt(prm.omega);
}

inline OdeProblem eigen_ode(const Params& prm, cplx E, double tol = 1e-12) {
  OdeProblem pr;
  pr.dimension = 4;
  pr.tolerance = tol;
  pr.min_step = 1e-13;
  const double a = 0.5 * (prm.p + 1.0), b = 0.5 * (prm.p - 1.0), w = prm.omega;
  pr.rhs = [prm, E, a, b, w](double x, std::span<const cplx> y, std::span<cplx> dy) {
    const double W = potential_weight(prm, x);
    dy[0] = y[2];
    dy[1] = y[3];
    dy[2] = (w - E - a * W) * y[0] - b * W * y[1];
    dy[3] = -b * W * y[0] + (w + E - a * W) * y[1];
  };
  return pr;
}

inline cplx wronskian(const JState& f, const JState& g) {
  return f[2] * g[0] + f[3] * g[1] - f[0] * g[2] - f[1] * g[3];
}

// State of g(x) = f(-x) at x, given the state of f at -x.
inline JState reflect(const JState& s) { return {s[0], s[1], -s[2], -s[3]}; }

enum class JostIndex { f1 = 1, f2 = 2, f3 = 3, f4_tilde = 4 };

// A solution sampled at x_lo + i h with values and derivatives; evaluated
// between samples by cubic Hermite interpolation of u (using u') and of u'
// (using u'' = Q u).
struct JostSolution {
  Params params;
  cplx k{};
  JostIndex index = JostIndex::f1;
  cplx energy{};
  cplx mu{};          // sqrt(2 omega + k^2)
  double X0 = 0.0;    // matching abscissa (upper end of the samples)
  double X_max = 0.0; // samples cover [-X_max, X0]
  double h = 0.01;
  std::vector<JState> states;

  [[nodiscard]] double x_lo() const { return -X_max; }
  [[nodiscard]] double x_hi() const { return x_lo() + h * static_cast<double>(states.size() - 1); }
  [[nodiscard]] double x(std::size_t i) const { return x_lo() + h * static_cast<double>(i); }

  [[nodiscard]] JState at(double x) const {
    const double t = (x - x_lo()) / h;
    const auto last = static_cast<double>(states.size() - 1);
    if (t < -1e-9 || t > last + 1e-9)
      throw NumericalError(NumericalError::Kind::out_of_range,
                           "jost solution evaluated outside [-X_max, X0] at x = " + std::to_string(x));
    auto i = static_cast<std::size_t>(std::clamp(std::floor(t), 0.0, last - 1.0));
    const double s = t - static_cast<double>(i);
    if (s < 1e-12) return states[i];
    if (s > 1.0 - 1e-12) return states[i + 1];
    const JState& A = states[i];
    const JState& B = states[i + 1];
    const JState qa = second(this->x(i), A), qb = second(this->x(i + 1), B);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    JState out;
    for (int c = 0; c < 2; ++c) {
      out[c] = h00 * A[c] + h * h10 * A[c + 2] + h01 * B[c] + h * h11 * B[c + 2];
      out[c + 2] = h00 * A[c + 2] + h * h10 * qa[c] + h01 * B[c + 2] + h * h11 * qb[c];
    }
    return out;
  }

  [[nodiscard]] std::array<cplx, 2> value(double x) const {
    const auto s = at(x);
    return {s[0], s[1]};
  }

  // f with its asymptotic exponential removed: m -> e1 or e2 at +infinity.
  [[nodiscard]] std::array<cplx, 2> m(double x) const {
    const auto u = value(x);
    cplx e;
    switch (index) {
      case JostIndex::f1: e = std::exp(-I * k * x); break;
      case JostIndex::f2: e = std::exp(I * k * x); break;
      case JostIndex::f3: e = std::exp(mu * x); break;
      default: e = std::exp(-mu * x); break;
    }
    return {u[0] * e, u[1] * e};
  }

 private:
  [[nodiscard]] JState second(double x, const JState& s) const {
    const double a = 0.5 * (params.p + 1.0), b = 0.5 * (params.p - 1.0), w = params.omega;
    const double W = potential_weight(params, x);
    return {(w - energy - a * W) * s[0] - b * W * s[1], -b * W * s[0] + (w + energy - a * W) * s[1],
            0.0, 0.0};
  }
};

struct JostOptions {
  double X0 = 0.0;     // 0 selects default_matching_point
  double X_max = 25.0;
  double step = 0.01;
  double tolerance = 1e-12;
};

namespace detail {

struct SampleLayout {
  double h;
  int n_lo, n_hi;  // samples at (i - n_lo) h, i = 0 .. n_lo + n_hi
  [[nodiscard]] double x(int i) const { return (i - n_lo) * h; }
  [[nodiscard]] int size() const { return n_lo + n_hi + 1; }
  [[nodiscard]] int top() const { return n_lo + n_hi; }
};

inline SampleLayout make_layout(const Params& prm, const JostOptions& o) {
  if (!(o.step > 0.0) || !(o.X_max > 0.0)) throw std::invalid_argument("jost: bad sampling options");
  const double X0 = std::max(o.X0 > 0.0 ? o.X0 : default_matching_point(prm), o.X_max);
  return {o.step, static_cast<int>(std::ceil(o.X_max / o.step - 1e-9)),
          static_cast<int>(std::ceil(X0 / o.step - 1e-9))};
}

inline std::vector<cplx> as_vec(const JState& s) { return {s.begin(), s.end()}; }
inline JState as_state(const std::vector<cplx>& v) { return {v[0], v[1], v[2], v[3]}; }

// Leftward integration from the top sample down to index i_end. With `f3`
// given, the solution is kept bounded by subtracting its least-squares
// f3-component every unit length; the subtracted multiples are added back
// consistently at the end, so the result is one solution modulo f3.
inline std::vector<JState> integrate_left(const OdeProblem& pr, const JState& y0, const SampleLayout& L,
                                          int i_end, const std::vector<JState>* f3 = nullptr) {
  std::vector<JState> out(static_cast<std::size_t>(L.size()));
  std::vector<cplx> C(out.size(), cplx{});
  const int top = L.top();
  const int stride = std::max(1, static_cast<int>(std::lround(1.0 / L.h)));
  out[static_cast<std::size_t>(top)] = y0;
  std::vector<cplx> v = as_vec(y0);
  cplx acc{};
  for (int i = top; i > i_end; --i) {
    v = integrate_ode(pr, std::move(v), L.x(i), L.x(i - 1));
    const auto j = static_cast<std::size_t>(i - 1);
    if (f3 && (top - (i - 1)) % stride == 0) {
      const JState& s = (*f3)[j];
      cplx num{};
      double den = 0.0;
      for (int q = 0; q < 4; ++q) {
        num += std::conj(s[q]) * v[q];
        den += std::norm(s[q]);
      }
      const cplx c = num / den;
      for (int q = 0; q < 4; ++q) v[q] -= c * s[q];
      acc += c;
    }
    out[j] = as_state(v);
    C[j] = acc;
  }
  if (f3)
    for (int i = i_end; i <= top; ++i) {
      const auto j = static_cast<std::size_t>(i);
      for (int q = 0; q < 4; ++q) out[j][q] += (C[j] - acc) * (*f3)[j][q];
    }
  return out;
}

// Decaying solution e^{-mu x} e2 at +infinity, over all samples.
inline std::vector<JState> raw_f3(const Params& prm, cplx mu, const OdeProblem& pr, const SampleLayout& L) {
  const double X0 = L.x(L.top());
  auto out = integrate_left(pr, {0.0, 1.0, 0.0, -mu}, L, 0);
  const cplx scale = std::exp(-mu * X0);
  for (auto& s : out)
    for (auto& c : s) c *= scale;
  (void)prm;
  return out;
}

struct JostCore {
  SampleLayout layout;
  cplx k, E, mu;
  std::vector<JState> f1;  // bounded at both ends
  std::vector<JState> f3;
  cplx beta{};             // f1 = f1_raw - beta f3 on x >= 0
};

inline JostCore jost_core(const Params& prm, double k, const JostOptions& o) {
  JostCore c;
  c.layout = make_layout(prm, o);
  const auto& L = c.layout;
  c.k = k;
  c.E = prm.omega + k * k;
  c.mu = std::sqrt(cplx{2.0 * prm.omega + k * k});
  const OdeProblem pr = eigen_ode(prm, c.E, o.tolerance);
  c.f3 = raw_f3(prm, c.mu, pr, L);
  const double X0 = L.x(L.top());
  const int i0 = L.n_lo;
  const cplx e = std::exp(I * k * X0);
  const auto f1r = integrate_left(pr, {e, 0.0, I * k * e, 0.0}, L, i0, &c.f3);
  std::vector<JState> f2r;
  if (k != 0.0) {
    f2r = f1r;
    for (auto& s : f2r)
      for (auto& q : s) q = std::conj(q);
  } else {
    f2r = integrate_left(pr, {X0, 0.0, 1.0, 0.0}, L, i0, &c.f3);
  }
  const auto z = static_cast<std::size_t>(i0);
  Eigen::Matrix4cd A;
  Eigen::Vector4cd rhs;
  const JState cols[4] = {reflect(f1r[z]), reflect(f2r[z]), reflect(c.f3[z]), c.f3[z]};
  for (int r = 0; r < 4; ++r) {
    for (int q = 0; q < 4; ++q) A(r, q) = cols[q][r];
    rhs(r) = f1r[z][r];
  }
  const Eigen::FullPivLU<Eigen::Matrix4cd> lu(A);
  if (!lu.isInvertible())
    throw NumericalError(NumericalError::Kind::ill_conditioned, "jost: f3 is bounded at both ends");
  const Eigen::Vector4cd sol = lu.solve(rhs);
  c.beta = sol(3);
  c.f1.assign(static_cast<std::size_t>(L.size()), JState{});
  for (int i = i0; i <= L.top(); ++i) {
    const auto j = static_cast<std::size_t>(i);
    for (int q = 0; q < 4; ++q) c.f1[j][q] = f1r[j][q] - c.beta * c.f3[j][q];
  }
  for (int i = 0; i < i0; ++i) {
    const auto m = static_cast<std::size_t>(2 * i0 - i);
    const JState g1 = reflect(f1r[m]), g2 = reflect(f2r[m]), g3 = reflect(c.f3[m]);
    for (int q = 0; q < 4; ++q)
      c.f1[static_cast<std::size_t>(i)][q] = sol(0) * g1[q] + sol(1) * g2[q] + sol(2) * g3[q];
  }
  return c;
}

inline JostSolution wrap(const Params& prm, const JostCore& c, JostIndex j, std::vector<JState> s) {
  JostSolution out;
  out.params = prm;
  out.k = c.k;
  out.index = j;
  out.energy = c.E;
  out.mu = c.mu;
  out.h = c.layout.h;
  out.X_max = c.layout.n_lo * c.layout.h;
  out.X0 = c.layout.n_hi * c.layout.h;
  out.states = std::move(s);
  return out;
}

}  // namespace detail

inline double real_wavenumber(cplx k) {
  if (std::abs(k.imag()) > 1e-14) throw std::invalid_argument("jost solutions are computed for real k only");
  return k.real();
}

// f1, f2 are the solutions bounded on the whole line with e^{+-ikx} e1 at
// +infinity (f1 is fixed modulo f3 by boundedness at -infinity); f3 decays
// like e^{-mu x} e2; f4-tilde grows like e^{mu x} e2 and is determined only
// modulo f1, f2, f3.
inline JostSolution jost_solve(const Params& prm, cplx k_in, JostIndex j, const JostOptions& o = {}) {
  const double k = real_wavenumber(k_in);
  switch (j) {
    case JostIndex::f1: {
      auto c = detail::jost_core(prm, k, o);
      return detail::wrap(prm, c, j, std::move(c.f1));
    }
    case JostIndex::f2: {
      auto c = detail::jost_core(prm, -k, o);
      auto s = std::move(c.f1);
      c.k = k;
      return detail::wrap(prm, c, j, std::move(s));
    }
    case JostIndex::f3: {
      detail::JostCore c;
      c.layout = detail::make_layout(prm, o);
      c.k = k;
      c.E = prm.omega + k * k;
      c.mu = std::sqrt(cplx{2.0 * prm.omega + k * k});
      auto s = detail::raw_f3(prm, c.mu, eigen_ode(prm, c.E, o.tolerance), c.layout);
      return detail::wrap(prm, c, j, std::move(s));
    }
    case JostIndex::f4_tilde: {
      detail::JostCore c;
      c.layout = detail::make_layout(prm, o);
      const auto& L = c.layout;
      c.k = k;
      c.E = prm.omega + k * k;
      c.mu = std::sqrt(cplx{2.0 * prm.omega + k * k});
      const OdeProblem pr = eigen_ode(prm, c.E, o.tolerance);
      // Started at 0 and integrated both ways; rightward the e^{mu x} part
      // dominates, which fixes the normalization at X0.
      std::vector<JState> s(static_cast<std::size_t>(L.size()));
      const auto z = static_cast<std::size_t>(L.n_lo);
      s[z] = {0.0, 1.0, 0.0, c.mu};
      std::vector<cplx> v = detail::as_vec(s[z]);
      for (int i = L.n_lo; i < L.top(); ++i) {
        v = integrate_ode(pr, std::move(v), L.x(i), L.x(i + 1));
        s[static_cast<std::size_t>(i + 1)] = detail::as_state(v);
      }
      v = detail::as_vec(s[z]);
      for (int i = L.n_lo; i > 0; --i) {
        v = integrate_ode(pr, std::move(v), L.x(i), L.x(i - 1));
        s[static_cast<std::size_t>(i - 1)] = detail::as_state(v);
      }
      const double X0 = L.x(L.top());
      const cplx lead = s.back()[1] * std::exp(-c.mu * X0);
      for (auto& st : s)
        for (auto& q : st) q /= lead;
      return detail::wrap(prm, c, j, std::move(s));
    }
  }
  throw std::invalid_argument("unknown jost index");
}

// g_j(x) = f_j(-x) as a state.
inline JState reflected(const JostSolution& f, double x) { return reflect(f.at(-x)); }

inline cplx wronskian(const JostSolution& f, const JostSolution& g, double x) {
  return wronskian(f.at(x), g.at(x));
}

// ---------------------------------------------------------------------------

struct WronskianData {
  Params params;
  cplx k{};
  Eigen::Matrix2cd D;      // [[W(f1,g1), W(f1,g3)], [W(f3,g1), W(f3,g3)]] at x = 0
  cplx detD{};
  cplx W12{};              // W[f1, f2]
  cplx W34{};              // W[f3, f4-tilde]
  double constancy = 0.0;  // max |W(x) - W(0)| / ||D|| over x in [-5, 5]
  double symmetry = 0.0;   // |D12 - D21| / ||D||
};

inline double max_abs(const Eigen::Matrix2cd& M) { return M.cwiseAbs().maxCoeff(); }

inline WronskianData wronskian_D(const Params& prm, cplx k_in, const JostOptions& o = {}) {
  const double k = real_wavenumber(k_in);
  WronskianData out;
  out.params = prm;
  out.k = k;
  const auto f1 = jost_solve(prm, k, JostIndex::f1, o);
  const auto f2 = jost_solve(prm, k, JostIndex::f2, o);
  const auto f3 = jost_solve(prm, k, JostIndex::f3, o);
  const auto f4 = jost_solve(prm, k, JostIndex::f4_tilde, o);
  auto Dat = [&](double x) {
    Eigen::Matrix2cd D;
    const JState a1 = f1.at(x), a3 = f3.at(x), b1 = reflected(f1, x), b3 = reflected(f3, x);
    D << wronskian(a1, b1), wronskian(a1, b3), wronskian(a3, b1), wronskian(a3, b3);
    return D;
  };
  out.D = Dat(0.0);
  out.detD = out.D.determinant();
  out.W12 = wronskian(f1, f2, 0.0);
  out.W34 = wronskian(f3, f4, 0.0);
  const double nD = max_abs(out.D);
  out.symmetry = std::abs(out.D(0, 1) - out.D(1, 0)) / nD;
  for (double x = -5.0; x <= 5.0 + 1e-12; x += 0.25) {
    out.constancy = std::max(out.constancy, max_abs(Dat(x) - out.D) / nD);
    out.constancy = std::max(out.constancy, std::abs(wronskian(f1, f2, x) - out.W12) / std::abs(out.W12 == 0.0 ? 1.0 : out.W12));
    out.constancy = std::max(out.constancy, std::abs(wronskian(f3, f4, x) - out.W34) / std::abs(out.W34));
  }
  return out;
}

// W[f3(., 0), g3(., 0)] at x = 0.
inline cplx resonance_wronskian(const Params& prm, const JostOptions& o = {}) {
  const auto f3 = jost_solve(prm, 0.0, JostIndex::f3, o);
  return wronskian(f3.at(0.0), reflected(f3, 0.0));
}

// Coefficients with W[f_j, f4] = 0 (j = 1, 2) for f4 = f4_tilde - c1 f1 - c2 f2.
struct F4Construction {
  cplx c1{}, c2{};
  JostSolution f4;
};

inline F4Construction jost_f4(const Params& prm, cplx k_in, const JostOptions& o = {}) {
  const double k = real_wavenumber(k_in);
  if (k == 0.0) throw NumericalError(NumericalError::Kind::near_singular, "f4 needs k != 0");
  const auto f1 = jost_solve(prm, k, JostIndex::f1, o);
  const auto f2 = jost_solve(prm, k, JostIndex::f2, o);
  auto t = jost_solve(prm, k, JostIndex::f4_tilde, o);
  const cplx w12 = wronskian(f1, f2, 0.0);
  F4Construction out;
  out.c2 = wronskian(f1, t, 0.0) / w12;
  out.c1 = -wronskian(f2, t, 0.0) / w12;
  for (std::size_t i = 0; i < t.states.size(); ++i)
    for (int q = 0; q < 4; ++q) t.states[i][q] -= out.c1 * f1.states[i][q] + out.c2 * f2.states[i][q];
  out.f4 = std::move(t);
  return out;
}

// Least-squares slope of log|m_j(x) - e| on [a, b].
inline double decay_slope(const JostSolution& f, double a, double b, int samples = 61) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = a + (b - a) * i / (samples - 1);
    auto m = f.m(x);
    if (f.index == JostIndex::f1 || f.index == JostIndex::f2) m[0] -= 1.0; else m[1] -= 1.0;
    const double y = std::log(std::hypot(std::abs(m[0]), std::abs(m[1])));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double n = samples;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Closed forms at p = 3, omega = 1.

inline std::array<cplx, 2> jost_f1_p3(double k, double x) {
  const double t = std::tanh(x), s2 = 1.0 / (std::cosh(x) * std::cosh(x));
  const cplx n = (1.0 - I * k) * (1.0 - I * k);
  const cplx e = std::exp(I * k * x);
  return {e * (1.0 - k * k - 2.0 * I * k * t - s2) / n, -e * s2 / n};
}

// The growing form e^{mu x}(-sech^2, mu^2 + 1 - 2 mu tanh - sech^2) reflected
// and divided by its leading coefficient (mu + 1)^2.
inline std::array<double, 2> jost_f3_p3(double k, double x) {
  const double mu = std::sqrt(2.0 + k * k);
  const double t = std::tanh(x), s2 = 1.0 / (std::cosh(x) * std::cosh(x));
  const double e = std::exp(-mu * x) / ((mu + 1.0) * (mu + 1.0));
  return {-e * s2, e * (mu * mu + 1.0 + 2.0 * mu * t - s2)};
}

// ---------------------------------------------------------------------------
// Resolvent kernel of H.

struct ResolventSample {
  Params params;
  double E = 0.0;
  double x = 0.0, y = 0.0;
  Eigen::Matrix2cd kernel;
  double weight_ratio = 0.0;
};

inline Eigen::Matrix2cd sigma1() { Eigen::Matrix2cd s; s << 0, 1, 1, 0; return s; }
inline Eigen::Matrix2cd sigma3() { Eigen::Matrix2cd s; s << 1, 0, 0, -1; return s; }

// R^+ for E >= omega uses k = sqrt(E - omega) > 0, R^- uses -k; for E <= -omega
// R^+(E) = -sigma1 R^-(-E) sigma1.
class Resolvent {
 public:
  Resolvent(const Params& prm, double E, int branch = +1, const JostOptions& o = {})
      : params_(prm), E_(E), flip_(E < 0.0) {
    if (!(std::abs(E) >= prm.omega))
      throw std::invalid_argument("resolvent kernel needs |E| >= omega");
    const int b = flip_ ? -branch : branch;
    const double k = b * std::sqrt(std::abs(E) - prm.omega);
    f1_ = jost_solve(prm, k, JostIndex::f1, o);
    f3_ = jost_solve(prm, k, JostIndex::f3, o);
    const JState a1 = f1_.at(0.0), a3 = f3_.at(0.0);
    D_ << wronskian(a1, reflect(a1)), wronskian(a1, reflect(a3)), wronskian(a3, reflect(a1)),
        wronskian(a3, reflect(a3));
    const double nD = max_abs(D_);
    if (std::abs(D_.determinant()) < 1e-8 * nD * nD)
      throw NumericalError(NumericalError::Kind::near_singular,
                           "resolvent: det D(k) below the conditioning floor");
    // f1 is bounded at -infinity and g3 decays there, so W[f1, g3] = 0
    // exactly; the rounding residue would otherwise multiply the growth of f3.
    off_diagonal_ = std::abs(D_(0, 1)) / nD;
    Dinv_ = Eigen::Matrix2cd::Zero();
    Dinv_(0, 0) = 1.0 / D_(0, 0);
    Dinv_(1, 1) = 1.0 / D_(1, 1);
  }

  // |W[f1, g3]| / ||D||, dropped in the kernel.
  [[nodiscard]] double off_diagonal() const { return off_diagonal_; }

  [[nodiscard]] const Eigen::Matrix2cd& D() const { return D_; }
  [[nodiscard]] double range() const { return std::min(f1_.X_max, f1_.X0); }

  [[nodiscard]] Eigen::Matrix2cd kernel(double x, double y) const {
    Eigen::Matrix2cd R = flip_ ? (-sigma1() * raw(x, y) * sigma1()).eval() : raw(x, y);
    return R;
  }

  [[nodiscard]] ResolventSample sample(double x, double y) const {
    ResolventSample s;
    s.params = params_;
    s.E = E_;
    s.x = x;
    s.y = y;
    s.kernel = kernel(x, y);
    auto pos = [](double v) { return std::max(v, 0.0); };
    auto neg = [](double v) { return std::max(-v, 0.0); };
    const double w = x >= y ? 1.0 + neg(x) + pos(y) : 1.0 + pos(x) + neg(y);
    s.weight_ratio = s.kernel.norm() / w;
    return s;
  }

 private:
  // Columns of F1(x) = [f1 f3](x), G2(y) = [g1 g3](y).
  [[nodiscard]] Eigen::Matrix2cd F(double x) const {
    const auto a = f1_.value(x), b = f3_.value(x);
    Eigen::Matrix2cd M;
    M << a[0], b[0], a[1], b[1];
    return M;
  }
  [[nodiscard]] Eigen::Matrix2cd raw(double x, double y) const {
    if (x >= y) return -F(x) * Dinv_.transpose() * F(-y).transpose() * sigma3();
    return -F(-x) * Dinv_ * F(y).transpose() * sigma3();
  }

  Params params_;
  double E_;
  bool flip_;
  JostSolution f1_, f3_;
  Eigen::Matrix2cd D_, Dinv_;
  double off_diagonal_ = 0.0;
};

inline ResolventSample resolvent_kernel(const Params& prm, double E, double x, double y,
                                        const JostOptions& o = {}) {
  return Resolvent(prm, E, +1, o).sample(x, y);
}

// ---------------------------------------------------------------------------
// Even-sector Evans function on the gap 0 < lam < omega.

struct DecayingFrame {
  double lambda = 0.0;
  double X0 = 0.0;
  std::vector<double> xs;                  // descending, xs.back() = 0
  std::vector<std::array<JState, 2>> frame;  // normalized frame at xs
  std::vector<int> segment;                // segment of each sample
  std::vector<Eigen::Matrix2d> R;          // frame_{s+1} = frame_s(end) R_s^{-1}
  double log_scale = 0.0;                  // log prod diag R
  double evans = 0.0;                      // det of the u' block at 0 (normalized frame)
};

inline constexpr double default_gap_margin = 1e-7;

// Beyond the potential tail the uncoupled exponentials are exact solutions,
// so the start does not need to grow with 1/alpha.
inline double gap_matching_point(const Params& prm, double lam) {
  (void)lam;
  return default_matching_point(prm);
}

// Two decaying solutions (e^{-alpha x} e1, e^{-kappa x} e2) integrated from X0
// to 0, re-orthonormalized every unit length. `sample_step` > 0 keeps the frame at
// every multiple of it (used to reconstruct eigenfunctions).
inline DecayingFrame decaying_frame(const Params& prm, double lam, double sample_step = 0.0,
                                    double X_start = 0.0, double eps_gap = default_gap_margin,
                                    double tol = 1e-12) {
  if (!(lam > 0.0)) throw std::invalid_argument("evans_gap: lambda must be positive");
  if (lam > prm.omega * (1.0 - eps_gap))
    throw NumericalError(NumericalError::Kind::out_of_range, "evans_gap: lambda too close to the threshold");
  DecayingFrame out;
  out.lambda = lam;
  const double alpha = std::sqrt(prm.omega - lam), kappa = std::sqrt(prm.omega + lam);
  out.X0 = std::max(gap_matching_point(prm, lam), X_start);
  const double seg = 1.0;
  const int nseg = static_cast<int>(std::ceil(out.X0 / seg - 1e-9));
  out.X0 = nseg * seg;
  const int per = sample_step > 0.0 ? std::max(1, static_cast<int>(std::lround(seg / sample_step))) : 1;
  const OdeProblem pr = eigen_ode(prm, lam, tol);
  std::array<std::vector<cplx>, 2> v = {std::vector<cplx>{1.0, 0.0, -alpha, 0.0},
                                        std::vector<cplx>{0.0, 1.0, 0.0, -kappa}};
  for (auto& c : v) {
    double n = 0;
    for (auto q : c) n += std::norm(q);
    for (auto& q : c) q /= std::sqrt(n);
  }
  auto keep = [&](double x, int s) {
    out.xs.push_back(x);
    out.frame.push_back({detail::as_state(v[0]), detail::as_state(v[1])});
    out.segment.push_back(s);
  };
  if (sample_step > 0.0) keep(out.X0, 0);
  for (int s = 0; s < nseg; ++s) {
    const double xa = out.X0 - s * seg;
    for (int i = 1; i <= per; ++i) {
      const double x0 = xa - (i - 1) * seg / per, x1 = xa - i * seg / per;
      for (auto& c : v) c = integrate_ode(pr, std::move(c), x0, x1);
      if (sample_step > 0.0 && i < per) keep(x1, s);
    }
    // Gram-Schmidt with positive diagonal.
    Eigen::Matrix2d R = Eigen::Matrix2d::Zero();
    double n0 = 0;
    for (auto q : v[0]) n0 += std::norm(q);
    R(0, 0) = std::sqrt(n0);
    for (auto& q : v[0]) q /= R(0, 0);
    cplx d{};
    for (int q = 0; q < 4; ++q) d += std::conj(v[0][q]) * v[1][q];
    R(0, 1) = d.real();
    for (int q = 0; q < 4; ++q) v[1][q] -= R(0, 1) * v[0][q];
    double n1 = 0;
    for (auto q : v[1]) n1 += std::norm(q);
    R(1, 1) = std::sqrt(n1);
    for (auto& q : v[1]) q /= R(1, 1);
    out.R.push_back(R);
    out.log_scale += std::log(R(0, 0)) + std::log(R(1, 1));
    if (sample_step > 0.0) keep(xa - seg, s + 1);
  }
  out.evans = (v[0][2] * v[1][3] - v[0][3] * v[1][2]).real();
  if (sample_step <= 0.0) {
    out.xs.push_back(0.0);
    out.frame.push_back({detail::as_state(v[0]), detail::as_state(v[1])});
    out.segment.push_back(nseg);
  }
  return out;
}

// Sign-faithful normalized Evans determinant; zero at even-sector eigenvalues.
inline cplx evans_gap(const Params& prm, double lam, double eps_gap = default_gap_margin) {
  return decaying_frame(prm, lam, 0.0, 0.0, eps_gap).evans;
}

// ---------------------------------------------------------------------------
// Volterra cross-check for m = f1 e^{-ikx}:
//   m1(x) = 1 - int_x^inf K(y - x) (W M m)_1(y) dy,  K(t) = (e^{2ikt} - 1)/(2ik)
//   m2(x) = int e^{-mu|x-y| - ik(x-y)} / (2 mu) (W M m)_2(y) dy
// with W = phi^{p-1}, M = [[a, b], [b, a]], solved by Nystrom on a uniform grid.

struct VolterraResult {
  std::vector<double> x;
  std::vector<std::array<cplx, 2>> m;
};

namespace detail {

inline VolterraResult volterra_nystrom(const Params& prm, double k, double h, double lo, double hi) {
  const double a = 0.5 * (prm.p + 1.0), b = 0.5 * (prm.p - 1.0);
  const double mu = std::sqrt(2.0 * prm.omega + k * k);
  const int n = static_cast<int>(std::lround((hi - lo) / h));
  std::vector<double> xs(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) xs[static_cast<std::size_t>(i)] = lo + i * h;
  const double ysup = std::min(std::max(-lo, hi), 25.0 / ((prm.p - 1.0) * std::sqrt(prm.omega)));
  std::vector<int> sup;
  for (int i = 0; i <= n; ++i)
    if (std::abs(xs[static_cast<std::size_t>(i)]) <= ysup) sup.push_back(i);
  const auto M = static_cast<int>(sup.size());
  auto K1 = [&](double t) -> cplx {
    if (k == 0.0) return t;
    return (std::exp(2.0 * I * k * t) - 1.0) / (2.0 * I * k);
  };
  auto K2 = [&](double d) -> cplx { return std::exp(-mu * std::abs(d) - I * k * d) / (2.0 * mu); };
  std::vector<double> W(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) W[static_cast<std::size_t>(j)] = potential_weight(prm, xs[static_cast<std::size_t>(sup[j])]);
  // Row operators: m1(x) = 1 - sum_j c1_j(x) (a m1 + b m2)(y_j),
  //                m2(x) = sum_j c2_j(x) (b m1 + a m2)(y_j).
  auto coeffs = [&](double x, std::vector<cplx>& c1, std::vector<cplx>& c2) {
    for (int j = 0; j < M; ++j) {
      const double y = xs[static_cast<std::size_t>(sup[j])];
      const double w = W[static_cast<std::size_t>(j)];
      const double d = y - x;
      // Trapezoid weights plus the first Euler-Maclaurin end correction at
      // y = x, where the kernels have a corner: K1'(0) = 1 and the jump of
      // the derivative of K2 is -1.
      const bool diag = std::abs(d) < 0.5 * h;
      c1[static_cast<std::size_t>(j)] = diag ? h * h / 12.0 * w : (d > 0.0 ? h * w * K1(d) : 0.0);
      c2[static_cast<std::size_t>(j)] = h * w * K2(x - y) - (diag ? h * h / 12.0 * w : 0.0);
    }
  };
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(2 * M, 2 * M);
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(2 * M);
  std::vector<cplx> c1(static_cast<std::size_t>(M)), c2(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    coeffs(xs[static_cast<std::size_t>(sup[i])], c1, c2);
    for (int j = 0; j < M; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      A(i, j) += a * c1[jj];
      A(i, M + j) += b * c1[jj];
      A(M + i, j) -= b * c2[jj];
      A(M + i, M + j) -= a * c2[jj];
    }
    r(i) = 1.0;
  }
  const Eigen::VectorXcd z = A.partialPivLu().solve(r);
  VolterraResult out;
  out.x = xs;
  out.m.resize(xs.size());
  for (int i = 0; i <= n; ++i) {
    coeffs(xs[static_cast<std::size_t>(i)], c1, c2);
    cplx m1 = 1.0, m2 = 0.0;
    for (int j = 0; j < M; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      m1 -= c1[jj] * (a * z(j) + b * z(M + j));
      m2 += c2[jj] * (b * z(j) + a * z(M + j));
    }
    out.m[static_cast<std::size_t>(i)] = {m1, m2};
  }
  return out;
}

}  // namespace detail

// Nystrom with step h and h/2, Richardson-extrapolated at the common nodes.
inline VolterraResult volterra_jost(const Params& prm, double k, double h = 0.1, double lo = -20.0,
                                    double hi = 30.0) {
  const auto c = detail::volterra_nystrom(prm, k, h, lo, hi);
  const auto f = detail::volterra_nystrom(prm, k, 0.5 * h, lo, hi);
  VolterraResult out = c;
  for (std::size_t i = 0; i < c.x.size(); ++i)
    for (int q = 0; q < 2; ++q) out.m[i][q] = (16.0 * f.m[2 * i][q] - c.m[i][q]) / 15.0;
  return out;
}

}  // namespace solitonlab
