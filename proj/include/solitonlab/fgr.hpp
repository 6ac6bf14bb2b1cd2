#pragma once

// Radiation mode g with L g = 2 i lambda g, the FGR constant gamma(p, omega)
// and the sech-power moment integrals behind its small (p - 3) expansion.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "internal_mode.hpp"
#include "jost.hpp"
#include "linearization.hpp"
#include "numerics.hpp"
#include "profile.hpp"
#include "types.hpp"

namespace solitonlab {

struct RadiationMode {
  Params params;
  double lambda = 1.0;
  double k_rad = 1.0;      // wavenumber of the oscillatory channel, 2 lambda = omega + k^2
  double amplitude = 1.0;  // tail amplitude before normalization
  double phase = 0.0;      // g_1 ~ -sin(k_rad x + phase) for large x, |phase| <= pi/2
  Field2 g;                // g_1 real, g_2 = i Im g_2
  double residual = 0.0;   // sup sech(x/4)|L g - 2 i lambda g| / sup |g|
  double symmetry = 0.0;
  double reality_residual = 0.0;
};

namespace detail {

// sup over the interior of sech(x/4) |a - b|, relative to sup |b|.
inline double weighted_residual(const Field2& a, const Field2& b, std::size_t margin) {
  const Grid& g = a.grid;
  double num = 0.0, den = 0.0;
  for (std::size_t i = margin; i + margin < g.size(); ++i) {
    const double w = 1.0 / std::cosh(0.25 * g.x(i));
    num = std::max({num, w * std::abs(a.v1[i] - b.v1[i]), w * std::abs(a.v2[i] - b.v2[i])});
    den = std::max({den, std::abs(b.v1[i]), std::abs(b.v2[i])});
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace detail

// Bounded even solution at energy 2 lambda, built from the Jost solution f1
// as f1(x) + f1(-x) and continued by the free solution beyond the region
// where the potential matters. Normalized to tail amplitude 1 with a
// negative sin coefficient.
inline RadiationMode radiation_mode(const InternalMode& mode, const Grid& grid) {
  const Params& prm = mode.params;
  const double w = prm.omega, lam = mode.lambda;
  if (!(2.0 * lam > w))
    throw NumericalError(NumericalError::Kind::out_of_range, "radiation mode needs 2 lambda > omega");
  RadiationMode out;
  out.params = prm;
  out.lambda = lam;
  const double k = std::sqrt(2.0 * lam - w), mu = std::sqrt(2.0 * lam + w);
  out.k_rad = k;

  JostOptions o;
  const double R = 25.0 / std::sqrt(w);
  o.X_max = R;
  const auto f1 = jost_solve(prm, k, JostIndex::f1, o);
  auto even = [&](double x) {
    JState a = f1.at(x);
    const JState b = reflected(f1, x);
    for (int q = 0; q < 4; ++q) a[q] += b[q];
    return a;
  };

  // The ODE is real, so the even bounded solution is real up to a phase.
  const JState s0 = even(0.0);
  const cplx sq = s0[0] * s0[0] + s0[1] * s0[1];
  const cplx rot = std::polar(1.0, -0.5 * std::arg(sq));

  const JState sR = even(R);
  const double u1 = (rot * sR[0]).real(), du1 = (rot * sR[2]).real();
  const double u2R = (rot * sR[1]).real();
  double C = u1 * std::cos(k * R) - du1 / k * std::sin(k * R);
  double S = u1 * std::sin(k * R) + du1 / k * std::cos(k * R);
  const double A = std::hypot(C, S);
  const double scale = std::max(std::abs(s0[0]), std::abs(s0[1]));
  if (!(A > 1e-6 * scale))
    throw NumericalError(NumericalError::Kind::degenerate_fit, "radiation mode: tail amplitude vanishes");
  const double sign = S > 0.0 ? -1.0 : 1.0;
  const double norm = sign / A;
  C *= norm;
  S *= norm;
  out.amplitude = A;
  out.phase = std::atan2(-C, -S);

  Field2 g(grid);
  double imag = 0.0, big = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = std::abs(grid.x(i));
    double v1, v2;
    if (x <= R) {
      const JState s = even(x);
      const cplx a = rot * s[0], b = rot * s[1];
      imag = std::max({imag, std::abs(a.imag()), std::abs(b.imag())});
      big = std::max({big, std::abs(a), std::abs(b)});
      v1 = norm * a.real();
      v2 = norm * b.real();
    } else {
      v1 = C * std::cos(k * x) + S * std::sin(k * x);
      v2 = norm * u2R * std::exp(-mu * (x - R));
    }
    g.v1[i] = v1 + v2;
    g.v2[i] = cplx{0.0, v1 - v2};
  }
  out.reality_residual = big > 0.0 ? imag / big : 0.0;

  double asym = 0.0, gmax = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t j = grid.size() - 1 - i;
    asym = std::max({asym, std::abs(g.v1[i] - g.v1[j]), std::abs(g.v2[i] - g.v2[j])});
    gmax = std::max({gmax, std::abs(g.v1[i]), std::abs(g.v2[i])});
  }
  out.symmetry = asym / gmax;
  const auto L = build_operator(prm, OperatorKind::matrix_L, grid);
  out.residual = detail::weighted_residual(L.apply(g), cplx{0.0, 2.0 * lam} * g, 16);
  out.g = std::move(g);
  return out;
}

// g_3 = (phi_3^2 cos(kx) / 2 + (phi_3'/phi_3) sin(kx), i (phi_3'/phi_3) sin(kx)); k = 1 solves
// L g = 2 i g at p = 3.
inline Field2 radiation_mode_p3(const Grid& grid, double k = 1.0) {
  Field2 g(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.x(i), ph2 = soliton_power(Params(3.0), x, 2.0), t = std::tanh(x);
    g.v1[i] = 0.5 * ph2 * std::cos(k * x) - t * std::sin(k * x);
    g.v2[i] = cplx{0.0, -t * std::sin(k * x)};
  }
  return g;
}

// ---------------------------------------------------------------------------
// FGR constant. With xi_2 = i Im xi_2 and g_2 = i Im g_2 the pairing is
//   gamma = int phi^{p-2} (p xi_1^2 - (Im xi_2)^2) g_1 + 2 int phi^{p-2} xi_1 Im xi_2 Im g_2.

namespace detail {

inline void check_gamma_inputs(const InternalMode& mode, const RadiationMode& rad) {
  if (!mode.has_xi) throw std::invalid_argument("gamma needs the eigenfunction");
  if (mode.normalization != XiNormalization::darboux)
    throw NumericalError(NumericalError::Kind::normalization_mismatch,
                         "gamma is defined with the darboux normalization of xi");
  const Grid& a = mode.xi.grid;
  const Grid& b = rad.g.grid;
  if (a.size() != b.size() || a.half_width() != b.half_width())
    throw std::invalid_argument("gamma: xi and g live on different grids");
}

inline std::vector<double> phi_pm2(const Params& prm, const Grid& g) {
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) w[i] = soliton_power(prm, g.x(i), prm.p - 2.0);
  return w;
}

}  // namespace detail

// G_1 = phi^{p-2}(p xi_1^2 - (Im xi_2)^2), G_2 = 2 phi^{p-2} xi_1 Im xi_2.
inline std::pair<std::vector<cplx>, std::vector<cplx>> gamma_sources(const Params& prm, const Field2& xi) {
  const Grid& g = xi.grid;
  const auto w = detail::phi_pm2(prm, g);
  std::vector<cplx> G1(g.size()), G2(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double a = xi.v1[i].real(), b = xi.v2[i].imag();
    G1[i] = w[i] * (prm.p * a * a - b * b);
    G2[i] = 2.0 * w[i] * a * b;
  }
  return {G1, G2};
}

inline double gamma(const InternalMode& mode, const RadiationMode& rad) {
  detail::check_gamma_inputs(mode, rad);
  const Grid& g = rad.g.grid;
  const auto [G1, G2] = gamma_sources(mode.params, mode.xi);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    f[i] = G1[i].real() * rad.g.v1[i].real() + G2[i].real() * rad.g.v2[i].imag();
  return trapz(g, f);
}

// gamma = <G_1 + L_+ G_2 / (2 lambda), g_1>, using Im g_2 = L_+ g_1 / (2 lambda).
inline double gamma_g_route(const InternalMode& mode, const RadiationMode& rad) {
  detail::check_gamma_inputs(mode, rad);
  const Grid& g = rad.g.grid;
  const auto [G1, G2] = gamma_sources(mode.params, mode.xi);
  const auto Lp = build_operator(mode.params, OperatorKind::L_plus, g);
  const auto LG2 = Lp.apply_scalar(G2);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    f[i] = (G1[i].real() + LG2[i].real() / (2.0 * mode.lambda)) * rad.g.v1[i].real();
  return trapz(g, f);
}

struct GammaReport {
  double p = 3.0;
  double lambda = 1.0;
  double gamma = 0.0;
  double gamma_g_route = 0.0;
  double symplectic_factor = 1.0;  // gamma under the symplectic xi normalization is factor^2 * gamma
  double radiation_residual = 0.0;
  double eigen_residual = 0.0;
};

// gamma(p, 1) from scratch: BS alpha, Darboux xi, radiation mode on [-40, 40].
inline GammaReport gamma_at(double p, const Grid& grid = make_grid(40.0, 4096)) {
  const Params prm(p);
  InternalMode m = find_lambda(prm, ModeMethod::birman_schwinger);
  m = xi_build(m, grid, XiNormalization::darboux);
  RadiationMode rad;
  if (p == 3.0) {
    rad.params = prm;
    rad.g = radiation_mode_p3(grid);
  } else {
    rad = radiation_mode(m, grid);
  }
  GammaReport r;
  r.p = p;
  r.lambda = m.lambda;
  r.gamma = gamma(m, rad);
  r.gamma_g_route = gamma_g_route(m, rad);
  r.radiation_residual = rad.residual;
  r.eigen_residual = m.eigen_residual;
  if (p != 3.0) {
    const double s = detail::symplectic_pairing(m.xi, m.alpha);
    r.symplectic_factor = std::sqrt(0.5 / std::abs(s));
  }
  return r;
}

// gamma_1 = p_1 / sqrt 2 with p_1 = pi / cosh(pi / 2).
inline double gamma_linear_closed_form() { return std::numbers::pi / (std::sqrt(2.0) * std::cosh(0.5 * std::numbers::pi)); }

// ---------------------------------------------------------------------------
// Moments p_k ... f_k (k odd) of sech^k against cos/sin and the cubic
// correction T.

enum class MomentFamily { p, q, r, s, a, b, c, d, e, f };
enum class MomentMethod { quadrature, recursion };

inline std::string to_string(MomentFamily f) {
  static const char* names[] = {"p", "q", "r", "s", "a", "b", "c", "d", "e", "f"};
  return names[static_cast<int>(f)];
}

inline MomentFamily moment_family_from_string(const std::string& s) {
  for (int i = 0; i < 10; ++i)
    if (to_string(static_cast<MomentFamily>(i)) == s) return static_cast<MomentFamily>(i);
  throw std::invalid_argument("unknown moment family '" + s + "'");
}

struct MomentTable {
  MomentFamily family = MomentFamily::p;
  MomentMethod provenance = MomentMethod::quadrature;
  std::map<int, double> values;
};

constexpr int kMomentMaxK = 9;

class MomentContext {
 public:
  explicit MomentContext(const Grid& g = make_grid(40.0, 4096)) : grid_(g) {
    T_ = convolution_T(g);
    dT_ = derivative(g, T_, 1);
    build_recursion();
  }

  [[nodiscard]] const Grid& grid() const { return grid_; }

  [[nodiscard]] double quadrature(MomentFamily fam, int k) const {
    if (k < 1) throw std::invalid_argument("moment index must be positive");
    std::vector<double> f(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const double x = grid_.x(i), ch = std::cosh(x), S = std::pow(1.0 / ch, k);
      const double t = std::tanh(x), c = std::cos(x), s = std::sin(x);
      // log sech without overflow at large |x|
      const double ls = -(std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - std::numbers::ln2);
      switch (fam) {
        case MomentFamily::p: f[i] = S * c; break;
        case MomentFamily::q: f[i] = S * ls * c; break;
        case MomentFamily::r: f[i] = S * T_[i] * c; break;
        case MomentFamily::s: f[i] = S * T_[i] * t * s; break;
        case MomentFamily::a: f[i] = x * S * t * c; break;
        case MomentFamily::b: f[i] = S * t * s; break;
        case MomentFamily::c: f[i] = S * ls * t * s; break;
        case MomentFamily::d: f[i] = x * S * s; break;
        case MomentFamily::e: f[i] = S * t * dT_[i] * c; break;
        case MomentFamily::f: f[i] = S * dT_[i] * s; break;
      }
    }
    return trapz(grid_, f);
  }

  // Values from p_1, q_1, r_1, s_1, a_1 through the integration-by-parts
  // reductions; b..f by elimination.
  [[nodiscard]] double recursion(MomentFamily fam, int k) const {
    if (k < 1 || k > kMomentMaxK || k % 2 == 0)
      throw std::invalid_argument("recursion moments are tabulated for odd k <= 9");
    auto P = [&](int j) { return rec_.at('p').at(j); };
    auto Q = [&](int j) { return rec_.at('q').at(j); };
    auto Rr = [&](int j) { return rec_.at('r').at(j); };
    auto Ss = [&](int j) { return rec_.at('s').at(j); };
    auto A = [&](int j) { return rec_.at('a').at(j); };
    const double kk = k;
    switch (fam) {
      case MomentFamily::p: return P(k);
      case MomentFamily::q: return Q(k);
      case MomentFamily::r: return Rr(k);
      case MomentFamily::s: return Ss(k);
      case MomentFamily::a: return A(k);
      case MomentFamily::b: return (kk + 1.0) * P(k + 2) - kk * P(k);
      case MomentFamily::c: return (kk + 1.0) * Q(k + 2) - kk * Q(k) + P(k + 2) - P(k);
      case MomentFamily::d: return -kk * A(k) + P(k);
      case MomentFamily::e: return Ss(k) + kk * Rr(k) - (kk + 1.0) * Rr(k + 2);
      case MomentFamily::f: return -Rr(k) + kk * Ss(k);
    }
    throw std::invalid_argument("unknown moment family");
  }

 private:
  void build_recursion() {
    const double r2 = std::sqrt(2.0);
    auto& p = rec_['p'];
    auto& q = rec_['q'];
    auto& r = rec_['r'];
    auto& s = rec_['s'];
    auto& a = rec_['a'];
    p[1] = quadrature(MomentFamily::p, 1);
    q[1] = quadrature(MomentFamily::q, 1);
    r[1] = quadrature(MomentFamily::r, 1);
    s[1] = quadrature(MomentFamily::s, 1);
    a[1] = quadrature(MomentFamily::a, 1);
    const int top = kMomentMaxK + 4;
    for (int k = 1; k + 2 <= top + 2; k += 2) {
      const double K = k;
      p[k + 2] = (1.0 + K * K) / (K * (K + 1.0)) * p[k];
    }
    for (int k = 1; k + 2 <= top; k += 2) {
      const double K = k;
      q[k + 2] = ((1.0 + K * K) * q[k] + 2.0 * K * p[k] - (2.0 * K + 1.0) * p[k + 2]) / (K * (K + 1.0));
      r[k + 2] = ((K * K - 3.0) * r[k] + 2.0 * K * s[k] + 2.0 * r2 * p[k + 2]) / (K * (K + 1.0));
      s[k + 2] = ((K * K - 3.0) * s[k] + 2.0 * (K + 1.0) * r[k + 2] - 2.0 * K * r[k] +
                  2.0 * r2 * (K + 3.0) * p[k + 4] - 2.0 * r2 * (K + 2.0) * p[k + 2]) /
                 ((K + 1.0) * (K + 2.0));
      a[k + 2] = ((K * K + 1.0) * a[k] - 2.0 * K * p[k] + 2.0 * (K + 1.0) * p[k + 2]) / ((K + 1.0) * (K + 2.0));
    }
  }

  Grid grid_;
  std::vector<double> T_, dT_;
  std::map<char, std::map<int, double>> rec_;
};

inline const MomentContext& default_moment_context() {
  static const MomentContext ctx;
  return ctx;
}

inline double moment(MomentFamily fam, int k, MomentMethod method,
                     const MomentContext& ctx = default_moment_context()) {
  if (k < 1 || k > kMomentMaxK || k % 2 == 0) throw std::invalid_argument("moments are defined for odd k in [1, 9]");
  return method == MomentMethod::quadrature ? ctx.quadrature(fam, k) : ctx.recursion(fam, k);
}

inline MomentTable moment_table(MomentFamily fam, MomentMethod method,
                                const MomentContext& ctx = default_moment_context()) {
  MomentTable t;
  t.family = fam;
  t.provenance = method;
  for (int k = 1; k <= kMomentMaxK; k += 2) t.values[k] = moment(fam, k, method, ctx);
  return t;
}

struct MomentIdentity {
  std::string name;
  double residual = 0.0;
};

// The ten integration-by-parts identities at index k, all sides by quadrature.
inline std::vector<MomentIdentity> moment_identities(int k, const MomentContext& ctx = default_moment_context()) {
  auto m = [&](MomentFamily f, int j) { return ctx.quadrature(f, j); };
  using F = MomentFamily;
  const double K = k, r2 = std::sqrt(2.0);
  std::vector<MomentIdentity> out;
  out.push_back({"b", m(F::b, k) - ((K + 1) * m(F::p, k + 2) - K * m(F::p, k))});
  out.push_back({"c", m(F::c, k) - ((K + 1) * m(F::q, k + 2) - K * m(F::q, k) + m(F::p, k + 2) - m(F::p, k))});
  out.push_back({"d", m(F::d, k) - (-K * m(F::a, k) + m(F::p, k))});
  out.push_back({"e", m(F::e, k) - (m(F::s, k) + K * m(F::r, k) - (K + 1) * m(F::r, k + 2))});
  out.push_back({"f", m(F::f, k) - (-m(F::r, k) + K * m(F::s, k))});
  out.push_back({"p_reduction", m(F::p, k + 2) - (1 + K * K) / (K * (K + 1)) * m(F::p, k)});
  out.push_back({"q_reduction", m(F::q, k + 2) - ((1 + K * K) * m(F::q, k) + 2 * K * m(F::p, k) -
                                                  (2 * K + 1) * m(F::p, k + 2)) / (K * (K + 1))});
  out.push_back({"r_reduction",
                 m(F::r, k + 2) - ((K * K - 3) * m(F::r, k) + 2 * K * m(F::s, k) + 2 * r2 * m(F::p, k + 2)) /
                                      (K * (K + 1))});
  out.push_back({"s_reduction",
                 m(F::s, k + 2) - ((K * K - 3) * m(F::s, k) + 2 * (K + 1) * m(F::r, k + 2) - 2 * K * m(F::r, k) +
                                   2 * r2 * (K + 3) * m(F::p, k + 4) - 2 * r2 * (K + 2) * m(F::p, k + 2)) /
                                      ((K + 1) * (K + 2))});
  out.push_back({"a_reduction", m(F::a, k + 2) - ((K * K + 1) * m(F::a, k) - 2 * K * m(F::p, k) +
                                                  2 * (K + 1) * m(F::p, k + 2)) / ((K + 1) * (K + 2))});
  return out;
}

// gamma_1 = p_1 / sqrt 2, p_1 by quadrature.
inline double gamma_linear_coefficient(const MomentContext& ctx = default_moment_context()) {
  return ctx.quadrature(MomentFamily::p, 1) / std::sqrt(2.0);
}

}  // namespace solitonlab
