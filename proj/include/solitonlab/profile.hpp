#pragma once

// Ground states, conserved quantities, the power nonlinearity with its
// derivatives, and the refined profile phi[omega, z].

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "numerics.hpp"
#include "types.hpp"

namespace solitonlab {

// phi_omega(x) = omega^{1/(p-1)} ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) sqrt(omega) x / 2)
inline double soliton_value(const Params& prm, double x) {
  const double p = prm.p;
  const double amp = std::pow(prm.omega * (p + 1.0) / 2.0, 1.0 / (p - 1.0));
  const double arg = 0.5 * (p - 1.0) * std::sqrt(prm.omega) * x;
  return amp * std::pow(1.0 / std::cosh(arg), 2.0 / (p - 1.0));
}

inline double soliton_prime(const Params& prm, double x) {
  const double arg = 0.5 * (prm.p - 1.0) * std::sqrt(prm.omega) * x;
  return -std::sqrt(prm.omega) * std::tanh(arg) * soliton_value(prm, x);
}

inline double soliton_domega(const Params& prm, double x) {
  const double p = prm.p, w = prm.omega;
  const double arg = 0.5 * (p - 1.0) * std::sqrt(w) * x;
  return soliton_value(prm, x) * (1.0 / ((p - 1.0) * w) - 0.5 * x * std::tanh(arg) / std::sqrt(w));
}

// phi_omega^{p-1}, written without pow(sech) underflow issues.
inline double soliton_power(const Params& prm, double x, double exponent) {
  return std::pow(soliton_value(prm, x), exponent);
}

inline Field2 soliton(const Params& prm, const Grid& g) {
  return Field2::scalar(g, [&](double x) { return cplx{soliton_value(prm, x), 0.0}; });
}

inline Field2 soliton_domega(const Params& prm, const Grid& g) {
  return Field2::scalar(g, [&](double x) { return cplx{soliton_domega(prm, x), 0.0}; });
}

inline std::vector<double> sample(const Grid& g, auto&& f) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.x(i));
  return out;
}

// Complex scalar u = v1 + i v2 of a field in real-pair form.
inline std::vector<cplx> to_scalar(const Field2& u) {
  std::vector<cplx> s(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) s[i] = u.v1[i] + I * u.v2[i];
  return s;
}

inline Field2 from_scalar(const Grid& g, std::span<const cplx> s) {
  Field2 out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.v1[i] = s[i].real();
    out.v2[i] = s[i].imag();
  }
  return out;
}

// Real pairing <a, b>_C = Re(a conj b) and its L^2 version on complex scalars.
inline double pair(cplx a, cplx b) { return std::real(a * std::conj(b)); }

inline double inner_scalar(const Grid& g, std::span<const cplx> u, std::span<const cplx> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += g.weight(i) * pair(u[i], v[i]);
  return acc;
}

struct MassEnergy {
  double mass = 0.0;
  double energy = 0.0;
};

// Q = 1/2 \int |u|^2, E = 1/2 \int |u'|^2 - \int |u|^{p+1}/(p+1).
inline MassEnergy mass_energy(const Params& prm, std::span<const cplx> u, const Grid& g) {
  const auto du = derivative(g, u, 1);
  MassEnergy me;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    me.mass += 0.5 * g.weight(i) * a * a;
    me.energy += g.weight(i) * (0.5 * std::norm(du[i]) - std::pow(a, prm.p + 1.0) / (prm.p + 1.0));
  }
  return me;
}

inline MassEnergy mass_energy(const Params& prm, const Field2& u) {
  const auto s = to_scalar(u);
  return mass_energy(prm, s, u.grid);
}

// Pointwise f(u) = |u|^{p-1}u and its first two derivatives. At u = 0 every
// derivative is set to zero (the limit for p > 3; a convention below).
namespace nl {

inline cplx f(double p, cplx u) {
  const double a = std::abs(u);
  return a == 0.0 ? cplx{} : std::pow(a, p - 1.0) * u;
}

inline cplx df(double p, cplx u, cplx X) {
  const double a = std::abs(u);
  if (a == 0.0) return {};
  return std::pow(a, p - 1.0) * X + (p - 1.0) * std::pow(a, p - 3.0) * u * pair(u, X);
}

// D^2 f(u) X^2.
inline cplx d2f(double p, cplx u, cplx X) {
  const double a = std::abs(u);
  if (a == 0.0) return {};
  const double ux = pair(u, X);
  return 2.0 * (p - 1.0) * std::pow(a, p - 3.0) * X * ux +
         (p - 1.0) * std::pow(a, p - 3.0) * u * std::norm(X) +
         (p - 1.0) * (p - 3.0) * std::pow(a, p - 5.0) * u * ux * ux;
}

// D^2 f(u)XY by polarization of the diagonal form.
inline cplx d2f(double p, cplx u, cplx X, cplx Y) {
  return 0.25 * (d2f(p, u, X + Y) - d2f(p, u, X - Y));
}

}  // namespace nl

// order 0: f(u); order 1: Df(u)X; order 2: D^2f(u)XY (Y defaults to X).
inline std::vector<cplx> nonlinearity(const Params& prm, std::span<const cplx> u, int order,
                                      std::span<const cplx> X = {}, std::span<const cplx> Y = {}) {
  if (order < 0 || order > 2) throw std::invalid_argument("nonlinearity order must be 0, 1 or 2");
  if (order >= 1 && X.size() != u.size()) throw std::invalid_argument("direction size mismatch");
  if (order == 2 && !Y.empty() && Y.size() != u.size())
    throw std::invalid_argument("direction size mismatch");
  std::vector<cplx> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    switch (order) {
      case 0: out[i] = nl::f(prm.p, u[i]); break;
      case 1: out[i] = nl::df(prm.p, u[i], X[i]); break;
      default: out[i] = Y.empty() ? nl::d2f(prm.p, u[i], X[i]) : nl::d2f(prm.p, u[i], X[i], Y[i]);
    }
  }
  return out;
}

inline Field2 nonlinearity(const Params& prm, const Field2& u, int order, const Field2* X = nullptr,
                           const Field2* Y = nullptr) {
  const auto us = to_scalar(u);
  std::vector<cplx> xs, ys;
  if (X) xs = to_scalar(*X);
  if (Y) ys = to_scalar(*Y);
  return from_scalar(u.grid, nonlinearity(prm, us, order, xs, ys));
}

// ---------------------------------------------------------------------------
// Internal mode transported to frequency omega and to an arbitrary grid:
// xi_omega(x) = omega^{1/4} xi(sqrt(omega) x), which preserves the
// symplectic normalization. Components are real: xi1 and Im xi2.
struct ModeSamples {
  std::vector<double> xi1, xi2;     // xi_1 and Im xi_2
  std::vector<double> dxi1, dxi2;   // their omega-derivatives
};

inline ModeSamples mode_on_grid(const InternalMode& mode, double omega, const Grid& g) {
  if (!mode.has_xi) throw std::invalid_argument("internal mode carries no eigenfunction");
  const double s = std::sqrt(omega / mode.params.omega);
  const double amp = std::pow(omega / mode.params.omega, 0.25);
  const Field2 r = resample(mode.xi, g, s, amp);
  ModeSamples m;
  m.xi1.resize(g.size());
  m.xi2.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m.xi1[i] = r.v1[i].real();
    m.xi2[i] = r.v2[i].imag();
  }
  const auto d1 = derivative(g, m.xi1, 1);
  const auto d2 = derivative(g, m.xi2, 1);
  m.dxi1.resize(g.size());
  m.dxi2.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.x(i);
    m.dxi1[i] = m.xi1[i] / (4.0 * omega) + x * d1[i] / (2.0 * omega);
    m.dxi2[i] = m.xi2[i] / (4.0 * omega) + x * d2[i] / (2.0 * omega);
  }
  return m;
}

// Complex scalars of phi[omega, z] = phi_omega + z xi + conj(z xi) and of its
// tangent directions d/d omega, d/d z1, d/d z2.
struct ProfileFrame {
  std::vector<cplx> phi, d_omega, d_z1, d_z2;
};

inline ProfileFrame profile_frame(const Params& prm, cplx z, const ModeSamples& m, const Grid& g) {
  ProfileFrame fr;
  const std::size_t n = g.size();
  fr.phi.resize(n);
  fr.d_omega.resize(n);
  fr.d_z1.resize(n);
  fr.d_z2.resize(n);
  const double z1 = z.real(), z2 = z.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g.x(i);
    fr.phi[i] = soliton_value(prm, x) + 2.0 * z1 * m.xi1[i] - 2.0 * I * z2 * m.xi2[i];
    fr.d_omega[i] = soliton_domega(prm, x) + 2.0 * z1 * m.dxi1[i] - 2.0 * I * z2 * m.dxi2[i];
    fr.d_z1[i] = 2.0 * m.xi1[i];
    fr.d_z2[i] = -2.0 * I * m.xi2[i];
  }
  return fr;
}

// Weight parameter of the exponentially weighted residual norm.
inline double residual_kappa(double p) { return std::min(0.2, (p - 1.0) / 4.0); }

struct RefinedProfile {
  Params params;
  cplx z{};
  Field2 phi;                        // phi[omega, z] in real-pair form
  double theta_R = 0.0, omega_R = 0.0;
  cplx z_R{};
  Field2 residual;                   // R[omega, z] in real-pair form
  Field2 residual_hat;               // f(phi + tilde) - f(phi) - Df(phi) tilde
  double residual_weighted_norm = 0.0;
  std::array<double, 16> A{};        // row-major 4x4 system matrix
  double condition = 0.0;
  std::array<double, 4> orthogonality{};  // relative, rows (i phi, d_omega, d_z1, d_z2)
  double correction_constant = 0.0; // (|theta_R| + |omega_R| + |z_R|) / |z|^2
};

// Corrections follow the sign convention of the system
//   R = Rhat + theta_R phi - i omega_R d_omega phi - i D_z phi z_R,
// whose z = 0 matrix is diag(q'(omega) J^{-1}, <J D_zi, D_zj>).
inline RefinedProfile refined_profile(const Params& prm, cplx z, const InternalMode& mode,
                                      const Grid& g) {
  RefinedProfile out;
  out.params = prm;
  out.z = z;
  const ModeSamples m = mode_on_grid(mode, prm.omega, g);
  const ProfileFrame fr = profile_frame(prm, z, m, g);
  const std::size_t n = g.size();

  std::vector<cplx> rhat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = soliton_value(prm, g.x(i));
    const cplx tilde = fr.phi[i] - ph;
    rhat[i] = nl::f(prm.p, fr.phi[i]) - nl::f(prm.p, ph) - nl::df(prm.p, ph, tilde);
  }

  std::array<std::vector<cplx>, 4> rows;
  std::array<std::vector<cplx>, 4> cols;
  rows[0].resize(n);
  for (std::size_t i = 0; i < n; ++i) rows[0][i] = I * fr.phi[i];
  rows[1] = fr.d_omega;
  rows[2] = fr.d_z1;
  rows[3] = fr.d_z2;
  cols[0] = fr.phi;
  for (int c = 1; c < 4; ++c) {
    cols[static_cast<std::size_t>(c)].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      cols[static_cast<std::size_t>(c)][i] = -I * rows[static_cast<std::size_t>(c)][i];
  }

  Eigen::Matrix4d A;
  Eigen::Vector4d b;
  for (int r = 0; r < 4; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    b(r) = -inner_scalar(g, rhat, row);
    for (int c = 0; c < 4; ++c) A(r, c) = inner_scalar(g, cols[static_cast<std::size_t>(c)], row);
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out.A[static_cast<std::size_t>(4 * r + c)] = A(r, c);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(A);
  const auto sv = svd.singularValues();
  out.condition = sv(3) > 0.0 ? sv(0) / sv(3) : INFINITY;
  if (out.condition > 1e8)
    throw NumericalError(NumericalError::Kind::ill_conditioned,
                         "refined profile: correction system ill-conditioned (|z| too large)");
  const Eigen::Vector4d sol = A.partialPivLu().solve(b);
  out.theta_R = sol(0);
  out.omega_R = sol(1);
  out.z_R = cplx{sol(2), sol(3)};

  std::vector<cplx> R(n);
  for (std::size_t i = 0; i < n; ++i) {
    R[i] = rhat[i];
    for (int c = 0; c < 4; ++c) R[i] += sol(c) * cols[static_cast<std::size_t>(c)][i];
  }
  const double rn = std::sqrt(inner_scalar(g, R, R));
  for (int r = 0; r < 4; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    const double denom = rn * std::sqrt(inner_scalar(g, row, row));
    out.orthogonality[static_cast<std::size_t>(r)] =
        denom > 0.0 ? std::abs(inner_scalar(g, R, row)) / denom : 0.0;
  }
  const double kap = residual_kappa(prm.p);
  double wn = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    wn += g.weight(i) * std::norm(std::cosh(kap * prm.omega * g.x(i)) * R[i]);
  out.residual_weighted_norm = std::sqrt(wn);
  out.phi = from_scalar(g, fr.phi);
  out.residual = from_scalar(g, R);
  out.residual_hat = from_scalar(g, rhat);
  const double z2 = std::norm(z);
  out.correction_constant =
      z2 > 0.0 ? (std::abs(out.theta_R) + std::abs(out.omega_R) + std::abs(out.z_R)) / z2 : 0.0;
  return out;
}

}  // namespace solitonlab
