#pragma once

// The internal mode (i lambda, xi) of the linearization at omega = 1, found
// either as a zero of the even-sector Evans function or through the
// Birman-Schwinger fixed point for alpha = sqrt(1 - lambda) near p = 3, where
// the Darboux-conjugated problem is a small perturbation of the free one:
//   (H_alpha + (p-3) P_p) Z = 0,  w = U Z,  xi_1 = (S_1^*)^2 w_1,
//   Im xi_2 = L_+ xi_1 / lambda.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jost.hpp"
#include "linearization.hpp"
#include "numerics.hpp"
#include "profile.hpp"
#include "types.hpp"

namespace solitonlab {

// ---------------------------------------------------------------------------
// Matrices of the Birman-Schwinger problem.

// P_p = phi^{p-1} / (2(p+1)) [[3-p, p-1], [p-1, 3-p]], at omega = 1.
inline Eigen::Matrix2d bs_P(double p, double x) {
  const double c = potential_weight(Params(p), x) / (2.0 * (p + 1.0));
  Eigen::Matrix2d M;
  M << 3.0 - p, p - 1.0, p - 1.0, 3.0 - p;
  return c * M;
}

// |P_p|^{1/2} = phi^{(p-1)/2} / (2 sqrt(p+1)) [[1+r, 1-r], [1-r, 1+r]], r = sqrt(|p-2|).
inline Eigen::Matrix2d bs_P_abs_sqrt(double p, double x) {
  const double c = std::sqrt(potential_weight(Params(p), x)) / (2.0 * std::sqrt(p + 1.0));
  const double r = std::sqrt(std::abs(p - 2.0));
  Eigen::Matrix2d M;
  M << 1.0 + r, 1.0 - r, 1.0 - r, 1.0 + r;
  return c * M;
}

// P_p^{1/2} = sigma_1 |P_p|^{1/2} (p > 2, where P_p is indefinite).
inline Eigen::Matrix2d bs_P_sqrt(double p, double x) {
  Eigen::Matrix2d s1;
  s1 << 0.0, 1.0, 1.0, 0.0;
  return p > 2.0 ? (s1 * bs_P_abs_sqrt(p, x)).eval() : bs_P_abs_sqrt(p, x);
}

// Diagonal of the kernel of H_alpha^{-1}:
// (e^{-kappa d} / (2 kappa), (e^{-alpha d} - 1) / (2 alpha)), kappa = sqrt(2 - alpha^2).
inline std::array<double, 2> bs_kernel(double alpha, double d) {
  d = std::abs(d);
  const double kappa = std::sqrt(2.0 - alpha * alpha);
  const double second = alpha == 0.0 ? -0.5 * d : std::expm1(-alpha * d) / (2.0 * alpha);
  return {std::exp(-kappa * d) / (2.0 * kappa), second};
}

struct BirmanSchwingerOptions {
  double half_width = 40.0;
  int n = 2048;
  double tolerance = 1e-10;
  int max_iterations = 200;
};

// Nystrom discretization of Z = e2 - (p-3) N_alpha P_p Z on the nodes where
// P_p is not negligible. Trapezoid weights carry an Euler-Maclaurin
// correction at the corner x = y of both kernels.
class BirmanSchwinger {
 public:
  BirmanSchwinger(double p, const BirmanSchwingerOptions& o = {}) : p_(p), grid_(make_grid(o.half_width, o.n)) {
    const double xs = std::min(o.half_width, 30.0 / (p - 1.0));
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (std::abs(grid_.x(i)) <= xs) nodes_.push_back(grid_.x(i));
    P_.reserve(nodes_.size());
    for (double x : nodes_) P_.push_back(bs_P(p, x));
  }

  [[nodiscard]] double p() const { return p_; }
  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] std::size_t support_size() const { return nodes_.size(); }

  // Solves for Z on the support nodes; returns s = int (P Z)_2.
  double solve(double alpha) {
    const auto M = static_cast<Eigen::Index>(nodes_.size());
    const double h = grid_.dx(), eps = p_ - 3.0;
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2 * M, 2 * M);
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j) {
        const auto Nk = bs_kernel(alpha, nodes_[static_cast<std::size_t>(i)] - nodes_[static_cast<std::size_t>(j)]);
        const Eigen::Matrix2d& P = P_[static_cast<std::size_t>(j)];
        for (int a = 0; a < 2; ++a) {
          const double c = h * Nk[static_cast<std::size_t>(a)] - (i == j ? h * h / 12.0 : 0.0);
          A(a * M + i, j) += eps * c * P(a, 0);
          A(a * M + i, M + j) += eps * c * P(a, 1);
        }
      }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * M);
    b.tail(M).setOnes();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (!(lu.rcond() > 1e-14))
      throw NumericalError(NumericalError::Kind::singular_assembly, "birman-schwinger: singular system");
    z_ = lu.solve(b);
    alpha_ = alpha;
    double s = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
      const Eigen::Matrix2d& P = P_[static_cast<std::size_t>(j)];
      s += h * (P(1, 0) * z_(j) + P(1, 1) * z_(M + j));
    }
    return s;
  }

  // Z at x from the last solve; exact node values when x is a lattice point of
  // the grid (corner-corrected), plain trapezoid otherwise.
  [[nodiscard]] Eigen::Vector2d Z(double x) const {
    const auto M = static_cast<Eigen::Index>(nodes_.size());
    const double h = grid_.dx(), eps = p_ - 3.0;
    Eigen::Vector2d out(0.0, 1.0);
    for (Eigen::Index j = 0; j < M; ++j) {
      const double d = x - nodes_[static_cast<std::size_t>(j)];
      const auto Nk = bs_kernel(alpha_, d);
      const Eigen::Vector2d F = P_[static_cast<std::size_t>(j)] * Eigen::Vector2d(z_(j), z_(M + j));
      const double corner = std::abs(d) < 1e-9 * h ? h * h / 12.0 : 0.0;
      out(0) -= eps * (h * Nk[0] - corner) * F(0);
      out(1) -= eps * (h * Nk[1] - corner) * F(1);
    }
    return out;
  }

  // Z sampled on the grid lattice extended symmetrically to cover |x| <= reach.
  [[nodiscard]] std::pair<Grid, std::vector<Eigen::Vector2d>> Z_lattice(double reach) const {
    const double h = grid_.dx();
    const int extra = std::max(0, static_cast<int>(std::ceil((reach - grid_.half_width()) / h)) + 4);
    const Grid g(grid_.half_width() + extra * h, grid_.n() + 2 * extra, GridKind::collocation);
    std::vector<Eigen::Vector2d> z(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) z[i] = Z(g.x(i));
    return {g, z};
  }

 private:
  double p_;
  Grid grid_;
  std::vector<double> nodes_;
  std::vector<Eigen::Matrix2d> P_;
  Eigen::VectorXd z_;
  double alpha_ = 0.0;
};

struct AlphaResult {
  double alpha = 0.0;
  double lambda = 1.0;
  int iterations = 0;
  double s = 0.0;
};

inline void require_bs_range(double p) {
  if (!(std::abs(p - 3.0) <= 0.3 + 1e-12))
    throw NumericalError(NumericalError::Kind::out_of_range, "birman-schwinger route needs |p - 3| <= 0.3");
}

// alpha_{n+1} = -((p-3)/2) s(p, alpha_n) from alpha_0 = 0.
inline AlphaResult alpha_fixed_point(double p, const BirmanSchwingerOptions& o = {},
                                     BirmanSchwinger* keep = nullptr) {
  require_bs_range(p);
  AlphaResult r;
  if (p == 3.0) return r;
  BirmanSchwinger local(p, o);
  BirmanSchwinger& bs = keep ? *keep : local;
  double alpha = 0.0;
  for (int it = 1; it <= o.max_iterations; ++it) {
    const double s = bs.solve(alpha);
    const double next = -0.5 * (p - 3.0) * s;
    if (!(next > 0.0) || !(next < 1.0))
      throw NumericalError(NumericalError::Kind::no_convergence, "alpha iteration left (0, 1)");
    const bool done = std::abs(next - alpha) <= o.tolerance;
    alpha = next;
    r.s = s;
    r.iterations = it;
    if (done) {
      if (keep) bs.solve(alpha);
      r.alpha = alpha;
      r.lambda = 1.0 - alpha * alpha;
      return r;
    }
  }
  throw NumericalError(NumericalError::Kind::no_convergence, "alpha iteration did not converge");
}

// ---------------------------------------------------------------------------
// Evans route.

struct EvansOptions {
  double eps_gap = default_gap_margin;
  double alpha_max = 0.9995;
  int scan_points = 90;
};

inline void require_evans_range(double p) {
  if (!(std::abs(p - 3.0) >= 0.05 - 1e-12))
    throw NumericalError(NumericalError::Kind::out_of_range, "evans route needs |p - 3| >= 0.05");
}

// Root of the even Evans function closest to the threshold, as alpha (omega = 1 units).
inline double evans_alpha(const Params& prm, const EvansOptions& o = {}) {
  const double amin = std::sqrt(o.eps_gap) * 1.0001;
  auto f = [&](double a) { return std::real(evans_gap(prm, prm.omega * (1.0 - a * a), o.eps_gap)); };
  const double ratio = std::pow(o.alpha_max / amin, 1.0 / (o.scan_points - 1));
  double a0 = amin, f0 = f(a0);
  for (int i = 1; i < o.scan_points; ++i) {
    const double a1 = amin * std::pow(ratio, i), f1 = f(a1);
    if (f0 == 0.0) return a0;
    if (f0 * f1 < 0.0) {
      double lo = a0, hi = a1, flo = f0;
      while (hi - lo > 1e-14 * hi) {
        const double mid = 0.5 * (lo + hi), fm = f(mid);
        if (fm * flo <= 0.0) hi = mid; else { lo = mid; flo = fm; }
      }
      return 0.5 * (lo + hi);
    }
    a0 = a1;
    f0 = f1;
  }
  throw NumericalError(NumericalError::Kind::no_convergence, "evans: no root in the scanned bracket");
}

// lambda(p, omega) = omega lambda(p, 1). Birman-Schwinger works at omega = 1
// and is rescaled; Evans integrates at the given omega.
inline InternalMode find_lambda(const Params& prm, ModeMethod method, const BirmanSchwingerOptions& bo = {},
                                const EvansOptions& eo = {}) {
  InternalMode m;
  m.params = prm;
  m.method = method;
  if (method == ModeMethod::birman_schwinger) {
    const AlphaResult r = alpha_fixed_point(prm.p, bo);
    m.alpha = r.alpha;
    m.lambda = prm.omega * r.lambda;
    m.iterations = r.iterations;
  } else {
    require_evans_range(prm.p);
    const double a = evans_alpha(prm, eo);
    m.alpha = a;
    m.lambda = prm.omega * (1.0 - a * a);
  }
  return m;
}

// ---------------------------------------------------------------------------
// T = (e^{-sqrt2 |.|}/2) * phi_3^2 and the first-order correction R_1.

inline std::vector<double> convolution_T(const Grid& g) {
  const double h = g.dx(), r2 = std::sqrt(2.0);
  std::vector<double> f(g.size()), T(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) f[j] = soliton_power(Params(3.0), g.x(j), 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) acc += std::exp(-r2 * std::abs(g.x(i) - g.x(j))) * f[j];
    // trapezoid plus corner correction (jump of the kernel slope is -sqrt2)
    T[i] = 0.5 * h * acc - h * h * r2 / 12.0 * f[i];
  }
  return T;
}

inline double phi3sq_T(const Grid& g) {
  const auto T = convolution_T(g);
  std::vector<double> prod(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) prod[i] = soliton_power(Params(3.0), g.x(i), 2.0) * T[i];
  return trapz(g, prod);
}

// R_1 = -x phi_3 phi_3' - (3 - phi_3^2) T / (4 sqrt2) - phi_3' T' / (2 sqrt2 phi_3).
inline std::vector<double> expansion_R1(const Grid& g) {
  const auto T = convolution_T(g);
  const auto dT = derivative(g, T, 1);
  const Params p3(3.0);
  const double r2 = std::sqrt(2.0);
  std::vector<double> R(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.x(i), ph = soliton_value(p3, x), dph = soliton_prime(p3, x);
    R[i] = -x * ph * dph - (3.0 - ph * ph) * T[i] / (4.0 * r2) + std::tanh(x) * dT[i] / (2.0 * r2);
  }
  return R;
}

// ---------------------------------------------------------------------------
// Eigenfunction.

namespace detail {

// int xi_1 Im xi_2 over R: trapezoid on the grid plus the e^{-2 alpha |x|}
// tails beyond it.
inline double symplectic_pairing(const Field2& xi, double alpha) {
  const Grid& g = xi.grid;
  std::vector<double> prod(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) prod[i] = xi.v1[i].real() * xi.v2[i].imag();
  double s = trapz(g, prod);
  if (alpha > 0.0) s += (prod.front() + prod.back()) / (2.0 * alpha);
  return s;
}

inline void finish_mode(InternalMode& m, Field2 xi, XiNormalization tag) {
  double reality = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    reality = std::max({reality, std::abs(xi.v1[i].imag()), std::abs(xi.v2[i].real())});
    scale = std::max({scale, std::abs(xi.v1[i]), std::abs(xi.v2[i])});
    xi.v1[i] = xi.v1[i].real();
    xi.v2[i] = cplx{0.0, xi.v2[i].imag()};
  }
  m.reality_residual = scale > 0.0 ? reality / scale : 0.0;
  if (tag == XiNormalization::symplectic) {
    // alpha is kept in omega = 1 units; the decay rate at omega is sqrt(omega) alpha.
    if (!(m.alpha > 0.0))
      throw NumericalError(NumericalError::Kind::out_of_range, "symplectic normalization needs lambda < omega");
    const double s = symplectic_pairing(xi, std::sqrt(m.params.omega) * m.alpha);
    xi *= cplx{std::sqrt(0.5 / std::abs(s)) * (s < 0 ? -1.0 : 1.0), 0.0};
  }
  const auto L = build_operator(m.params, OperatorKind::matrix_L, xi.grid);
  m.eigen_residual = relative_residual(L.apply(xi), cplx{0.0, m.lambda} * xi, 16);
  m.xi = std::move(xi);
  m.has_xi = true;
  m.normalization = tag;
}

}  // namespace detail

// Darboux eigenfunction at omega = 1 straight from the Birman-Schwinger
// solution on its own lattice (finite differences, no interpolation). Used as
// the reference for the Darboux scale; derivatives stack up, so the shape
// itself is taken from the shooting solution below.
inline Field2 darboux_reference(double p, double alpha, const BirmanSchwingerOptions& o = {}) {
  const Params prm(p);
  BirmanSchwinger bs(p, o);
  const Grid& g = bs.grid();
  Field2 w(g);
  if (p == 3.0) {
    for (auto& v : w.v1) v = 1.0;
  } else {
    bs.solve(alpha);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto z = bs.Z(g.x(i));
      w.v1[i] = z(0) + z(1);
    }
  }
  const auto Ss = build_operator(prm, OperatorKind::S1_adjoint, g);
  const auto Lp = build_operator(prm, OperatorKind::L_plus, g);
  auto xi1 = Ss.apply_scalar(Ss.apply_scalar(w.v1));
  auto xi2 = Lp.apply_scalar(xi1);
  const double lam = 1.0 - alpha * alpha;
  for (auto& v : xi2) v = cplx{0.0, v.real() / lam};
  return Field2(g, std::move(xi1), std::move(xi2));
}

// Even eigenfunction of H at E = lam (omega = prm.omega) from the decaying frame,
// mapped to xi = U v; sampled on g.
inline Field2 xi_evans(const Params& prm, double lam, const Grid& g, double eps_gap = default_gap_margin) {
  const double h = 0.01;
  const DecayingFrame fr = decaying_frame(prm, lam, h, 0.0, eps_gap);
  const auto& B = fr.frame.back();
  // Combination with u'(0) = 0.
  Eigen::Vector2d c;
  const double r0 = std::hypot(B[0][2].real(), B[1][2].real()), r1 = std::hypot(B[0][3].real(), B[1][3].real());
  if (r0 >= r1) c << -B[1][2].real(), B[0][2].real(); else c << -B[1][3].real(), B[0][3].real();
  c.normalize();
  const int S = static_cast<int>(fr.R.size());
  std::vector<Eigen::Vector2d> d(static_cast<std::size_t>(S + 1));
  d[static_cast<std::size_t>(S)] = c;
  for (int s = S - 1; s >= 0; --s)
    d[static_cast<std::size_t>(s)] =
        fr.R[static_cast<std::size_t>(s)].triangularView<Eigen::Upper>().solve(d[static_cast<std::size_t>(s + 1)]);
  // Samples of v on [0, X0] ascending.
  JostSolution v;
  v.params = prm;
  v.energy = lam;
  v.h = h;
  const std::size_t n = fr.xs.size();
  std::vector<JState> half(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& F = fr.frame[i];
    const auto& di = d[static_cast<std::size_t>(fr.segment[i])];
    for (int q = 0; q < 4; ++q) half[n - 1 - i][q] = di(0) * F[0][q] + di(1) * F[1][q];
  }
  v.X_max = fr.X0;
  v.X0 = fr.X0;
  v.states.resize(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    v.states[n - 1 + i] = half[i];
    v.states[n - 1 - i] = reflect(half[i]);
  }
  const double alpha = std::sqrt(prm.omega - lam), kappa = std::sqrt(prm.omega + lam);
  const JState edge = half.back();
  Field2 xi(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.x(i), ax = std::abs(x);
    std::array<cplx, 2> u;
    if (ax <= fr.X0) {
      u = v.value(x);
    } else {
      u = {edge[0] * std::exp(-alpha * (ax - fr.X0)), edge[1] * std::exp(-kappa * (ax - fr.X0))};
    }
    xi.v1[i] = u[0] + u[1];
    xi.v2[i] = I * (u[0] - u[1]);
  }
  return xi;
}

namespace detail {

inline Field2 xi_p3(const Grid& g) {
  Field2 xi(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    xi.v1[i] = 1.0 - soliton_power(Params(3.0), g.x(i), 2.0);
    xi.v2[i] = I;
  }
  return xi;
}

// Shape at omega = 1 by shooting at lambda = 1 - alpha^2; sign fixed by
// Im xi_2(0) > 0.
inline Field2 xi_shape(double p, double alpha, const Grid& g) {
  if (p == 3.0 || alpha == 0.0) return xi_p3(g);
  Field2 xi = xi_evans(Params(p), 1.0 - alpha * alpha, g, 0.5 * alpha * alpha);
  const double c = interpolate(g, xi.v2, 0.0).imag();
  if (c < 0.0) xi *= cplx{-1.0, 0.0};
  return xi;
}

// Least-squares factor taking the shooting shape to the Darboux reference on |x| <= 10.
inline double darboux_scale(double p, double alpha, const BirmanSchwingerOptions& o) {
  if (p == 3.0 || alpha == 0.0) return 1.0;
  const Field2 ref = darboux_reference(p, alpha, o);
  const Field2 sh = xi_shape(p, alpha, ref.grid);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (std::abs(ref.grid.x(i)) > 10.0) continue;
    num += ref.v1[i].real() * sh.v1[i].real();
    den += sh.v1[i].real() * sh.v1[i].real();
  }
  return num / den;
}

}  // namespace detail

// Darboux-normalized eigenfunction at omega = 1 on g.
inline Field2 xi_darboux(double p, double alpha, const Grid& g, const BirmanSchwingerOptions& o = {}) {
  Field2 xi = detail::xi_shape(p, alpha, g);
  xi *= cplx{detail::darboux_scale(p, alpha, o), 0.0};
  return xi;
}

// Populates xi on the collocation grid g. The Darboux tag is the
// normalization Z -> e2 of the Birman-Schwinger route (xi_3 = (1 - phi_3^2, i)
// at p = 3, needs |p - 3| <= 0.3); the symplectic tag rescales to
// int xi_1 Im xi_2 = 1/2. Computed at omega = 1 and carried to omega by
// xi(x) -> omega^{1/4} xi(sqrt(omega) x).
inline InternalMode xi_build(InternalMode m, const Grid& g, XiNormalization tag = XiNormalization::darboux,
                             const BirmanSchwingerOptions& o = {}) {
  if (g.kind() != GridKind::collocation) throw std::invalid_argument("xi_build needs a collocation grid");
  const double w = m.params.omega, sw = std::sqrt(w);
  const Grid g1(g.half_width() * sw, g.n(), GridKind::collocation);
  Field2 x1;
  if (tag == XiNormalization::darboux) {
    require_bs_range(m.params.p);
    x1 = xi_darboux(m.params.p, m.alpha, g1, o);
  } else {
    x1 = detail::xi_shape(m.params.p, m.alpha, g1);
  }
  Field2 xi(g, x1.v1, x1.v2);
  xi *= cplx{std::pow(w, 0.25), 0.0};
  detail::finish_mode(m, std::move(xi), tag);
  return m;
}

}  // namespace solitonlab
