#pragma once

// Split-step evolution of i u_t + u_xx = -|u|^{p-1} u on a periodic grid,
// modulation u = e^{i theta}(phi[omega, z] + eta), and trajectory diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgr.hpp"
#include "internal_mode.hpp"
#include "numerics.hpp"
#include "profile.hpp"
#include "types.hpp"

namespace solitonlab {

enum class PerturbationDirection { internal_mode, random_even, custom };

inline std::string to_string(PerturbationDirection d) {
  switch (d) {
    case PerturbationDirection::internal_mode: return "internal_mode";
    case PerturbationDirection::random_even: return "random_even";
    default: return "custom";
  }
}

inline PerturbationDirection perturbation_direction_from_string(const std::string& s) {
  if (s == "internal_mode") return PerturbationDirection::internal_mode;
  if (s == "random_even") return PerturbationDirection::random_even;
  if (s == "custom") return PerturbationDirection::custom;
  throw std::invalid_argument("unknown perturbation direction: " + s);
}

struct SimConfig {
  Params params{2.9, 1.0};  // omega here is omega_0
  double half_width = 60.0;
  int n = 8192;
  double dt = 1e-3;
  double T_final = 200.0;
  int stride = 100;          // steps between outputs
  double A = 27.0, B = 3.0;  // A ~ B^3
  double kappa = 0.0;        // 0 selects residual_kappa(p)
  double a = 0.2;            // e^{-a<x>} weight
  double delta = 0.05;
  PerturbationDirection direction = PerturbationDirection::internal_mode;
  std::vector<cplx> custom_direction;  // used when direction == custom
  unsigned long seed = 1;
  bool diagnostics = true;

  [[nodiscard]] Grid grid() const { return Grid(half_width, n, GridKind::periodic); }
  [[nodiscard]] double kappa_value() const { return kappa > 0.0 ? kappa : residual_kappa(params.p); }
  [[nodiscard]] long total_steps() const { return std::lround(T_final / dt); }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(T_final > 0.0)) throw std::invalid_argument("T_final must be positive");
    if (stride < 1) throw std::invalid_argument("stride must be at least 1");
    if (n % 2 != 0) throw std::invalid_argument("n must be even");
    if (diagnostics && !(A >= B * B && B * B >= B && B >= 1.0))
      throw std::invalid_argument("diagnostic constants need A >= B^2 >= B >= 1");
    if (!(a > 0.0)) throw std::invalid_argument("weight exponent a must be positive");
    if (direction == PerturbationDirection::custom && custom_direction.size() != static_cast<std::size_t>(n))
      throw std::invalid_argument("custom direction must have n samples");
  }
};

// ---------------------------------------------------------------------------
// Split-step integrator.

class SplitStep {
 public:
  SplitStep(const Params& prm, const Grid& g, double dt) : prm_(prm), dt_(dt), plan_(g.size()) {
    if (g.kind() != GridKind::periodic) throw std::invalid_argument("split-step needs a periodic grid");
    const auto k = wavenumbers(g);
    lin_.resize(g.size());
    const double inv_n = 1.0 / static_cast<double>(g.size());
    for (std::size_t j = 0; j < k.size(); ++j) lin_[j] = std::polar(inv_n, -dt * k[j] * k[j]);
  }

  // u <- u exp(i h |u|^{p-1})
  void nonlinear(std::span<cplx> u, double h) const {
    const double e = 0.5 * (prm_.p - 1.0);
    for (auto& v : u) {
      const double a2 = std::norm(v);
      if (a2 > 0.0) {
        const double ph = h * std::exp(e * std::log(a2));
        v *= cplx{std::cos(ph), std::sin(ph)};
      }
    }
  }

  void linear(std::span<cplx> u) {
    auto buf = plan_.data();
    std::copy(u.begin(), u.end(), buf.begin());
    plan_.forward();
    for (std::size_t j = 0; j < buf.size(); ++j) buf[j] *= lin_[j];
    plan_.backward();
    std::copy(buf.begin(), buf.end(), u.begin());
  }

  void step(std::span<cplx> u) { steps(u, 1); }

  // m Strang steps. |u| is invariant under the phase rotation, so adjacent
  // half steps merge exactly into one full step.
  void steps(std::span<cplx> u, long m) {
    if (m <= 0) return;
    nonlinear(u, 0.5 * dt_);
    for (long j = 0; j < m; ++j) {
      linear(u);
      nonlinear(u, j + 1 == m ? 0.5 * dt_ : dt_);
    }
  }

 private:
  Params prm_;
  double dt_;
  FftPlan plan_;
  std::vector<cplx> lin_;
};

inline double sup_abs(std::span<const cplx> u) {
  double m = 0.0;
  for (const auto& v : u) m = std::max(m, std::abs(v));
  return m;
}

inline double even_defect(const Grid& g, std::span<const cplx> u) {
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d = std::max(d, std::abs(u[i] - u[g.mirror(i)]));
  return d;
}

struct Snapshot {
  double t = 0.0;
  double mass = 0.0, energy = 0.0;
  double sup = 0.0;
};

struct EvolveResult {
  std::vector<cplx> u;  // field at t_final
  double t_final = 0.0;
  long steps = 0;
  std::vector<Snapshot> samples;  // every output step, t = 0 included
  double max_mass_drift = 0.0;    // relative
  double max_energy_drift = 0.0;  // relative
};

using StepObserver = std::function<void(double t, std::span<const cplx> u)>;

// Strang splitting with output every cfg.stride steps. The observer sees the
// field at t = 0 and at every output.
inline EvolveResult evolve(const SimConfig& cfg, std::span<const cplx> u0, const StepObserver& observe = {}) {
  cfg.validate();
  const Grid g = cfg.grid();
  if (u0.size() != g.size()) throw std::invalid_argument("initial datum does not match grid");
  const double s0 = sup_abs(u0);
  if (even_defect(g, u0) > 1e-8 * std::max(s0, 1e-300)) throw std::invalid_argument("initial datum must be even");

  EvolveResult r;
  r.u.assign(u0.begin(), u0.end());
  SplitStep stepper(cfg.params, g, cfg.dt);
  const MassEnergy me0 = mass_energy(cfg.params, r.u, g);
  const double escale = std::max(std::abs(me0.energy), 1e-300);

  auto record = [&](double t) {
    const MassEnergy me = mass_energy(cfg.params, r.u, g);
    Snapshot s{t, me.mass, me.energy, sup_abs(r.u)};
    r.max_mass_drift = std::max(r.max_mass_drift, std::abs(me.mass - me0.mass) / me0.mass);
    r.max_energy_drift = std::max(r.max_energy_drift, std::abs(me.energy - me0.energy) / escale);
    r.samples.push_back(s);
    if (s.sup > 2.0 * s0 || !std::isfinite(s.sup))
      throw NumericalError(NumericalError::Kind::blow_up,
                           "evolve: sup norm doubled at t = " + std::to_string(t) + " (" + std::to_string(s.sup) +
                               " vs " + std::to_string(s0) + ")");
    if (observe) observe(t, r.u);
  };

  record(0.0);
  const long N = cfg.total_steps();
  for (long s = 0; s < N;) {
    const long m = std::min<long>(cfg.stride, N - s);
    stepper.steps(r.u, m);
    s += m;
    record(static_cast<double>(s) * cfg.dt);
  }
  r.steps = N;
  r.t_final = static_cast<double>(N) * cfg.dt;
  return r;
}

// ---------------------------------------------------------------------------
// Modulation.

struct ModulationState {
  double t = 0.0;
  double theta = 0.0;
  double omega = 1.0;
  cplx z{};
  Field2 eta;  // complex eta in v1, v2 = 0
  double newton_residual = 0.0;             // max |<eta, T_a>|
  std::array<double, 4> orthogonality{};    // |<eta, T_a>| / (|u| |T_a|), rows (i phi, d_omega, d_z1, d_z2)
  int iterations = 0;
  bool fd_jacobian = false;
};

// Symplectic internal mode at omega = 1 on a collocation grid wide enough to
// cover the simulation domain after the sqrt(omega) rescaling.
inline InternalMode dynamics_mode(double p, double sim_half_width, double dx = 0.02) {
  const double hw = 1.25 * sim_half_width + 10.0;
  int n = static_cast<int>(std::ceil(2.0 * hw / dx)) + 1;
  if (n % 2 == 0) ++n;
  const Params prm(p, 1.0);
  const ModeMethod method = std::abs(p - 3.0) <= 0.3 ? ModeMethod::birman_schwinger : ModeMethod::evans;
  return xi_build(find_lambda(prm, method), make_grid(hw, n), XiNormalization::symplectic);
}

namespace detail {

// Mode samples on a periodic grid. x-derivatives are taken on the source
// collocation grid, where the mode is not periodic.
inline ModeSamples mode_on_periodic(const InternalMode& mode, const std::vector<double>& d1,
                                    const std::vector<double>& d2, double omega, const Grid& g) {
  const Grid& src = mode.xi.grid;
  const double s = std::sqrt(omega / mode.params.omega);
  const double amp = std::pow(omega / mode.params.omega, 0.25);
  if (g.half_width() * s > src.half_width())
    throw NumericalError(NumericalError::Kind::out_of_range, "mode grid too narrow for this omega");
  std::vector<cplx> x1(src.size()), x2(src.size()), dd1(src.size()), dd2(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    x1[i] = mode.xi.v1[i].real();
    x2[i] = mode.xi.v2[i].imag();
    dd1[i] = d1[i];
    dd2[i] = d2[i];
  }
  ModeSamples m;
  const std::size_t n = g.size();
  m.xi1.resize(n);
  m.xi2.resize(n);
  m.dxi1.resize(n);
  m.dxi2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g.x(i), y = s * x;
    const double a1 = amp * interpolate(src, x1, y).real(), a2 = amp * interpolate(src, x2, y).real();
    // d/dx of xi(sqrt(omega) x) is s xi'(y)
    const double b1 = amp * s * interpolate(src, dd1, y).real(), b2 = amp * s * interpolate(src, dd2, y).real();
    m.xi1[i] = a1;
    m.xi2[i] = a2;
    m.dxi1[i] = a1 / (4.0 * omega) + x * b1 / (2.0 * omega);
    m.dxi2[i] = a2 / (4.0 * omega) + x * b2 / (2.0 * omega);
  }
  return m;
}

inline void solve4(const Eigen::Matrix4d& J, const Eigen::Vector4d& F, Eigen::Vector4d& step, double& cond) {
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  cond = sv(3) > 0.0 ? sv(0) / sv(3) : INFINITY;
  step = svd.solve(-F);
}

}  // namespace detail

class Modulator {
 public:
  Modulator(double p, InternalMode mode, const Grid& g) : p_(p), mode_(std::move(mode)), g_(g) {
    if (!mode_.has_xi) throw std::invalid_argument("modulation needs an internal mode with eigenfunction");
    if (g.kind() != GridKind::periodic) throw std::invalid_argument("modulation runs on the periodic grid");
    std::vector<double> a(mode_.xi.size()), b(mode_.xi.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = mode_.xi.v1[i].real();
      b[i] = mode_.xi.v2[i].imag();
    }
    d1_ = derivative(mode_.xi.grid, a, 1);
    d2_ = derivative(mode_.xi.grid, b, 1);
  }

  [[nodiscard]] const Grid& grid() const noexcept { return g_; }
  [[nodiscard]] const InternalMode& mode() const noexcept { return mode_; }

  // whether the stored mode reaches the grid edge after rescaling to omega
  [[nodiscard]] bool covers(double omega) const {
    return g_.half_width() * std::sqrt(omega / mode_.params.omega) <= mode_.xi.grid.half_width();
  }

  [[nodiscard]] ModeSamples samples(double omega) const {
    return detail::mode_on_periodic(mode_, d1_, d2_, omega, g_);
  }

  [[nodiscard]] ProfileFrame frame(double omega, cplx z) const {
    return profile_frame(Params(p_, omega), z, samples(omega), g_);
  }

  // phi[omega, z] in complex scalar form.
  [[nodiscard]] std::vector<cplx> profile(double omega, cplx z) const { return frame(omega, z).phi; }

  // e^{i theta}(phi[omega, z] + eta)
  [[nodiscard]] std::vector<cplx> reconstruct(const ModulationState& s) const {
    auto u = profile(s.omega, s.z);
    const cplx ph = std::polar(1.0, s.theta);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = ph * (u[i] + s.eta.v1[i]);
    return u;
  }

  [[nodiscard]] ModulationState operator()(std::span<const cplx> u, const ModulationState& guess,
                                           double tol = 1e-10, int max_iter = 50) const {
    try {
      return newton(u, guess, tol, max_iter);
    } catch (const NumericalError& e) {
      if (e.kind() == NumericalError::Kind::out_of_range)
        throw NumericalError(NumericalError::Kind::outside_tube, std::string("modulation: ") + e.what());
      throw;
    }
  }

 private:
  [[nodiscard]] ModulationState newton(std::span<const cplx> u, const ModulationState& guess, double tol,
                                       int max_iter) const {
    if (u.size() != g_.size()) throw std::invalid_argument("field does not match modulation grid");
    double theta = guess.theta, omega = guess.omega;
    double z1 = guess.z.real(), z2 = guess.z.imag();
    const std::size_t n = g_.size();
    std::vector<cplx> eta(n), w(n);
    double F0 = -1.0;
    bool fd = false;

    for (int it = 0; it <= max_iter; ++it) {
      const cplx z{z1, z2};
      const ModeSamples ms = samples(omega);
      const ProfileFrame fr = profile_frame(Params(p_, omega), z, ms, g_);
      const cplx rot = std::polar(1.0, -theta);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = rot * u[i];
        eta[i] = w[i] - fr.phi[i];
      }
      std::array<std::vector<cplx>, 4> T;
      T[0].resize(n);
      for (std::size_t i = 0; i < n; ++i) T[0][i] = I * fr.phi[i];
      T[1] = fr.d_omega;
      T[2] = fr.d_z1;
      T[3] = fr.d_z2;
      Eigen::Vector4d F;
      for (int a = 0; a < 4; ++a) F(a) = inner_scalar(g_, eta, T[static_cast<std::size_t>(a)]);
      const double fmax = F.cwiseAbs().maxCoeff();
      if (F0 < 0.0) F0 = std::max(fmax, 1e-300);
      if (!std::isfinite(fmax) || fmax > 1e6 * std::max(F0, 1.0))
        throw NumericalError(NumericalError::Kind::outside_tube, "modulation: Newton diverged");
      if (fmax <= tol) {
        ModulationState s;
        s.t = guess.t;
        s.theta = theta;
        s.omega = omega;
        s.z = z;
        s.eta = Field2(g_, eta, std::vector<cplx>(n));
        s.newton_residual = fmax;
        s.iterations = it;
        s.fd_jacobian = fd;
        // scaled by the field, not by eta, which may sit at roundoff
        const double en = std::sqrt(inner_scalar(g_, w, w));
        for (int a = 0; a < 4; ++a) {
          const auto& Ta = T[static_cast<std::size_t>(a)];
          const double den = en * std::sqrt(inner_scalar(g_, Ta, Ta));
          s.orthogonality[static_cast<std::size_t>(a)] = den > 0.0 ? std::abs(F(a)) / den : 0.0;
        }
        return s;
      }
      if (it == max_iter) break;

      // analytic Jacobian of F_a = <eta, T_a>
      const double h = 1e-4 * omega;
      const auto fp = frame(omega + h, z), fm = frame(omega - h, z);
      std::vector<cplx> d2w(n);
      for (std::size_t i = 0; i < n; ++i) d2w[i] = (fp.d_omega[i] - fm.d_omega[i]) / (2.0 * h);
      std::vector<cplx> dwz1(n), dwz2(n), tmp(n);
      for (std::size_t i = 0; i < n; ++i) {
        dwz1[i] = 2.0 * ms.dxi1[i];
        dwz2[i] = -2.0 * I * ms.dxi2[i];
      }
      // d_b eta
      std::array<std::vector<cplx>, 4> deta;
      deta[0].resize(n);
      for (std::size_t i = 0; i < n; ++i) deta[0][i] = -I * w[i];
      deta[1].resize(n);
      deta[2].resize(n);
      deta[3].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        deta[1][i] = -fr.d_omega[i];
        deta[2][i] = -fr.d_z1[i];
        deta[3][i] = -fr.d_z2[i];
      }
      // d_b T_a, b = omega, z1, z2 (theta does not move T)
      auto dT = [&](int a, int b) -> std::vector<cplx> {
        std::vector<cplx> out(n);
        if (b == 0) return out;
        const std::vector<cplx>& db = b == 1 ? fr.d_omega : (b == 2 ? fr.d_z1 : fr.d_z2);
        switch (a) {
          case 0:
            for (std::size_t i = 0; i < n; ++i) out[i] = I * db[i];
            break;
          case 1:
            if (b == 1) out = d2w;
            else out = b == 2 ? dwz1 : dwz2;
            break;
          default:
            if (b == 1) out = a == 2 ? dwz1 : dwz2;
            break;
        }
        return out;
      };
      Eigen::Matrix4d J;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const auto& Ta = T[static_cast<std::size_t>(a)];
          J(a, b) = inner_scalar(g_, deta[static_cast<std::size_t>(b)], Ta) + inner_scalar(g_, eta, dT(a, b));
        }
      Eigen::Vector4d step;
      double cond = 0.0;
      detail::solve4(J, F, step, cond);
      if (!(cond < 1e12)) {
        fd = true;
        J = fd_jacobian(u, theta, omega, z, F);
        detail::solve4(J, F, step, cond);
        if (!(cond < 1e14))
          throw NumericalError(NumericalError::Kind::outside_tube, "modulation: singular Jacobian");
      }
      // backtracking on |F|; skipped close to the solution
      double lam = 1.0;
      if (fmax > 1e-6) {
        const double f2 = F.norm();
        for (int k = 0; k < 30; ++k, lam *= 0.5) {
          const double om = omega + lam * step(1);
          if (!(om > 0.0) || !covers(om)) continue;
          const auto Fn = residual(u, theta + lam * step(0), om, cplx{z1 + lam * step(2), z2 + lam * step(3)});
          if (std::isfinite(Fn.norm()) && Fn.norm() < (1.0 - 1e-4 * lam) * f2) break;
        }
      }
      theta += lam * step(0);
      omega += lam * step(1);
      z1 += lam * step(2);
      z2 += lam * step(3);
      if (!(omega > 0.0) || !std::isfinite(omega) || !covers(omega))
        throw NumericalError(NumericalError::Kind::outside_tube, "modulation: omega left the admissible range");
    }
    throw NumericalError(NumericalError::Kind::outside_tube, "modulation: no convergence in 50 Newton steps");
  }

 public:
  // Residual vector F(theta, omega, z) alone.
  [[nodiscard]] Eigen::Vector4d residual(std::span<const cplx> u, double theta, double omega, cplx z) const {
    const ProfileFrame fr = frame(omega, z);
    const std::size_t n = g_.size();
    std::vector<cplx> eta(n), t0(n);
    const cplx rot = std::polar(1.0, -theta);
    for (std::size_t i = 0; i < n; ++i) {
      eta[i] = rot * u[i] - fr.phi[i];
      t0[i] = I * fr.phi[i];
    }
    Eigen::Vector4d F;
    F(0) = inner_scalar(g_, eta, t0);
    F(1) = inner_scalar(g_, eta, fr.d_omega);
    F(2) = inner_scalar(g_, eta, fr.d_z1);
    F(3) = inner_scalar(g_, eta, fr.d_z2);
    return F;
  }

 private:
  Eigen::Matrix4d fd_jacobian(std::span<const cplx> u, double theta, double omega, cplx z,
                              const Eigen::Vector4d& F) const {
    Eigen::Matrix4d J;
    const double h = 1e-6;
    for (int b = 0; b < 4; ++b) {
      double th = theta, om = omega;
      cplx zz = z;
      if (b == 0) th += h;
      if (b == 1) om += h * omega;
      if (b == 2) zz += h;
      if (b == 3) zz += cplx{0.0, h};
      J.col(b) = (residual(u, th, om, zz) - F) / (b == 1 ? h * omega : h);
    }
    return J;
  }

  double p_;
  InternalMode mode_;
  Grid g_;
  std::vector<double> d1_, d2_;
};

inline ModulationState modulate(const Params& prm, const Field2& u, const InternalMode& mode,
                                const ModulationState& guess) {
  const Modulator mod(prm.p, mode, u.grid);
  return mod(u.v1, guess);
}

// ---------------------------------------------------------------------------
// Diagnostics.

// Even bump: 1 on [-1, 1], 0 outside [-2, 2], smoothstep in between, so x chi' <= 0.
inline double chi(double x) {
  const double t = std::abs(x) - 1.0;
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 - t * t * (3.0 - 2.0 * t);
}

struct Diagnostics {
  double t = 0.0;
  double theta = 0.0, omega = 1.0;
  cplx z{};
  double abs_z2 = 0.0;
  double mass = 0.0, energy = 0.0;
  double eta_sigmaA = 0.0;
  double eta_tilde = 0.0;
  double virial_I = 0.0;
  double J_FGR = 0.0;
  double eta_h1_weighted = 0.0;
  double eta_h1 = 0.0;
  double newton_residual = 0.0;
  double orthogonality = 0.0;       // max relative
  double reconstruction = 0.0;      // sup |u - e^{i theta}(phi + eta)|
};

// Fixed weights on the simulation grid.
class DiagnosticWeights {
 public:
  DiagnosticWeights(const SimConfig& cfg, const Grid& g) : g_(g), kappa_(cfg.kappa_value()), omega0_(cfg.params.omega) {
    const std::size_t n = g.size();
    sechA_.resize(n);
    zeta2_.resize(n);
    phiA_.resize(n);
    chiA_.resize(n);
    expw_.resize(n);
    sechk_.resize(n);
    const double A = cfg.A;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g.x(i);
      sechA_[i] = 1.0 / std::cosh(2.0 * x / A);
      const double zeta = std::exp(-std::abs(x) / A * (1.0 - chi(x)));
      zeta2_[i] = zeta * zeta;
      chiA_[i] = chi(x / A);
      expw_[i] = std::exp(-cfg.a * std::sqrt(1.0 + x * x));
      sechk_[i] = 1.0 / std::cosh(kappa_ * omega0_ * x);
    }
    // phi_A = int_0^x zeta_A^2, trapezoid outward from the node nearest 0
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(g.x(i)) < std::abs(g.x(c))) c = i;
    const double h = g.dx();
    phiA_[c] = g.x(c) * zeta2_[c];
    for (std::size_t i = c + 1; i < n; ++i) phiA_[i] = phiA_[i - 1] + 0.5 * h * (zeta2_[i] + zeta2_[i - 1]);
    for (std::size_t i = c; i-- > 0;) phiA_[i] = phiA_[i + 1] - 0.5 * h * (zeta2_[i] + zeta2_[i + 1]);
  }

  [[nodiscard]] const std::vector<double>& chiA() const noexcept { return chiA_; }

  // ||sech(2x/A) eta'|| + A^{-1} ||sech(2x/A) eta||
  [[nodiscard]] double sigmaA(std::span<const cplx> eta, std::span<const cplx> deta, double A) const {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      const double s2 = sechA_[i] * sechA_[i];
      a += g_.weight(i) * s2 * std::norm(deta[i]);
      b += g_.weight(i) * s2 * std::norm(eta[i]);
    }
    return std::sqrt(a) + std::sqrt(b) / A;
  }

  [[nodiscard]] double tilde(std::span<const cplx> eta) const {
    double a = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) a += g_.weight(i) * sechk_[i] * sechk_[i] * std::norm(eta[i]);
    return std::sqrt(a);
  }

  // 1/2 <i eta, S_A eta>, S_A = phi_A' + 2 phi_A d_x
  [[nodiscard]] double virial(std::span<const cplx> eta, std::span<const cplx> deta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      const cplx s = zeta2_[i] * eta[i] + 2.0 * phiA_[i] * deta[i];
      acc += g_.weight(i) * pair(I * eta[i], s);
    }
    return 0.5 * acc;
  }

  // ||e^{-a<x>} eta||_{H^1}
  [[nodiscard]] double weighted_h1(std::span<const cplx> eta) const {
    std::vector<cplx> w(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) w[i] = expw_[i] * eta[i];
    const auto dw = derivative(g_, w, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) acc += g_.weight(i) * (std::norm(w[i]) + std::norm(dw[i]));
    return std::sqrt(acc);
  }

 private:
  Grid g_;
  double kappa_, omega0_;
  std::vector<double> sechA_, zeta2_, phiA_, chiA_, expw_, sechk_;
};

inline double h1_norm(const Grid& g, std::span<const cplx> eta, std::span<const cplx> deta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) acc += g.weight(i) * (std::norm(eta[i]) + std::norm(deta[i]));
  return std::sqrt(acc);
}

// Radiation mode of the omega = 1 problem on a collocation grid, evaluated
// at omega as g(sqrt(omega) x).
struct RadiationSamples {
  std::vector<double> g1, g2;  // g_1 and Im g_2
};

inline RadiationSamples radiation_on_grid(const RadiationMode& rad, double omega, const Grid& g) {
  const Field2 r = resample(rad.g, g, std::sqrt(omega / rad.params.omega), 1.0);
  RadiationSamples s;
  s.g1.resize(g.size());
  s.g2.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.g1[i] = r.v1[i].real();
    s.g2[i] = r.v2[i].imag();
  }
  return s;
}

// All diagnostics for one modulated state. u, when given, is the evolved
// field used for the reconstruction check.
inline Diagnostics diagnostics(const ModulationState& st, const SimConfig& cfg, const Modulator& mod,
                               const RadiationMode& rad, const DiagnosticWeights& wts,
                               std::span<const cplx> u = {}) {
  const Grid& g = mod.grid();
  Diagnostics d;
  d.t = st.t;
  d.theta = st.theta;
  d.omega = st.omega;
  d.z = st.z;
  d.abs_z2 = std::norm(st.z);
  d.newton_residual = st.newton_residual;
  d.orthogonality = *std::max_element(st.orthogonality.begin(), st.orthogonality.end());
  const std::span<const cplx> eta = st.eta.v1;
  const auto deta = derivative(g, eta, 1);
  d.eta_sigmaA = wts.sigmaA(eta, deta, cfg.A);
  d.eta_tilde = wts.tilde(eta);
  d.virial_I = wts.virial(eta, deta);
  d.eta_h1_weighted = wts.weighted_h1(eta);
  d.eta_h1 = h1_norm(g, eta, deta);

  // J_FGR = <J eta, chi_A (z^2 g + conj(z^2 g))>, J eta <-> -i eta
  const RadiationSamples rs = radiation_on_grid(rad, st.omega, g);
  const cplx z2 = st.z * st.z;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx src = 2.0 * z2.real() * rs.g1[i] - 2.0 * I * z2.imag() * rs.g2[i];
    acc += g.weight(i) * pair(-I * eta[i], wts.chiA()[i] * src);
  }
  d.J_FGR = acc;

  if (!u.empty()) {
    const MassEnergy me = mass_energy(cfg.params, u, g);
    d.mass = me.mass;
    d.energy = me.energy;
    const auto rec = mod.reconstruct(st);
    for (std::size_t i = 0; i < g.size(); ++i) d.reconstruction = std::max(d.reconstruction, std::abs(rec[i] - u[i]));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Stability experiment.

struct StabilitySummary {
  double p = 0.0, omega0 = 1.0, delta = 0.0, dt = 0.0, T = 0.0, half_width = 0.0;
  int n = 0;
  double lambda = 0.0, k_rad = 0.0;
  double max_eta_h1 = 0.0;
  double C_sqrt_delta = 0.0;  // max_eta_h1 / sqrt(delta)
  double z2_first_window = 0.0, z2_last_window = 0.0, envelope_ratio = 0.0;
  double omega_tv_first_half = 0.0, omega_tv_second_half = 0.0, omega_tv_ratio = 0.0;
  double omega_initial = 0.0, omega_final_window = 0.0;
  double max_mass_drift = 0.0, max_energy_drift = 0.0;
  double max_orthogonality = 0.0, max_newton_residual = 0.0, max_reconstruction = 0.0;
  double fgr_correlation = 0.0;
  double wrap_time = 0.0;
  int max_newton_iterations = 0;
};

struct StabilityResult {
  std::vector<Diagnostics> rows;
  StabilitySummary summary;
};

// Smooth even random direction with unit H^1 norm.
inline std::vector<cplx> random_even_direction(const Grid& g, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ctr(0.0, 5.0), wid(0.5, 2.0), coef(-1.0, 1.0);
  std::vector<cplx> v(g.size());
  for (int b = 0; b < 6; ++b) {
    const double c = ctr(rng), s = wid(rng);
    const cplx a{coef(rng), coef(rng)};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.x(i);
      v[i] += a * (std::exp(-(x - c) * (x - c) / (s * s)) + std::exp(-(x + c) * (x + c) / (s * s)));
    }
  }
  // exact evenness on the periodic grid
  std::vector<cplx> e(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) e[i] = 0.5 * (v[i] + v[g.mirror(i)]);
  const double nrm = h1_norm(g, e, derivative(g, e, 1));
  for (auto& x : e) x /= nrm;
  return e;
}

inline double total_variation(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double tv = 0.0;
  for (std::size_t i = lo + 1; i < hi; ++i) tv += std::abs(v[i] - v[i - 1]);
  return tv;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 3) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

inline StabilitySummary summarize(const std::vector<Diagnostics>& rows, const SimConfig& cfg) {
  StabilitySummary s;
  s.p = cfg.params.p;
  s.omega0 = cfg.params.omega;
  s.delta = cfg.delta;
  s.dt = cfg.dt;
  s.T = cfg.T_final;
  s.half_width = cfg.half_width;
  s.n = cfg.n;
  if (rows.empty()) return s;
  std::vector<double> om, z4, J, t;
  for (const auto& r : rows) {
    s.max_eta_h1 = std::max(s.max_eta_h1, r.eta_h1);
    s.max_orthogonality = std::max(s.max_orthogonality, r.orthogonality);
    s.max_newton_residual = std::max(s.max_newton_residual, r.newton_residual);
    s.max_reconstruction = std::max(s.max_reconstruction, r.reconstruction);
    om.push_back(r.omega);
    z4.push_back(r.abs_z2 * r.abs_z2);
    J.push_back(r.J_FGR);
    t.push_back(r.t);
  }
  s.C_sqrt_delta = cfg.delta > 0.0 ? s.max_eta_h1 / std::sqrt(cfg.delta) : 0.0;
  const std::size_t n = rows.size(), w = std::max<std::size_t>(1, n / 10);
  for (std::size_t i = 0; i < w; ++i) {
    s.z2_first_window += rows[i].abs_z2 / w;
    s.z2_last_window += rows[n - w + i].abs_z2 / w;
    s.omega_final_window += rows[n - w + i].omega / w;
  }
  s.envelope_ratio = s.z2_first_window > 0.0 ? s.z2_last_window / s.z2_first_window : 0.0;
  s.omega_initial = rows.front().omega;
  std::size_t half = 0;
  while (half < n && rows[half].t < 0.5 * rows.back().t) ++half;
  s.omega_tv_first_half = total_variation(om, 0, std::min(half + 1, n));
  s.omega_tv_second_half = total_variation(om, half, n);
  s.omega_tv_ratio = s.omega_tv_first_half > 0.0 ? s.omega_tv_second_half / s.omega_tv_first_half : 0.0;
  // d/dt J_FGR against |z|^4, central differences
  std::vector<double> dJ, zz;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    dJ.push_back((J[i + 1] - J[i - 1]) / (t[i + 1] - t[i - 1]));
    zz.push_back(z4[i]);
  }
  s.fgr_correlation = pearson(dJ, zz);
  return s;
}

// Modulated run from u0 = phi_{omega0} + delta * direction. The observer, if
// given, sees every diagnostics row as it is produced.
inline StabilityResult run_stability_experiment(const SimConfig& cfg,
                                                const std::function<void(const Diagnostics&)>& on_row = {}) {
  cfg.validate();
  const Grid g = cfg.grid();
  const double w0 = cfg.params.omega;
  const double p = cfg.params.p;
  const Modulator mod(p, dynamics_mode(p, cfg.half_width * std::sqrt(std::max(w0, 1.0))), g);
  const Grid rg = mod.mode().xi.grid;
  const RadiationMode rad = radiation_mode(mod.mode(), rg);
  const DiagnosticWeights wts(cfg, g);

  std::vector<cplx> dir;
  switch (cfg.direction) {
    case PerturbationDirection::internal_mode: {
      const ModeSamples ms = mod.samples(w0);
      dir.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dir[i] = cplx{ms.xi1[i], ms.xi2[i]};
      break;
    }
    case PerturbationDirection::random_even: dir = random_even_direction(g, cfg.seed); break;
    default: dir = cfg.custom_direction;
  }
  std::vector<cplx> u0(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) u0[i] = soliton_value(cfg.params, g.x(i)) + cfg.delta * dir[i];

  StabilityResult res;
  ModulationState guess;
  guess.omega = w0;
  if (cfg.direction == PerturbationDirection::internal_mode) guess.z = 0.5 * cfg.delta * cplx{1.0, -1.0};
  int max_it = 0;
  const auto ev = evolve(cfg, u0, [&](double t, std::span<const cplx> u) {
    guess.t = t;
    ModulationState st = mod(u, guess);
    st.t = t;
    max_it = std::max(max_it, st.iterations);
    Diagnostics d = diagnostics(st, cfg, mod, rad, wts, u);
    if (on_row) on_row(d);
    res.rows.push_back(d);
    guess = st;
    // carry the phase forward linearly to help the next warm start
    if (res.rows.size() >= 2) {
      const auto& a = res.rows[res.rows.size() - 2];
      guess.theta = st.theta + (st.theta - a.theta);
    }
  });
  res.summary = summarize(res.rows, cfg);
  res.summary.max_mass_drift = ev.max_mass_drift;
  res.summary.max_energy_drift = ev.max_energy_drift;
  res.summary.max_newton_iterations = max_it;
  res.summary.lambda = mod.mode().lambda * w0;
  res.summary.k_rad = std::sqrt(std::max(0.0, 2.0 * res.summary.lambda - w0));
  // time for radiation at group speed 2k to cross the domain and return
  res.summary.wrap_time =
      res.summary.k_rad > 0.0 ? 2.0 * cfg.half_width / (2.0 * res.summary.k_rad) : INFINITY;
  return res;
}

inline std::string trajectory_csv_header() {
  return "t,theta,omega,z_re,z_im,abs_z2,Q,E,eta_sigmaA,eta_tilde,virial_I,J_FGR,eta_h1_weighted";
}

}  // namespace solitonlab
