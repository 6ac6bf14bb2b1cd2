#pragma once

// Matrix-free operators of the linearization around phi_omega:
// L_+, L_-, the 2x2 operator L = [[0, L_-], [-L_+, 0]], its conjugate
// H = sigma_3(-d^2 + omega) + V, the ladder family L_j and the factor S_1.

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "numerics.hpp"
#include "profile.hpp"
#include "types.hpp"

namespace solitonlab {

enum class OperatorKind {
  L_plus,
  L_minus,
  matrix_L,
  matrix_H,
  matrix_H_adjoint,
  ladder,
  S1,
  S1_adjoint,
};

// k_j(p) = (p+1)/2 - j(p-1)/2.
inline double ladder_k(double p, int j) { return 0.5 * (p + 1.0) - 0.5 * j * (p - 1.0); }

class LinearOperator {
 public:
  LinearOperator(const Params& prm, OperatorKind kind, const Grid& g, int ladder_index = 0)
      : params_(prm), kind_(kind), grid_(g), j_(ladder_index) {
    if (kind == OperatorKind::ladder && ladder_index < 0)
      throw std::invalid_argument("ladder index must be non-negative");
    pot_ = sample(g, [&](double x) { return soliton_power(prm, x, prm.p - 1.0); });
    const double c = 0.5 * (prm.p - 1.0) * std::sqrt(prm.omega);
    tanh_ = sample(g, [&](double x) { return std::sqrt(prm.omega) * std::tanh(c * x); });
  }

  [[nodiscard]] const Params& params() const noexcept { return params_; }
  [[nodiscard]] OperatorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }

  // Scalar operators on one complex component.
  [[nodiscard]] std::vector<cplx> apply_scalar(std::span<const cplx> u) const {
    switch (kind_) {
      case OperatorKind::L_plus: return schrodinger(u, params_.p);
      case OperatorKind::L_minus: return schrodinger(u, 1.0);
      case OperatorKind::ladder: {
        const double c = ladder_k(params_.p, j_ - 1) * ladder_k(params_.p, j_) * 2.0 /
                         (params_.p + 1.0);
        return schrodinger(u, c);
      }
      case OperatorKind::S1:
      case OperatorKind::S1_adjoint: {
        auto d = derivative(grid_, u, 1);
        const double s = kind_ == OperatorKind::S1 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = s * d[i] + tanh_[i] * u[i];
        return d;
      }
      default: throw std::logic_error("apply_scalar called on a matrix operator");
    }
  }

  [[nodiscard]] Field2 apply(const Field2& u) const {
    if (!(u.grid == grid_)) throw std::invalid_argument("grid mismatch");
    const double p = params_.p;
    switch (kind_) {
      case OperatorKind::matrix_L: {
        const LinearOperator lp(params_, OperatorKind::L_plus, grid_);
        const LinearOperator lm(params_, OperatorKind::L_minus, grid_);
        auto top = lm.apply_scalar(u.v2);
        auto bottom = lp.apply_scalar(u.v1);
        for (auto& v : bottom) v = -v;
        return Field2(grid_, std::move(top), std::move(bottom));
      }
      case OperatorKind::matrix_H:
      case OperatorKind::matrix_H_adjoint: {
        const auto d1 = derivative(grid_, std::span<const cplx>(u.v1), 2);
        const auto d2 = derivative(grid_, std::span<const cplx>(u.v2), 2);
        const double a = 0.5 * (p + 1.0), b = 0.5 * (p - 1.0);
        // V = phi^{p-1} [[-a, -b], [b, a]]; the adjoint uses its transpose.
        const double off12 = kind_ == OperatorKind::matrix_H ? -b : b;
        Field2 out(grid_);
        for (std::size_t i = 0; i < u.size(); ++i) {
          const double w = pot_[i];
          out.v1[i] = -d1[i] + params_.omega * u.v1[i] - a * w * u.v1[i] + off12 * w * u.v2[i];
          out.v2[i] = d2[i] - params_.omega * u.v2[i] - off12 * w * u.v1[i] + a * w * u.v2[i];
        }
        return out;
      }
      default: return Field2(grid_, apply_scalar(u.v1), std::vector<cplx>(u.size()));
    }
  }

  [[nodiscard]] const std::vector<double>& potential() const noexcept { return pot_; }

 private:
  // -u'' + omega u - c phi^{p-1} u
  [[nodiscard]] std::vector<cplx> schrodinger(std::span<const cplx> u, double c) const {
    auto d = derivative(grid_, u, 2);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -d[i] + (params_.omega - c * pot_[i]) * u[i];
    return d;
  }

  Params params_;
  OperatorKind kind_;
  Grid grid_;
  int j_;
  std::vector<double> pot_;
  std::vector<double> tanh_;
};

inline LinearOperator build_operator(const Params& prm, OperatorKind kind, const Grid& g,
                                     int ladder_index = 0) {
  return LinearOperator(prm, kind, g, ladder_index);
}

// U = [[1, 1], [i, -i]] and its inverse 1/2 [[1, -i], [1, i]].
inline Field2 apply_U(const Field2& v) {
  Field2 out(v.grid);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.v1[i] = v.v1[i] + v.v2[i];
    out.v2[i] = I * (v.v1[i] - v.v2[i]);
  }
  return out;
}

inline Field2 apply_U_inverse(const Field2& w) {
  Field2 out(w.grid);
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.v1[i] = 0.5 * (w.v1[i] - I * w.v2[i]);
    out.v2[i] = 0.5 * (w.v1[i] + I * w.v2[i]);
  }
  return out;
}

inline Field2 apply_sigma1(const Field2& v) { return Field2(v.grid, v.v2, v.v1); }

inline Field2 apply_sigma3(Field2 v) {
  for (auto& c : v.v2) c = -c;
  return v;
}

// L2 norm over the grid minus `margin` points at each end.
inline double interior_norm(const Field2& u, std::size_t margin = 8) {
  double acc = 0.0;
  for (std::size_t i = margin; i + margin < u.size(); ++i)
    acc += u.grid.dx() * (std::norm(u.v1[i]) + std::norm(u.v2[i]));
  return std::sqrt(acc);
}

inline double relative_residual(const Field2& a, const Field2& b, std::size_t margin = 8) {
  const double scale = std::max(interior_norm(a, margin), interior_norm(b, margin));
  return scale > 0.0 ? interior_norm(a - b, margin) / scale : 0.0;
}

// |U^{-1} L U v - i H v| / |v|.
inline double conjugation_check(const Params& prm, const Grid& g, const Field2& v) {
  const double nv = norm_l2(v);
  if (nv == 0.0) return 0.0;
  const auto L = build_operator(prm, OperatorKind::matrix_L, g);
  const auto H = build_operator(prm, OperatorKind::matrix_H, g);
  const Field2 lhs = apply_U_inverse(L.apply(apply_U(v)));
  const Field2 rhs = I * H.apply(v);
  return norm_l2(lhs - rhs) / nv;
}

struct LadderResidual {
  double factorization = 0.0;  // L_1 v vs S_1^* S_1 v
  double intertwining = 0.0;   // S_1^2 L_0 L_1 v vs L_2 L_3 S_1^2 v
};

inline LadderResidual ladder_identity_residual(const Params& prm, const Grid& g, const Field2& v) {
  const auto L0 = build_operator(prm, OperatorKind::ladder, g, 0);
  const auto L1 = build_operator(prm, OperatorKind::ladder, g, 1);
  const auto L2 = build_operator(prm, OperatorKind::ladder, g, 2);
  const auto L3 = build_operator(prm, OperatorKind::ladder, g, 3);
  const auto S = build_operator(prm, OperatorKind::S1, g);
  const auto Ss = build_operator(prm, OperatorKind::S1_adjoint, g);
  const std::span<const cplx> u(v.v1);
  auto as_field = [&](std::vector<cplx> s) { return Field2(g, std::move(s), std::vector<cplx>(g.size())); };
  LadderResidual r;
  r.factorization = relative_residual(as_field(L1.apply_scalar(u)),
                                      as_field(Ss.apply_scalar(S.apply_scalar(u))));
  const auto left = S.apply_scalar(S.apply_scalar(L0.apply_scalar(L1.apply_scalar(u))));
  const auto right = L2.apply_scalar(L3.apply_scalar(S.apply_scalar(S.apply_scalar(u))));
  r.intertwining = relative_residual(as_field(left), as_field(right), 16);
  return r;
}

// Darboux transport of a solution (w1, w2) of L_2 w1 = lam w2, L_3 w2 = -lam w1:
// xi_1 = (S_1^*)^2 w1, xi_2 = -L_0 xi_1 / lam.
inline Field2 darboux_transport(const Params& prm, const Grid& g, std::span<const cplx> w1, cplx lam) {
  const auto Ss = build_operator(prm, OperatorKind::S1_adjoint, g);
  const auto L0 = build_operator(prm, OperatorKind::ladder, g, 0);
  auto xi1 = Ss.apply_scalar(Ss.apply_scalar(w1));
  auto xi2 = L0.apply_scalar(xi1);
  for (auto& c : xi2) c = -c / lam;
  return Field2(g, std::move(xi1), std::move(xi2));
}

}  // namespace solitonlab
