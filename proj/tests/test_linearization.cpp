#include <gtest/gtest.h>

#include <cmath>

#include "solitonlab/linearization.hpp"

using namespace solitonlab;

namespace {
const Grid kDefault = make_grid(40.0, 4096);

Field2 gaussian(const Grid& g, double shift = 0.0) {
  return Field2::sample(
      g, [&](double x) { return cplx{std::exp(-(x - shift) * (x - shift)), 0.0}; },
      [&](double x) { return cplx{0.0, 0.5 * x * std::exp(-x * x / 2)}; });
}

Field2 scalar_field(const Grid& g, auto&& f) { return Field2::scalar(g, [&](double x) { return cplx{f(x), 0.0}; }); }
}  // namespace

TEST(Operators, LMinusKillsSoliton) {
  for (double w : {1.0, 1.7}) {
    const Params prm(2.9, w);
    const auto Lm = build_operator(prm, OperatorKind::L_minus, kDefault);
    EXPECT_LT(norm_sup(Lm.apply(soliton(prm, kDefault))), 1e-5);
  }
}

TEST(Operators, LPlusOnOmegaDerivative) {
  const Params prm(2.8, 1.3);
  const auto Lp = build_operator(prm, OperatorKind::L_plus, kDefault);
  const Field2 r = Lp.apply(soliton_domega(prm, kDefault)) + soliton(prm, kDefault);
  EXPECT_LT(norm_sup(r), 1e-4);
}

TEST(Operators, GeneralizedKernel) {
  const Params prm(3.3);
  const auto L = build_operator(prm, OperatorKind::matrix_L, kDefault);
  const Field2 phi = soliton(prm, kDefault);
  EXPECT_LT(norm_sup(L.apply(Field2(kDefault, std::vector<cplx>(kDefault.size()), phi.v1))), 1e-4);
  const Field2 dphi = soliton_domega(prm, kDefault);
  EXPECT_LT(norm_sup(L.apply(L.apply(dphi))), 1e-4);
}

TEST(Operators, NegativeLadderIndexRejected) {
  EXPECT_THROW(build_operator(Params(3.0), OperatorKind::ladder, kDefault, -1), std::invalid_argument);
}

TEST(Operators, LadderEndpointsMatchLPlusLMinus) {
  const Params prm(2.7);
  const Field2 v = gaussian(kDefault);
  EXPECT_LT(norm_sup(build_operator(prm, OperatorKind::ladder, kDefault, 0).apply(v) -
                     build_operator(prm, OperatorKind::L_plus, kDefault).apply(v)),
            1e-12);
  EXPECT_LT(norm_sup(build_operator(prm, OperatorKind::ladder, kDefault, 1).apply(v) -
                     build_operator(prm, OperatorKind::L_minus, kDefault).apply(v)),
            1e-12);
}

TEST(Operators, CubicUpperLaddersAreFree) {
  const Params prm(3.0);
  const Field2 v = gaussian(kDefault);
  const Field2 d2 = derivative(v, 2);
  Field2 free(kDefault);
  for (std::size_t i = 0; i < kDefault.size(); ++i) free.v1[i] = -d2.v1[i] + v.v1[i];
  for (int j : {2, 3})
    EXPECT_LT(norm_sup(build_operator(prm, OperatorKind::ladder, kDefault, j).apply(v) - free), 1e-6);
}

TEST(Operators, ScalarOperatorsSymmetric) {
  const Params prm(2.85, 1.2);
  const Field2 u = scalar_field(kDefault, [](double x) { return std::exp(-x * x / 3) * std::cos(x); });
  const Field2 v = scalar_field(kDefault, [](double x) { return x * std::exp(-x * x / 5); });
  for (auto k : {OperatorKind::L_plus, OperatorKind::L_minus}) {
    const auto A = build_operator(prm, k, kDefault);
    const double a = inner(A.apply(u), v), b = inner(u, A.apply(v));
    EXPECT_LT(std::abs(a - b), 1e-8 * std::max(std::abs(a), 1.0));
  }
}

TEST(Conjugation, GaussianCubic) {
  EXPECT_LT(conjugation_check(Params(3.0), kDefault, gaussian(kDefault)), 1e-6);
}

TEST(Conjugation, ZeroField) { EXPECT_EQ(conjugation_check(Params(3.0), kDefault, Field2(kDefault)), 0.0); }

TEST(Conjugation, SechOtherParameters) {
  const Field2 v = Field2::sample(
      kDefault, [](double x) { return cplx{1.0 / std::cosh(x), 0.0}; },
      [](double x) { return cplx{0.3 / std::cosh(2 * x), -0.1 / std::cosh(x)}; });
  EXPECT_LT(conjugation_check(Params(2.8, 1.3), kDefault, v), 1e-6);
}

TEST(Symmetries, SigmaRelations) {
  for (double p : {2.7, 3.0, 3.3}) {
    const Params prm(p);
    const auto H = build_operator(prm, OperatorKind::matrix_H, kDefault);
    const auto Hs = build_operator(prm, OperatorKind::matrix_H_adjoint, kDefault);
    const Field2 v = gaussian(kDefault, 0.3);
    const Field2 a = apply_sigma1(H.apply(v)) + H.apply(apply_sigma1(v));
    EXPECT_LT(norm_l2(a) / norm_l2(v), 1e-8);
    const Field2 b = apply_sigma3(H.apply(v)) - Hs.apply(apply_sigma3(v));
    EXPECT_LT(norm_l2(b) / norm_l2(v), 1e-8);
  }
}

TEST(Symmetries, AdjointIsFormalAdjoint) {
  const Params prm(2.9);
  const auto H = build_operator(prm, OperatorKind::matrix_H, kDefault);
  const auto Hs = build_operator(prm, OperatorKind::matrix_H_adjoint, kDefault);
  const Field2 u = gaussian(kDefault, 0.5), v = gaussian(kDefault, -0.2);
  EXPECT_NEAR(inner(H.apply(u), v), inner(u, Hs.apply(v)), 1e-8);
}

TEST(Ladder, IdentitiesGaussianCubic) {
  const auto r = ladder_identity_residual(Params(3.0), kDefault, gaussian(kDefault));
  EXPECT_LT(r.factorization, 1e-5);
  EXPECT_LT(r.intertwining, 1e-5);
}

TEST(Ladder, IdentitiesSechSquared) {
  const Field2 v = scalar_field(kDefault, [](double x) { return std::pow(1.0 / std::cosh(x), 2); });
  const auto r = ladder_identity_residual(Params(2.7), kDefault, v);
  EXPECT_LT(r.factorization, 1e-5);
  EXPECT_LT(r.intertwining, 1e-5);
}

TEST(Ladder, ZeroField) {
  const auto r = ladder_identity_residual(Params(3.0), kDefault, Field2(kDefault));
  EXPECT_EQ(r.factorization, 0.0);
  EXPECT_EQ(r.intertwining, 0.0);
}

TEST(Ladder, DarbouxTransportPlaneWaves) {
  // p = 3: w = e^{ikx}(1, -i) solves the free system with lam = i(1 + k^2).
  const Params prm(3.0);
  const Grid g = make_grid(40.0, 8192);
  for (double k : {0.5, 1.0}) {
    std::vector<cplx> w1(g.size());
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] = std::exp(I * k * g.x(i));
    const cplx lam = I * (1.0 + k * k);
    const Field2 xi = darboux_transport(prm, g, w1, lam);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.x(i);
      if (std::abs(x) > 10.0) continue;
      const double t = std::tanh(x), s2 = 1.0 - t * t;
      const cplx e = std::exp(I * k * x);
      const cplx a = e * (1.0 - k * k - 2.0 * I * k * t - 2.0 * s2);
      const cplx b = I * e * (1.0 - k * k - 2.0 * I * k * t);
      err = std::max(err, std::abs(xi.v1[i] - a));
      err = std::max(err, std::abs(xi.v2[i] - b));
    }
    EXPECT_LT(err, 1e-6) << "k=" << k;
  }
}
