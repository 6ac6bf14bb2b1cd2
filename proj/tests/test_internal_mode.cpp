#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "solitonlab/internal_mode.hpp"

using namespace solitonlab;

namespace {

// <phi_3^2, T>, frozen from a trapezoid computation on [-40, 40] with
// n = 4096; the n = 2048 run agrees to 1e-8.
constexpr double kPhi3SqT = 2.9979879157;

double alpha_over_eps2_limit() { return 0.25 + kPhi3SqT / (32.0 * std::sqrt(2.0)); }

double sup_on(const Grid& g, const std::vector<cplx>& f, double reach) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g.x(i)) <= reach) m = std::max(m, std::abs(f[i]));
  return m;
}

double rel_l2(const std::vector<cplx>& a, const std::vector<cplx>& b, std::size_t margin) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = margin; i + margin < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(BirmanSchwinger, KernelSmallAlphaLimit) {
  for (double d : {0.0, 0.05, 0.1, 0.14}) EXPECT_NEAR(bs_kernel(1e-4, d)[1], -0.5 * d, 1e-6) << d;
  // next term of the expansion is alpha d^2 / 4
  for (double d : {0.3, 1.0, 4.0, 10.0}) {
    const auto k = bs_kernel(1e-4, d);
    EXPECT_NEAR(k[1], -0.5 * d + 0.25e-4 * d * d, 1e-8 * d * d * d) << d;
    EXPECT_NEAR(k[0], std::exp(-std::sqrt(2.0 - 1e-8) * d) / (2.0 * std::sqrt(2.0 - 1e-8)), 1e-15);
  }
  EXPECT_DOUBLE_EQ(bs_kernel(0.0, 2.0)[1], -1.0);
}

TEST(BirmanSchwinger, SquareRootFactorization) {
  for (double p : {2.7, 2.9, 3.2}) {
    for (double x : {0.0, 0.4, 1.7, 5.0}) {
      const auto P = bs_P(p, x), A = bs_P_abs_sqrt(p, x), S = bs_P_sqrt(p, x);
      EXPECT_LT((S * A - P).cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((S * A - A * S).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(BirmanSchwinger, CubicPotentialIsQuarterSigma1PhiSquared) {
  for (double x : {0.0, 0.5, 2.0}) {
    const auto P = bs_P(3.0, x);
    const double q = 0.25 * soliton_power(Params(3.0), x, 2.0);
    EXPECT_NEAR(P(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(P(0, 1), q, 1e-14);
    EXPECT_NEAR(P(1, 0), q, 1e-14);
  }
}

TEST(InternalMode, CubicHasThresholdEigenvalue) {
  const auto r = alpha_fixed_point(3.0);
  EXPECT_EQ(r.alpha, 0.0);
  EXPECT_EQ(r.lambda, 1.0);
  const auto m = find_lambda(Params(3.0), ModeMethod::birman_schwinger);
  EXPECT_EQ(m.lambda, 1.0);
}

TEST(InternalMode, AlphaLeadingCoefficient) {
  const auto r = alpha_fixed_point(2.9);
  const double ratio = r.alpha / (0.1 * 0.1);
  EXPECT_NEAR(ratio / alpha_over_eps2_limit(), 1.0, 0.10);
  EXPECT_GT(r.iterations, 1);
}

TEST(InternalMode, AlphaQuadraticScaling) {
  for (double sign : {-1.0, 1.0}) {
    const double a1 = alpha_fixed_point(3.0 + sign * 0.05).alpha / (0.05 * 0.05);
    const double a2 = alpha_fixed_point(3.0 + sign * 0.025).alpha / (0.025 * 0.025);
    EXPECT_NEAR(a1 / a2, 1.0, 0.10) << sign;
  }
}

TEST(InternalMode, EvansAgreesWithBirmanSchwinger) {
  for (double p : {2.7, 2.8, 3.2, 3.3}) {
    const auto e = find_lambda(Params(p), ModeMethod::evans);
    const auto b = find_lambda(Params(p), ModeMethod::birman_schwinger);
    EXPECT_LT(std::abs(e.lambda - b.lambda), 1e-4) << p;
    EXPECT_GT(e.lambda, 0.0);
    EXPECT_LT(e.lambda, 1.0);
  }
}

TEST(InternalMode, MethodRanges) {
  EXPECT_THROW(find_lambda(Params(2.98), ModeMethod::evans), NumericalError);
  EXPECT_THROW(find_lambda(Params(2.5), ModeMethod::birman_schwinger), NumericalError);
}

TEST(InternalMode, SecondHarmonicAboveThreshold) {
  for (double p : {2.2, 2.5, 2.8}) {
    const auto m = find_lambda(Params(p), ModeMethod::evans);
    EXPECT_GT(2.0 * m.lambda, 1.0) << p;
  }
}

TEST(InternalMode, LambdaDecreasingTowardCritical) {
  const double l4 = find_lambda(Params(4.0), ModeMethod::evans).lambda;
  const double l45 = find_lambda(Params(4.5), ModeMethod::evans).lambda;
  EXPECT_GT(l4, l45);
  EXPECT_GT(l45, 0.0);
}

TEST(InternalMode, FrequencyScaling) {
  for (auto method : {ModeMethod::evans, ModeMethod::birman_schwinger}) {
    const double p = method == ModeMethod::evans ? 2.8 : 2.9;
    const double l1 = find_lambda(Params(p, 1.0), method).lambda;
    const double l2 = find_lambda(Params(p, 2.0), method).lambda;
    EXPECT_NEAR(l2, 2.0 * l1, 1e-5) << to_string(method);
  }
}

TEST(ConvolutionT, SolvesItsOde) {
  const Grid g = make_grid(40.0, 4096);
  const auto T = convolution_T(g);
  const auto d2 = derivative(g, T, 2);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g.x(i)) > 30.0) continue;
    const double lhs = -d2[i] + 2.0 * T[i];
    err = std::max(err, std::abs(lhs - std::sqrt(2.0) * soliton_power(Params(3.0), g.x(i), 2.0)));
  }
  EXPECT_LT(err, 1e-5);
}

TEST(ConvolutionT, Even) {
  const Grid g = make_grid(40.0, 2048);
  const auto T = convolution_T(g);
  double asym = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) asym = std::max(asym, std::abs(T[i] - T[g.size() - 1 - i]));
  EXPECT_LT(asym, 1e-10);
}

TEST(ConvolutionT, FrozenPairing) {
  const double fine = phi3sq_T(make_grid(40.0, 4096));
  const double coarse = phi3sq_T(make_grid(40.0, 2048));
  EXPECT_NEAR(fine, coarse, 1e-6);
  EXPECT_NEAR(fine, kPhi3SqT, 1e-9);
}

TEST(InternalMode, CubicEigenfunction) {
  const Grid g = make_grid(30.0, 2048);
  InternalMode m = find_lambda(Params(3.0), ModeMethod::birman_schwinger);
  m = xi_build(m, g);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    err = std::max(err, std::abs(m.xi.v1[i] - (1.0 - soliton_power(Params(3.0), g.x(i), 2.0))));
    err = std::max(err, std::abs(m.xi.v2[i] - I));
  }
  EXPECT_LT(err, 1e-6);
  EXPECT_LT(m.eigen_residual, 1e-4);
  EXPECT_THROW(xi_build(m, g, XiNormalization::symplectic), NumericalError);
}

TEST(InternalMode, FirstOrderExpansion) {
  const Grid g = make_grid(40.0, 4096);
  const auto R1 = expansion_R1(g);
  double ratio[2];
  const double ps[2] = {2.95, 2.975};
  for (int j = 0; j < 2; ++j) {
    const double p = ps[j], e = p - 3.0;
    InternalMode m = xi_build(find_lambda(Params(p), ModeMethod::birman_schwinger), g);
    std::vector<cplx> diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      diff[i] = m.xi.v1[i] - (1.0 - soliton_power(Params(3.0), g.x(i), 2.0) + e * R1[i]);
    ratio[j] = sup_on(g, diff, 10.0) / (e * e);
  }
  EXPECT_GT(ratio[0] / ratio[1], 0.5);
  EXPECT_LT(ratio[0] / ratio[1], 2.0);
}

TEST(InternalMode, EigenfunctionInvariants) {
  const Grid g = make_grid(40.0, 4096);
  for (double p : {2.8, 2.95, 3.1}) {
    const Params prm(p);
    const auto m = xi_build(find_lambda(prm, ModeMethod::birman_schwinger), g);
    EXPECT_LT(m.eigen_residual, 1e-4) << p;
    EXPECT_LT(m.reality_residual, 1e-8) << p;
    double asym = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      asym = std::max(asym, std::abs(m.xi.v1[i] - m.xi.v1[g.size() - 1 - i]));
      asym = std::max(asym, std::abs(m.xi.v2[i] - m.xi.v2[g.size() - 1 - i]));
      scale = std::max(scale, std::abs(m.xi.v1[i]));
    }
    EXPECT_LT(asym / scale, 1e-8) << p;

    // Real form: L_- Im xi_2 = lambda xi_1, L_+ xi_1 = lambda Im xi_2.
    std::vector<cplx> x1(g.size()), x2(g.size()), lx1(g.size()), lx2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      x1[i] = m.xi.v1[i].real();
      x2[i] = m.xi.v2[i].imag();
      lx1[i] = m.lambda * x1[i];
      lx2[i] = m.lambda * x2[i];
    }
    const auto Lp = build_operator(prm, OperatorKind::L_plus, g);
    const auto Lm = build_operator(prm, OperatorKind::L_minus, g);
    EXPECT_LT(rel_l2(Lm.apply_scalar(x2), lx1, 16), 1e-4) << p;
    EXPECT_LT(rel_l2(Lp.apply_scalar(x1), lx2, 16), 1e-4) << p;
  }
}

TEST(InternalMode, SymplecticNormalization) {
  const Grid g = make_grid(40.0, 4096);
  for (auto method : {ModeMethod::evans, ModeMethod::birman_schwinger}) {
    const auto m = xi_build(find_lambda(Params(2.8), method), g, XiNormalization::symplectic);
    std::vector<double> prod(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) prod[i] = m.xi.v1[i].real() * m.xi.v2[i].imag();
    const double a = m.alpha;
    const double total = trapz(g, prod) + (prod.front() + prod.back()) / (2.0 * a);
    EXPECT_NEAR(total, 0.5, 1e-6);
    EXPECT_LT(m.eigen_residual, 1e-4);
    EXPECT_GT(m.xi.v2[g.size() / 2].imag(), 0.0);
  }
}

TEST(InternalMode, RoutesGiveSameEigenfunction) {
  const Grid g = make_grid(40.0, 4096);
  const auto e = xi_build(find_lambda(Params(3.2), ModeMethod::evans), g, XiNormalization::darboux);
  const auto b = xi_build(find_lambda(Params(3.2), ModeMethod::birman_schwinger), g, XiNormalization::darboux);
  double d = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    d = std::max({d, std::abs(e.xi.v1[i] - b.xi.v1[i]), std::abs(e.xi.v2[i] - b.xi.v2[i])});
  EXPECT_LT(d, 1e-5);
}

TEST(InternalMode, DarbouxReferenceMatchesShape) {
  const double p = 2.9;
  const auto r = alpha_fixed_point(p);
  const Field2 ref = darboux_reference(p, r.alpha);
  const Field2 xi = xi_darboux(p, r.alpha, ref.grid);
  double d = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (std::abs(ref.grid.x(i)) <= 10.0) d = std::max(d, std::abs(ref.v1[i] - xi.v1[i]));
  EXPECT_LT(d, 1e-5);
}

TEST(InternalMode, FrequencyScaledEigenfunction) {
  const Grid g = make_grid(30.0, 4096);
  const auto m = xi_build(find_lambda(Params(2.9, 2.0), ModeMethod::birman_schwinger), g);
  EXPECT_LT(m.eigen_residual, 1e-4);
  EXPECT_NEAR(m.lambda, 2.0 * (1.0 - m.alpha * m.alpha), 1e-14);
}
