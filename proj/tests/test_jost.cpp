#include <gtest/gtest.h>

#include <cmath>

#include "solitonlab/jost.hpp"
#include "solitonlab/linearization.hpp"

using namespace solitonlab;

namespace {

double rel_diff(const std::array<cplx, 2>& a, const std::array<cplx, 2>& b) {
  const double scale = std::max({std::abs(b[0]), std::abs(b[1]), 1e-300});
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1])) / scale;
}

}  // namespace

TEST(Jost, ClosedFormF1AtCubic) {
  const Params prm(3.0);
  for (double k : {0.25, 0.5, 1.0, 2.0}) {
    const auto f1 = jost_solve(prm, k, JostIndex::f1);
    double err = 0.0;
    for (double x = -10.0; x <= 10.0; x += 0.137) {
      const auto u = f1.value(x);
      const auto ref = jost_f1_p3(k, x);
      err = std::max(err, std::max(std::abs(u[0] - ref[0]), std::abs(u[1] - ref[1])));
    }
    EXPECT_LT(err, 1e-6) << "k = " << k;
  }
}

TEST(Jost, ClosedFormF3AtCubic) {
  const Params prm(3.0);
  for (double k : {0.25, 0.5, 1.0, 2.0}) {
    const auto f3 = jost_solve(prm, k, JostIndex::f3);
    double err = 0.0;
    for (double x = -10.0; x <= 10.0; x += 0.137) {
      const auto r = jost_f3_p3(k, x);
      err = std::max(err, rel_diff(f3.value(x), {cplx{r[0]}, cplx{r[1]}}));
    }
    EXPECT_LT(err, 1e-6) << "k = " << k;
  }
}

TEST(Jost, AsymptoticNormalizationAtMatchingPoint) {
  const Params prm(2.7);
  for (auto j : {JostIndex::f1, JostIndex::f3, JostIndex::f4_tilde}) {
    const auto f = jost_solve(prm, 0.7, j);
    const auto m = f.m(f.X0);
    const std::array<cplx, 2> e = j == JostIndex::f1 ? std::array<cplx, 2>{1.0, 0.0}
                                                     : std::array<cplx, 2>{0.0, 1.0};
    EXPECT_LT(std::max(std::abs(m[0] - e[0]), std::abs(m[1] - e[1])), 1e-6);
  }
}

TEST(Jost, BoundedOnWholeLine) {
  for (double p : {2.5, 3.0, 3.4}) {
    const auto f1 = jost_solve(Params(p), 0.8, JostIndex::f1);
    double sup = 0.0;
    for (double x = -25.0; x <= 25.0; x += 0.5) {
      const auto u = f1.value(x);
      sup = std::max({sup, std::abs(u[0]), std::abs(u[1])});
    }
    EXPECT_LT(sup, 10.0) << "p = " << p;
  }
}

TEST(Jost, ResidualOfSampledSolution) {
  const Params prm(2.8);
  const double k = 1.3;
  const auto f1 = jost_solve(prm, k, JostIndex::f1);
  const Grid g = make_grid(12.0, 2401);
  Field2 u(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto v = f1.value(g.x(i));
    u.v1[i] = v[0];
    u.v2[i] = v[1];
  }
  const auto H = build_operator(prm, OperatorKind::matrix_H, g);
  const Field2 Hu = H.apply(u);
  EXPECT_LT(relative_residual(Hu, (1.0 + k * k) * u, 16), 1e-6);
}

TEST(Jost, DecaySlope) {
  for (double p : {2.6, 3.0, 3.3}) {
    const auto f3 = jost_solve(Params(p), 0.5, JostIndex::f3);
    const double s = decay_slope(f3, 3.0, 9.0);
    EXPECT_NEAR(s, -(p - 1.0), 0.1 * (p - 1.0)) << "p = " << p;
  }
}

TEST(Wronskian, F1F2AndF3F4) {
  const Params prm(2.9);
  for (double k : {0.5, 1.0, 2.0}) {
    const auto w = wronskian_D(prm, k);
    EXPECT_LT(std::abs(w.W12 - 2.0 * I * k) / (2.0 * k), 1e-6);
    const double mu = std::sqrt(2.0 + k * k);
    // With W[f, g] = f'g - fg' the value is -2 mu.
    EXPECT_LT(std::abs(w.W34 + 2.0 * mu) / (2.0 * mu), 1e-6);
    EXPECT_LT(w.constancy, 1e-6);
    EXPECT_LT(w.symmetry, 1e-6);
  }
}

TEST(Wronskian, ConjugationInK) {
  const Params prm(3.2);
  for (double k : {0.3, 1.1}) {
    const auto a = wronskian_D(prm, k);
    const auto b = wronskian_D(prm, -k);
    EXPECT_LT(max_abs(b.D - a.D.conjugate()) / max_abs(a.D), 1e-6);
  }
}

TEST(Wronskian, ThresholdResonanceAtCubic) {
  const auto d0 = wronskian_D(Params(3.0), 0.0);
  const auto d1 = wronskian_D(Params(3.0), 1.0);
  EXPECT_LT(std::abs(d0.detD), 1e-4 * std::abs(d1.detD));
  for (double p : {2.9, 3.1}) {
    const auto d = wronskian_D(Params(p), 0.0);
    EXPECT_GT(std::abs(d.detD), 1e-3 * std::abs(d1.detD)) << "p = " << p;
  }
}

TEST(Wronskian, DiagonalForSmallK) {
  const auto w = wronskian_D(Params(2.9), 0.05);
  const double n = max_abs(w.D);
  EXPECT_LT(std::abs(w.D(0, 1)), 1e-4 * n);
  EXPECT_LT(std::abs(w.D(1, 0)), 1e-4 * n);
}

TEST(Wronskian, F4Construction) {
  const Params prm(2.9);
  const auto c = jost_f4(prm, 0.8);
  const auto f1 = jost_solve(prm, 0.8, JostIndex::f1);
  const auto f2 = jost_solve(prm, 0.8, JostIndex::f2);
  const double mu = std::sqrt(2.0 + 0.64);
  EXPECT_LT(std::abs(wronskian(f1, c.f4, 1.0)), 1e-8);
  EXPECT_LT(std::abs(wronskian(f2, c.f4, -1.0)), 1e-8);
  const auto f3 = jost_solve(prm, 0.8, JostIndex::f3);
  EXPECT_NEAR(std::abs(wronskian(f3, c.f4, 0.0)), 2.0 * mu, 1e-6);
}

TEST(Resonance, CubicLeftTailAndNonzero) {
  const Params prm(3.0);
  const cplx w = resonance_wronskian(prm);
  EXPECT_GT(std::abs(w), 1e-2);
  const auto f3 = jost_solve(prm, 0.0, JostIndex::f3);
  auto logmag = [&](double x) {
    const auto u = f3.value(x);
    return std::log(std::hypot(std::abs(u[0]), std::abs(u[1])));
  };
  const double slope = (logmag(-15.0) - logmag(-5.0)) / 10.0;
  EXPECT_NEAR(slope, std::sqrt(2.0), 0.05 * std::sqrt(2.0));
  const JState s = f3.at(0.3);
  EXPECT_EQ(wronskian(s, s), cplx(0.0));
  for (double p : {2.9, 3.1}) EXPECT_GT(std::abs(resonance_wronskian(Params(p))), 1e-2);
}

TEST(Resolvent, ReflectionSymmetry) {
  const Params prm(2.9);
  const Resolvent R(prm, 1.5);
  const Eigen::Matrix2cd s3 = sigma3();
  double err = 0.0, scale = 0.0;
  for (double x : {-7.0, -2.5, 0.0, 1.3, 6.0})
    for (double y : {-6.5, -1.0, 0.4, 3.0, 8.0}) {
      const Eigen::Matrix2cd a = R.kernel(x, y);
      const Eigen::Matrix2cd b = s3 * R.kernel(-y, -x).transpose() * s3;
      err = std::max(err, max_abs(a - b));
      scale = std::max(scale, max_abs(a));
    }
  EXPECT_LT(err / scale, 1e-6);
}

TEST(Resolvent, GreenFunctionJump) {
  // (H - E) R = delta: across x = y the x-derivative of R jumps by -sigma3.
  const Params prm(3.2);
  const Resolvent R(prm, 2.0);
  const double y = 0.7, d = 1e-5;
  const Eigen::Matrix2cd jump =
      (R.kernel(y + 2 * d, y) - R.kernel(y + d, y)) / d - (R.kernel(y - d, y) - R.kernel(y - 2 * d, y)) / d;
  EXPECT_LT(max_abs(jump + sigma3()), 1e-3);
  EXPECT_LT(max_abs(R.kernel(y + 1e-9, y) - R.kernel(y - 1e-9, y)), 1e-6);
}

TEST(Resolvent, NegativeEnergyRelation) {
  const Params prm(2.9);
  const Resolvent Rp(prm, -1.5);
  const Resolvent Rm(prm, 1.5, -1);
  const Eigen::Matrix2cd s1 = sigma1();
  const Eigen::Matrix2cd diff = Rp.kernel(1.0, -2.0) + s1 * Rm.kernel(1.0, -2.0) * s1;
  EXPECT_LT(max_abs(diff), 1e-12);
}

TEST(Resolvent, MatchingPointIndependence) {
  const Params prm(2.9);
  JostOptions a, b;
  a.X0 = 30.0;
  b.X0 = 40.0;
  const Resolvent Ra(prm, 1.1, 1, a), Rb(prm, 1.1, 1, b);
  for (double x : {-5.0, 0.5, 4.0})
    for (double y : {-3.0, 2.0}) {
      const auto ka = Ra.kernel(x, y);
      EXPECT_LT(max_abs(ka - Rb.kernel(x, y)) / max_abs(ka), 1e-6);
    }
}

TEST(Resolvent, BoundedWeightRatio) {
  const Params prm(2.9);
  double prev = 0.0;
  for (double E : {1.01, 1.1, 1.5, 2.0, 5.0}) {
    const Resolvent R(prm, E);
    double mx = 0.0;
    for (double x = -20.0; x <= 20.0; x += 2.0)
      for (double y = -20.0; y <= 20.0; y += 2.0) mx = std::max(mx, R.sample(x, y).weight_ratio);
    EXPECT_TRUE(std::isfinite(mx));
    EXPECT_LT(mx, 100.0) << "E = " << E;
    if (prev > 0.0) EXPECT_LT(mx, 10.0 * prev + 1.0);
    prev = mx;
  }
}

TEST(Resolvent, LinearGrowthAtCubicResonance) {
  const Params prm(3.0);
  const Resolvent R(prm, 1.0 + 0.05 * 0.05);
  // 0 > x > y: |R| / (1 + |x|) stays within a factor 3 as x moves left.
  std::vector<double> r;
  for (double x : {-4.0, -8.0, -12.0}) r.push_back(R.kernel(x, x - 3.0).norm() / (1.0 - x));
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  EXPECT_LT(*hi / *lo, 3.0);
}

TEST(Resolvent, NearSingularThrows) {
  // E = 1 at p = 3 is the threshold resonance.
  EXPECT_THROW(Resolvent(Params(3.0), 1.0), NumericalError);
}

TEST(Evans, SignChangeAndPositiveNearZero) {
  const Params prm(2.6);
  // Scanned in alpha = sqrt(1 - lambda); the eigenvalue sits close to 1.
  double prev = std::real(evans_gap(prm, 0.3));
  int changes = 0;
  for (double a = 0.8; a > 0.005; a *= 0.8) {
    const double v = std::real(evans_gap(prm, 1.0 - a * a));
    if (v * prev < 0) ++changes;
    prev = v;
  }
  EXPECT_GE(changes, 1);
  EXPECT_GT(std::abs(evans_gap(prm, 1e-3)), 1e-8);
  EXPECT_THROW(evans_gap(prm, 1.0 - 1e-9), NumericalError);
}

TEST(Volterra, AgreesWithOde) {
  const Params prm(2.8);
  for (double k : {0.0, 0.5}) {
    const auto v = volterra_jost(prm, k);
    const auto f1 = jost_solve(prm, k, JostIndex::f1);
    double err = 0.0;
    for (std::size_t i = 0; i < v.x.size(); i += 5) {
      const auto m = f1.m(v.x[i]);
      err = std::max({err, std::abs(m[0] - v.m[i][0]), std::abs(m[1] - v.m[i][1])});
    }
    EXPECT_LT(err, 1e-5) << "k = " << k;
  }
}
