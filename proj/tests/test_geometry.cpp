#include <gtest/gtest.h>

#include <cmath>

#include "convergence_oracles.hpp"
#include "rhflow/geometry.hpp"

namespace rhflow {
namespace {

using namespace rhflow::testing;

void expect_second_order(double (*error)(int), int n) {
  const double coarse = error(n);
  const double fine = error(2 * n);
  const double factor = coarse / fine;
  EXPECT_GE(factor, 3.2) << "coarse " << coarse << " fine " << fine;
  EXPECT_LE(factor, 4.8) << "coarse " << coarse << " fine " << fine;
}

// ---- christoffel -------------------------------------------------------------

TEST(Christoffel, FlatMetricHasZeroSymbols) {
  const Grid grid = Grid::square(16, 1.0);
  const auto G = christoffel(MetricField::flat(grid));
  for (const auto& a : G.values)
    for (double v : a) EXPECT_EQ(v, 0.0);
}

TEST(Christoffel, ConformalLineMatchesDerivativeOfConformalFactor) {
  EXPECT_LT(christoffel_error_1d(64), 2e-2);
  expect_second_order(christoffel_error_1d, 64);
}

TEST(Christoffel, InvariantUnderConstantScaling) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 3);
  const auto a = christoffel(g);
  const auto b = christoffel(g.scaled(3.7));
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int c = 0; c < 8; ++c) EXPECT_NEAR(a.values[p][c], b.values[p][c], 1e-12);
}

TEST(Christoffel, SymmetricInLowerIndices) {
  const Grid grid = Grid::square(16, 1.0);
  const auto G = christoffel(random_metric(grid, 5));
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int k = 0; k < 2; ++k) EXPECT_EQ(G(p, k, 0, 1), G(p, k, 1, 0));
}

// ---- curvature ---------------------------------------------------------------

TEST(Ricci, VanishesInDimensionOne) {
  const Grid grid = Grid::line(32, 1.0);
  const auto ric = ricci(conformal_metric(grid, [](double x, double) { return 0.3 * std::sin(kTwoPi * x); }));
  for (const auto& m : ric.values) EXPECT_EQ(m(0, 0), 0.0);
  const auto R = scalar_curvature(random_metric(grid, 2));
  EXPECT_EQ(max_abs(R.values), 0.0);
}

TEST(Ricci, FlatTorusIsRicciFlat) {
  const Grid grid = Grid::square(16, 2.0);
  const auto ric = ricci(MetricField::flat(grid));
  for (const auto& m : ric.values)
    for (double v : m.a) EXPECT_EQ(v, 0.0);
}

TEST(Ricci, ConformalTorusMatchesClosedForm) {
  EXPECT_LT(ricci_error(64), 0.05);
  expect_second_order(ricci_error, 64);
}

TEST(ScalarCurvature, ConformalTorusMatchesClosedForm) {
  expect_second_order(scalar_curvature_error, 64);
}

TEST(Ricci, OutputIsSymmetric) {
  const Grid grid = Grid::square(16, 1.0);
  const auto ric = ricci(random_metric(grid, 9));
  for (const auto& m : ric.values) EXPECT_EQ(m(0, 1), m(1, 0));
}

// ---- Laplace-Beltrami --------------------------------------------------------

TEST(LaplaceBeltrami, AnnihilatesConstants) {
  const Grid grid = Grid::square(16, 1.0);
  const ScalarField s(grid, ScalarTag::generic, 3.5);
  const auto lap = laplace_beltrami(random_metric(grid, 4), s);
  EXPECT_LT(max_abs(lap.values), 1e-12);
}

TEST(LaplaceBeltrami, FlatEigenfunctionConvergesAtSecondOrder) {
  expect_second_order(laplace_error_1d, 64);
}

TEST(LaplaceBeltrami, ConformalTorusConvergesAtSecondOrder) {
  expect_second_order(laplace_error_2d_conformal, 64);
}

TEST(LaplaceBeltrami, WeightedSumTelescopes) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const Grid grid = Grid::square(24, 1.3);
    const auto g = random_metric(grid, seed);
    const auto s = random_field(grid, seed + 100);
    const auto lap = laplace_beltrami(g, s);
    std::vector<double> ones(grid.size(), 1.0);
    const double total = weighted_inner(g, lap.values, ones);
    EXPECT_LT(std::abs(total), 1e-11 * max_abs(lap.values));
  }
}

TEST(LaplaceBeltrami, SelfAdjointInWeightedInnerProduct) {
  for (unsigned seed : {1u, 7u, 13u}) {
    for (const Grid& grid : {Grid::line(40, 1.0), Grid::square(20, 1.0)}) {
      const auto g = random_metric(grid, seed);
      const auto a = random_field(grid, seed + 1);
      const auto b = random_field(grid, seed + 2);
      const LaplaceBeltrami lap(g);
      const auto la = lap(a), lb = lap(b);
      const double lhs = weighted_inner(g, la.values, b.values);
      const double rhs = weighted_inner(g, a.values, lb.values);
      const double na = std::sqrt(weighted_inner(g, a.values, a.values));
      const double nb = std::sqrt(weighted_inner(g, b.values, b.values));
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * na * nb);
    }
  }
}

// ---- gradients, Hessian ------------------------------------------------------

TEST(GradientNormSq, ConstantHasZeroGradient) {
  const Grid grid = Grid::square(16, 1.0);
  const auto gn = gradient_norm_sq(random_metric(grid, 1), ScalarField(grid, ScalarTag::generic, 2.0));
  EXPECT_EQ(max_abs(gn.values), 0.0);
}

TEST(GradientNormSq, SineProfileConvergesAtSecondOrder) {
  expect_second_order(gradient_error_1d, 64);
}

TEST(GradientNormSq, ConformalTorusConvergesAtSecondOrder) {
  expect_second_order(gradient_error_2d_conformal, 64);
}

TEST(GradientNormSq, ScalesInverselyWithMetric) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 6);
  const auto s = random_field(grid, 8);
  const auto a = gradient_norm_sq(g, s);
  const auto b = gradient_norm_sq(g.scaled(2.5), s);
  for (std::size_t p = 0; p < grid.size(); ++p) EXPECT_NEAR(b[p], a[p] / 2.5, 1e-12 * (1 + a[p]));
}

TEST(Hessian, FlatMetricGivesPlainSecondDifferences) {
  const Grid grid = Grid::square(16, 1.0);
  const auto s = random_field(grid, 3);
  const auto H = hessian(MetricField::flat(grid), s);
  const double h = grid.h(0);
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      const std::size_t p = grid.index(i, j);
      const double dxx = (s[grid.index(i + 1, j)] - 2 * s[p] + s[grid.index(i - 1, j)]) / (h * h);
      EXPECT_NEAR(H[p](0, 0), dxx, 1e-9);
    }
  }
}

TEST(Hessian, ConstantFieldGivesZeroTensor) {
  const Grid grid = Grid::square(16, 1.0);
  const auto H = hessian(random_metric(grid, 2), ScalarField(grid, ScalarTag::generic, -1.0));
  for (const auto& m : H.values)
    for (double v : m.a) EXPECT_EQ(v, 0.0);
}

TEST(Hessian, TraceMatchesLaplacianUnderRefinement) {
  expect_second_order(hessian_trace_gap, 64);
}

// ---- map-derived tensors -----------------------------------------------------

TEST(GradPhiOuter, ConstantMapGivesZero) {
  const Grid grid = Grid::square(16, 1.0);
  const auto P = grad_phi_outer(MetricField::flat(grid), MapField(grid, 3, 0.7));
  for (const auto& m : P.values)
    for (double v : m.a) EXPECT_EQ(v, 0.0);
}

TEST(GradPhiOuter, IsPositiveSemiDefiniteEverywhere) {
  const Grid grid = Grid::square(20, 1.0);
  MapField phi(grid, 2);
  phi.components[0] = random_field(grid, 1).values;
  phi.components[1] = random_field(grid, 2).values;
  const auto g = random_metric(grid, 3);
  const auto P = grad_phi_outer(g, phi);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    EXPECT_GE(sym_eigen(P[p], 2).first, -1e-12 * trace(P[p], 2));
  }
}

TEST(GradPhiOuter, SineMapConvergesAtSecondOrder) { expect_second_order(phi_outer_error_1d, 64); }

TEST(STensor, ReducesToRicciForConstantMapOrZeroCoupling) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 12);
  MapField phi(grid, 1);
  phi.components[0] = random_field(grid, 4).values;
  const auto ric = ricci(g);
  const auto S0 = s_tensor(g, phi, 0.0);
  const auto Sc = s_tensor(g, MapField(grid, 1, 2.0), 1.5);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    EXPECT_EQ(S0[p], ric[p]);
    EXPECT_EQ(Sc[p], ric[p]);
  }
  const auto R = scalar_curvature(g);
  const auto S = s_scalar(g, MapField(grid, 1, 2.0), 1.5);
  EXPECT_EQ(max_abs_diff(R.values, S.values), 0.0);
}

TEST(STensor, SineMapOnFlatLineConvergesAtSecondOrder) { expect_second_order(s_tensor_error_1d, 64); }

TEST(STensor, BoundedAboveByRicciInPsdOrder) {
  const Grid grid = Grid::square(20, 1.0);
  const auto g = random_metric(grid, 21);
  MapField phi(grid, 2);
  phi.components[0] = random_field(grid, 5).values;
  phi.components[1] = random_field(grid, 6).values;
  const auto ric = ricci(g);
  for (double alpha : {0.0, 0.5, 2.0}) {
    const auto S = s_tensor(g, phi, alpha);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const Mat2 gap = ric[p] - S[p];
      EXPECT_GE(sym_eigen(gap, 2).first, -1e-10 * (1.0 + std::abs(trace(ric[p], 2))));
    }
  }
}

TEST(EnergyDensity, IsTraceOfOuterProduct) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 2);
  MapField phi(grid, 1);
  phi.components[0] = random_field(grid, 9).values;
  const auto e = energy_density(g, phi);
  const auto t = trace(g, grad_phi_outer(g, phi));
  EXPECT_EQ(max_abs_diff(e.values, t.values), 0.0);
}

TEST(TensionField, ConstantMapHasZeroTension) {
  const Grid grid = Grid::square(16, 1.0);
  const auto tau = tension_field(random_metric(grid, 1), MapField(grid, 2, 0.25));
  for (const auto& c : tau.components) EXPECT_LT(max_abs(c), 1e-12);
}

TEST(TensionField, FlatEigenfunctionConvergesAtSecondOrder) { expect_second_order(tension_error_1d, 64); }

// ---- geodesic distance -------------------------------------------------------

TEST(GeodesicDistance, ZeroAtSource) {
  const Grid grid = Grid::square(16, 1.0);
  const auto d = geodesic_distance(random_metric(grid, 1), grid.index(3, 4));
  EXPECT_EQ(d[grid.index(3, 4)], 0.0);
}

TEST(GeodesicDistance, FlatCircleIsExact) {
  const Grid grid = Grid::line(64, 1.0);
  const std::size_t x0 = 10;
  const auto d = geodesic_distance(MetricField::flat(grid), x0);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double dx = std::abs(grid.coordinate(p, 0) - grid.coordinate(x0, 0));
    EXPECT_NEAR(d[p], std::min(dx, 1.0 - dx), 1e-12);
  }
}

TEST(GeodesicDistance, FlatTorusAxisExactDiagonalWithinMetricationBound) {
  const Grid grid = Grid::square(32, 1.0);
  const auto d = geodesic_distance(MetricField::flat(grid), grid.index(0, 0));
  for (std::size_t p = 0; p < grid.size(); ++p) {
    auto c = grid.coords(p);
    const double dx = std::abs(grid.wrapped_delta(0, c[0], 0)) * grid.h(0);
    const double dy = std::abs(grid.wrapped_delta(0, c[1], 1)) * grid.h(1);
    const double exact = std::hypot(dx, dy);
    if (dx == 0.0 || dy == 0.0 || dx == dy) {
      EXPECT_NEAR(d[p], exact, 1e-12);
    } else {
      EXPECT_GE(d[p], exact - 1e-12);
      // 8-stencil metrication: worst ratio is cos(t) + (sqrt2 - 1) sin(t) <= 1.0824
      EXPECT_LE(d[p], 1.0824 * exact);
    }
  }
}

double geodesic_error_1d(int n) {
  // g = exp(2w) dx^2, w = 0.2 sin(2 pi x): distance from 0 to x is int_0^x e^w.
  const double L = 1.0;
  const Grid grid = Grid::line(n, L);
  const auto g = conformal_metric(grid, [](double x, double) { return 0.2 * std::sin(kTwoPi * x); });
  const auto d = geodesic_distance(g, 0);
  // exact forward/backward arc lengths by composite Simpson on a fine grid
  const int fine = 64 * n;
  std::vector<double> cum(fine + 1, 0.0);
  const double hf = L / fine;
  auto f = [](double x) { return std::exp(0.2 * std::sin(kTwoPi * x)); };
  for (int i = 0; i < fine; ++i) {
    const double a = i * hf;
    cum[i + 1] = cum[i] + hf / 6.0 * (f(a) + 4.0 * f(a + 0.5 * hf) + f(a + hf));
  }
  double err = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double fwd = cum[p * 64];
    const double exact = std::min(fwd, cum[fine] - fwd);
    err = std::max(err, std::abs(d[p] - exact));
  }
  return err;
}

TEST(GeodesicDistance, AxisAlignedConvergesUnderRefinement) {
  const double coarse = geodesic_error_1d(64);
  const double fine = geodesic_error_1d(128);
  // At least first order; endpoint-averaged edges along an axis-aligned geodesic
  // are in fact second order.
  EXPECT_GE(coarse / fine, 1.6) << coarse << " " << fine;
  EXPECT_LE(coarse / fine, 4.8) << coarse << " " << fine;
}

// ---- translation equivariance -----------------------------------------------

TEST(Operators, CommuteWithPeriodicShift) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 31);
  const auto s = random_field(grid, 32);
  const int si = 5, sj = 3;
  std::vector<Mat2> gs(grid.size());
  ScalarField ss(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    gs[grid.offset(p, si, sj)] = g[p];
    ss[grid.offset(p, si, sj)] = s[p];
  }
  const MetricField gshift(grid, gs);

  const auto lap = laplace_beltrami(g, s), lap_s = laplace_beltrami(gshift, ss);
  const auto ric = ricci(g), ric_s = ricci(gshift);
  const auto gn = gradient_norm_sq(g, s), gn_s = gradient_norm_sq(gshift, ss);
  const auto H = hessian(g, s), H_s = hessian(gshift, ss);
  const auto d = geodesic_distance(g, 0), d_s = geodesic_distance(gshift, grid.offset(0, si, sj));
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const std::size_t q = grid.offset(p, si, sj);
    EXPECT_EQ(lap[p], lap_s[q]);
    EXPECT_EQ(ric[p], ric_s[q]);
    EXPECT_EQ(gn[p], gn_s[q]);
    EXPECT_EQ(H[p], H_s[q]);
    EXPECT_NEAR(d[p], d_s[q], 1e-12);
  }
}

}  // namespace
}  // namespace rhflow
