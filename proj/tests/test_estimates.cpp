#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rhflow/estimates.hpp"
#include "rhflow/geometry.hpp"
#include "rhflow/initial_data.hpp"
#include "test_support.hpp"
#include "trajectory_support.hpp"

namespace rhflow {
namespace {

using testing::kTwoPi;
using testing::sample;
using testing::static_trajectory;
using testing::uniform_times;
using testing::eigenmode_run;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent evaluation of the printed global bound.
double global_oracle(double k, int n, double C, double a0, double t) {
  return k * n + (n / 2.0 + 4.0 * n * C * a0) / (2.0 * t);
}

// Small rh_alpha run on a perturbed conformal torus.
Trajectory perturbed_run(int n, double eps, double T = 0.02, int stride = 4) {
  const double L = kTwoPi;
  const Grid grid = Grid::square(n, L);
  MetricSpec ms;
  ms.kind = MetricSpec::Kind::conformal;
  Term bump{Term::Kind::gaussian, -eps};
  bump.center = {L / 2, L / 2};
  bump.width = L / 8;
  ms.factor = {Term{Term::Kind::constant, 1.0}, bump};
  Term p1{Term::Kind::mode, 0.01};
  p1.wavenumber = {1, 0};
  Term p2{Term::Kind::mode, 0.01};
  p2.wavenumber = {0, 1};
  Term um{Term::Kind::mode, 0.5};
  um.wavenumber = {1, 1};
  const double h = L / n;
  RunSpec spec{FlowVariant{}, AlphaSchedule{1.0, 0.5, ScheduleForm::exponential_decay, 1.0},
               FlowConfig{Integrator::rk2}, build_metric(grid, ms, 0),
               build_map(grid, {{p1}, {p2}}, 0),
               build_u(grid, {Term{Term::Kind::constant, 2.0}, um}, 0), 0.001, T, 0.09 * h * h, stride};
  return run(spec);
}

// ---- global_rhs ----------------------------------------------------------------

TEST(GlobalRhs, ClassicalValueAtZeroCurvature) {
  EXPECT_DOUBLE_EQ(global_rhs(0.0, 2, 0.0, 1.0, 1.0, GlobalForm::sharp), 1.0);
  EXPECT_DOUBLE_EQ(global_rhs(0.0, 2, 0.0, 1.0, 1.0), 0.5);
}

TEST(GlobalRhs, WorkedExample) {
  EXPECT_NEAR(global_rhs(0.0, 2, 0.3, 1.5, 0.5), 4.6, 1e-12);
  EXPECT_NEAR(global_rhs(0.0, 2, 0.3, 1.5, 0.5), global_oracle(0.0, 2, 0.3, 1.5, 0.5), 1e-12);
}

TEST(GlobalRhs, LargeTimeLimitIsKn) {
  EXPECT_NEAR(global_rhs(1.0, 2, 0.0, 1.0, 1e12), 2.0, 1e-9);
}

TEST(GlobalRhs, RejectsNonPositiveTime) {
  EXPECT_THROW(global_rhs(0.0, 2, 0.0, 1.0, 0.0), Error);
  EXPECT_THROW(global_rhs(0.0, 2, 0.0, 1.0, -1.0), Error);
}

TEST(GlobalRhs, MonotoneInEachArgumentOnSampledTuples) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double k = U(rng), C = U(rng), a0 = U(rng), t = 0.01 + U(rng), d = 0.1 + U(rng);
    for (int n : {1, 2}) {
      const double base = global_rhs(k, n, C, a0, t);
      EXPECT_NEAR(base, global_oracle(k, n, C, a0, t), 1e-12 * base);
      EXPECT_GE(global_rhs(k + d, n, C, a0, t), base);
      EXPECT_GE(global_rhs(k, n, C + d, a0, t), base);
      EXPECT_GE(global_rhs(k, n, C, a0 + d, t), base);
      EXPECT_LT(global_rhs(k, n, C, a0, t + d), base);
    }
  }
}

// ---- local_rhs -----------------------------------------------------------------

TEST(LocalRhs, WorkedExample) {
  EXPECT_NEAR(local_rhs(2.0, 1.0, 1.0, 0.0, 0.0, 10.0, 2), 200.0, 1e-12);
}

TEST(LocalRhs, VanishingLowerBoundDropsLastTerm) {
  const double beta = 3.0, rho = 2.0, t = 0.4, k2 = 0.7, cp = 1.3;
  const double expect = cp * beta * beta * (beta * beta / (rho * (beta - 1.0)) + 1.0 / t + k2);
  EXPECT_NEAR(local_rhs(beta, rho, t, 0.0, k2, cp, 2), expect, 1e-12 * expect);
}

TEST(LocalRhs, LowerBoundTermMatchesClosedForm) {
  const double with = local_rhs(2.0, 1.0, 1.0, 0.5, 0.0, 0.0, 2);
  EXPECT_NEAR(with, 2 * 2.0 * 0.5 / (4.0 * 1.0), 1e-14);
}

TEST(LocalRhs, LargeBetaIsDominatedByBallTerm) {
  const double rho = 1.5, cp = 2.0;
  double prev = 0.0;
  for (double beta : {1e2, 1e3, 1e4}) {
    const double ratio = local_rhs(beta, rho, 1.0, 0.0, 0.0, cp, 2) / (cp * std::pow(beta, 4) / (rho * (beta - 1.0)));
    EXPECT_GT(ratio, 1.0);
    if (prev > 0.0) EXPECT_LT(ratio - 1.0, prev - 1.0);
    prev = ratio;
  }
  EXPECT_LT(prev - 1.0, 1e-3);
}

TEST(LocalRhs, SquaredFormDiffersOnlyInBallTerm) {
  EXPECT_DOUBLE_EQ(local_rhs(2.0, 1.0, 0.3, 0.1, 0.2, 1.0, 2, RhoForm::squared),
                   local_rhs(2.0, 1.0, 0.3, 0.1, 0.2, 1.0, 2, RhoForm::printed));
  const double p = local_rhs(2.0, 3.0, 0.3, 0.0, 0.0, 1.0, 2, RhoForm::printed);
  const double s = local_rhs(2.0, 3.0, 0.3, 0.0, 0.0, 1.0, 2, RhoForm::squared);
  EXPECT_NEAR(p - s, 4.0 * (4.0 / 3.0 - 4.0 / 9.0), 1e-12);
}

TEST(LocalRhs, InfiniteRadiusDropsBallTerm) {
  EXPECT_NEAR(local_rhs(2.0, kInf, 0.5, 0.0, 0.0, 1.0, 2), 4.0 * 2.0, 1e-12);
}

TEST(LocalRhs, RejectsInvalidArguments) {
  EXPECT_THROW(local_rhs(1.0, 1.0, 1.0, 0, 0, 1, 2), Error);
  EXPECT_THROW(local_rhs(0.5, 1.0, 1.0, 0, 0, 1, 2), Error);
  EXPECT_THROW(local_rhs(2.0, 0.0, 1.0, 0, 0, 1, 2), Error);
  EXPECT_THROW(local_rhs(2.0, 1.0, 0.0, 0, 0, 1, 2), Error);
}

// ---- constants -------------------------------------------------------------------

TEST(ExtractConstants, FlatStaticConstantMapGivesZeros) {
  const Grid grid = Grid::square(16, 1.0);
  const auto tr = static_trajectory(grid, uniform_times(0.0, 0.1, 4), [](double, double, double) { return 1.0; });
  const auto c = extract_constants(tr);
  EXPECT_EQ(c.k1, 0.0);
  EXPECT_EQ(c.k2, 0.0);
  EXPECT_EQ(c.C_phi, 0.0);
  EXPECT_TRUE(c.ric_nonneg);
}

TEST(ExtractConstants, OneDimensionalMapConstantMatchesStencil) {
  const int n = 64;
  const Grid grid = Grid::line(n, 1.0);
  const double A = 0.3, k = kTwoPi, h = 1.0 / n;
  const auto times = uniform_times(0.0, 0.05, 5);
  const auto tr = static_trajectory(
      grid, times, [](double, double, double) { return 1.0; },
      [&](double x, double, double) { return A * std::sin(k * x); });
  const auto c = extract_constants(tr);
  EXPECT_EQ(c.k1, 0.0);
  EXPECT_EQ(c.k2, 0.0);
  // centred difference of sin(kx) at x = 0: sin(kh)/h
  const double slope = A * std::sin(k * h) / h;
  EXPECT_NEAR(c.C_phi, times.back() * slope * slope, 1e-12 * c.C_phi);
}

TEST(ExtractConstants, EmptyRegionThrows) {
  const Grid grid = Grid::line(16, 1.0);
  const auto tr = static_trajectory(grid, uniform_times(0.0, 0.1, 3), [](double, double, double) { return 1.0; });
  EXPECT_THROW(extract_constants(tr, Ball{0, 0.0}), Error);
}

TEST(ExtractConstants, LowerCurvatureBoundShrinksWithPerturbation) {
  const auto a = extract_constants(perturbed_run(32, 0.02));
  const auto b = extract_constants(perturbed_run(32, 0.01));
  ASSERT_GT(a.k1, 0.0);
  ASSERT_TRUE(std::isfinite(a.k1) && std::isfinite(a.k2) && std::isfinite(a.C_phi));
  const double ratio = a.k1 / b.k1;
  EXPECT_GT(ratio, 1.6);
  EXPECT_LT(ratio, 2.4);
}

// ---- Li-Yau quantity ---------------------------------------------------------------

TEST(LiYauQuantity, ConstantSolutionGivesZero) {
  const Grid grid = Grid::square(8, 1.0);
  const auto tr = static_trajectory(grid, uniform_times(0.0, 0.1, 3), [](double, double, double) { return 3.0; });
  for (double beta : {1.0, 2.0}) {
    const auto q = liyau_quantity(tr.snapshots[0], tr.snapshots[1], beta);
    for (double v : q.values) EXPECT_EQ(v, 0.0);
    const auto qk = liyau_quantity(tr, 1, beta);
    for (double v : qk.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(LiYauQuantity, BetaEnterAsExactAffineShift) {
  const auto tr = eigenmode_run(32, 0.01);
  for (std::size_t k : {std::size_t{0}, std::size_t{3}, tr.snapshots.size() - 1}) {
    const auto q1 = liyau_quantity(tr, k, 1.0);
    const auto ft = log_time_derivative(tr, k);
    for (double beta : {1.5, 4.0}) {
      const auto qb = liyau_quantity(tr, k, beta);
      for (std::size_t p = 0; p < qb.size(); ++p) {
        EXPECT_NEAR(qb[p], q1[p] + (beta - 1.0) * (-ft[p]), 1e-12 * (1.0 + std::abs(qb[p])));
      }
    }
  }
}

TEST(LiYauQuantity, RejectsNonPositiveSolution) {
  ScalarField u(Grid::line(8, 1.0), ScalarTag::generic, 1.0);
  u[3] = 0.0;
  EXPECT_THROW(log_field(u), Error);
}

// Closed form for u = 2 + exp(-k^2 t) sin(kx).
double eigenmode_error(int n) {
  const auto tr = eigenmode_run(n, 0.02);
  const double k = kTwoPi;
  const std::size_t mid = tr.snapshots.size() / 2;
  const double t = tr.snapshots[mid].t;
  const auto q = liyau_quantity(tr, mid, 2.0);
  double err = 0.0;
  for (std::size_t p = 0; p < q.size(); ++p) {
    const double x = tr.grid.coordinate(p, 0);
    const double e = std::exp(-k * k * t);
    const double u = 2.0 + e * std::sin(k * x);
    const double ux = k * e * std::cos(k * x);
    const double ut = -k * k * e * std::sin(k * x);
    err = std::max(err, std::abs(q[p] - ((ux / u) * (ux / u) - 2.0 * ut / u)));
  }
  return err;
}

TEST(LiYauQuantity, EigenmodeMatchesClosedFormAtSecondOrder) {
  const double coarse = eigenmode_error(32);
  const double fine = eigenmode_error(64);
  EXPECT_GE(coarse / fine, 3.2) << coarse << " " << fine;
  EXPECT_LE(coarse / fine, 4.8) << coarse << " " << fine;
}

TEST(LiYauQuantity, HeatKernelNearCentreIsClassicalValue) {
  const int n = 512;
  const double L = 2.0, t0 = 0.005;
  const Grid grid = Grid::line(n, L);
  Term hk{Term::Kind::heat_kernel, 1.0};
  hk.center = {L / 2, 0.0};
  hk.time = t0;
  const double h = L / n;
  RunSpec spec{FlowVariant{VariantKind::static_metric}, AlphaSchedule{}, FlowConfig{},
               MetricField::flat(grid), MapField(grid, 1), build_u(grid, {hk}, 0), t0, 0.02,
               0.15 * h * h, 200};
  const auto tr = run(spec);
  ASSERT_TRUE(tr.completed());
  for (std::size_t k = 1; k + 1 < tr.snapshots.size(); ++k) {
    const auto q = liyau_quantity(tr, k, 1.0);
    double mx = -kInf;
    for (double v : q.values) mx = std::max(mx, v);
    const double classical = 1.0 / (2.0 * tr.snapshots[k].t);
    EXPECT_NEAR(mx / classical, 1.0, 0.05) << "t = " << tr.snapshots[k].t;
  }
}

// ---- checks ---------------------------------------------------------------------------

TEST(CheckGlobal, EigenmodeMarginsAreNonNegative) {
  const auto tr = eigenmode_run(32);
  const auto r = check_global(tr);
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.worst_margin, 0.0);
  EXPECT_EQ(r.excluded_points, 0u);
  EXPECT_EQ(r.gated_fraction(), 1.0);
  for (double t : r.times) EXPECT_GT(t, 0.0);
  EXPECT_EQ(r.rows.size(), tr.snapshots.size() - 1);
}

TEST(CheckGlobal, WorstMarginUsesGatedPointsOnly) {
  const auto tr = perturbed_run(24, 0.05, 0.01);
  const auto r = check_global(tr);
  ASSERT_GT(r.excluded_points, 0u);
  ASSERT_GT(r.gated_points, 0u);
  double worst = kInf, worst_all = kInf;
  for (std::size_t i = 0; i < r.margin.size(); ++i) {
    for (std::size_t p = 0; p < r.margin[i].size(); ++p) {
      worst_all = std::min(worst_all, r.margin[i][p]);
      if (r.gated[i][p]) worst = std::min(worst, r.margin[i][p]);
    }
  }
  EXPECT_EQ(r.worst_margin, worst);
  EXPECT_FALSE(r.constants.ric_nonneg);
}

TEST(CheckGlobal, ToleranceFollowsDefinition) {
  const auto tr = eigenmode_run(32);
  EstimateSettings s;
  s.c_tol = 3.0;
  const auto r = check_global(tr, s);
  double scale = 0.0;
  for (const auto& row : r.lhs)
    for (double v : row) scale = std::max(scale, std::abs(v));
  const double h = tr.grid.h_max(), dt = tr.snapshot_spacing();
  EXPECT_NEAR(r.tol_num, 3.0 * (h * h + dt) * scale, 1e-15);
}

TEST(CheckGlobal, WindowRestrictsRows) {
  const auto tr = eigenmode_run(32);
  EstimateSettings s;
  s.window = std::make_pair(0.02, 0.03);
  const auto r = check_global(tr, s);
  ASSERT_FALSE(r.times.empty());
  for (double t : r.times) {
    EXPECT_GE(t, 0.02 - 1e-12);
    EXPECT_LE(t, 0.03 + 1e-12);
  }
}

TEST(CheckLocal, RadiusBeyondDiameterGatesEverythingAndFitIsTight) {
  const auto tr = eigenmode_run(32);
  const double rho = 10.0;  // torus diameter is 0.5
  const double cp = fit_cprime(tr, 2.0, rho, 0);
  const auto r = check_local(tr, 2.0, rho, 0, cp);
  EXPECT_EQ(r.excluded_points, 0u);
  EXPECT_GE(r.worst_margin, -1e-12);
  const auto above = check_local(tr, 2.0, rho, 0, 1.5 * cp);
  EXPECT_GT(above.worst_margin, 0.0);
  if (cp > 0.0) {
    const auto below = check_local(tr, 2.0, rho, 0, 0.9 * cp);
    EXPECT_LT(below.worst_margin, 0.0);
  }
}

TEST(CheckLocal, InnerBallIsGatedByGeodesicDistance) {
  const auto tr = eigenmode_run(32);
  const std::size_t x0 = 16;
  const double rho = 0.25;
  const auto r = check_local(tr, 2.0, rho, x0, 1.0);
  for (std::size_t i = 0; i < r.gated.size(); ++i) {
    for (std::size_t p = 0; p < r.gated[i].size(); ++p) {
      const double d = std::abs(tr.grid.coordinate(p, 0) - tr.grid.coordinate(x0, 0));
      const double dist = std::min(d, 1.0 - d);
      if (std::abs(dist - rho / 2) > 1e-9) EXPECT_EQ(bool(r.gated[i][p]), dist < rho / 2) << p;
    }
  }
}

TEST(CheckLocal, RejectsBetaAtMostOne) {
  const auto tr = eigenmode_run(16, 0.01);
  EXPECT_THROW(check_local(tr, 1.0, 1.0, 0, 1.0), Error);
}

// ---- identities ------------------------------------------------------------------------

TEST(Identities, FlatStaticLaplacianEvolutionCommutes) {
  const auto tr = eigenmode_run(32, 0.01);
  const auto r = identity_residuals(tr, 2);
  EXPECT_LE(r.max_abs[1], 1e-8 * r.scale[1]);
}

// (|grad f|^2)_t against 2 grad f . grad f_t: only the discrete product rule
// in time is inexact, so the residual is O(dt^2) at fixed h.
TEST(Identities, FlatStaticGradientEvolutionIsSecondOrderInTime) {
  const auto a = eigenmode_run(32, 0.01, 8);
  const auto b = eigenmode_run(32, 0.01, 4);
  const std::size_t k = 2;
  ASSERT_NEAR(a.snapshots[k].t, b.snapshots[2 * k].t, 1e-15);
  const double ratio = identity_residuals(a, k).max_abs[0] / identity_residuals(b, 2 * k).max_abs[0];
  EXPECT_GE(ratio, 3.2);
  EXPECT_LE(ratio, 4.8);
}

double bochner_flat_error(int n) {
  const auto tr = eigenmode_run(n, 0.005);
  return identity_residuals(tr, 1).max_abs[2];
}

TEST(Identities, FlatBochnerResidualIsStencilError) {
  const double coarse = bochner_flat_error(32);
  const double fine = bochner_flat_error(64);
  EXPECT_GE(coarse / fine, 3.2);
  EXPECT_LE(coarse / fine, 4.8);
}

TEST(Identities, NeedInteriorSnapshot) {
  const auto tr = eigenmode_run(16, 0.01);
  EXPECT_THROW(identity_residuals(tr, 0), Error);
  EXPECT_THROW(identity_residuals(tr, tr.snapshots.size() - 1), Error);
}

TEST(Identities, RejectWarpedVariant) {
  auto tr = eigenmode_run(16, 0.01);
  tr.variant.kind = VariantKind::warped_product;
  EXPECT_THROW(identity_residuals(tr, 1), Error);
}

// ---- evolution inequality ---------------------------------------------------------------------------

TEST(Lemma21, ConstraintIsEnforced) {
  const auto tr = eigenmode_run(16, 0.01);
  EXPECT_THROW(lemma21_check(tr, 1.0, 0.5, 0.3), Error);
  EXPECT_NO_THROW(lemma21_check(tr, 1.0, 0.5, 0.25));
}

TEST(Lemma21, FlatEigenmodeAtBetaOnePasses) {
  const auto tr = eigenmode_run(32);
  const auto r = lemma21_check(tr, 1.0, 0.5, 0.25);
  EXPECT_TRUE(r.passed()) << r.worst_margin << " vs " << r.tol_num;
}

TEST(Lemma21, PerturbedRunPasses) {
  const auto tr = perturbed_run(32, 0.01, 0.03, 1);
  const double beta = 1.5;
  const auto r = lemma21_check(tr, beta, 1.0 / (3 * beta), 1.0 / (3 * beta));
  EXPECT_TRUE(r.passed()) << r.worst_margin << " vs " << r.tol_num;
}

}  // namespace
}  // namespace rhflow
