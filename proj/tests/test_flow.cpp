#include <gtest/gtest.h>

#include <cmath>

#include "rhflow/flow.hpp"
#include "rhflow/geometry.hpp"
#include "rhflow/initial_data.hpp"
#include "test_support.hpp"

namespace rhflow {
namespace {

using testing::conformal_metric;
using testing::kTwoPi;
using testing::max_abs;
using testing::max_abs_diff;
using testing::random_field;
using testing::random_metric;
using testing::sample;

Snapshot make_snapshot(const MetricField& g, const MapField& phi, double u_const = 1.0) {
  return Snapshot{0.0, g, phi, ScalarField(g.grid(), ScalarTag::u, u_const)};
}

MapField sine_map(const Grid& grid, double amp) {
  MapField phi(grid, 2);
  phi.components[0] = sample(grid, [&](double x, double y) { return amp * std::sin(kTwoPi * (x + 0.3 * y)); });
  phi.components[1] = sample(grid, [&](double x, double y) { return amp * std::cos(kTwoPi * (x - y)); });
  return phi;
}

double safe_dt(const MetricField& g) { return 0.5 * stability_bound(g, 0.2); }

// ---- schedule ------------------------------------------------------------------

TEST(AlphaSchedule, FormsAreNonIncreasingAndBoundedBelow) {
  for (auto form : {ScheduleForm::constant, ScheduleForm::linear_decay, ScheduleForm::exponential_decay}) {
    const AlphaSchedule s{2.0, 0.5, form, 3.0};
    EXPECT_EQ(s(0.0), 2.0);
    double prev = s(0.0);
    for (int k = 1; k <= 100; ++k) {
      const double a = s(0.02 * k);
      EXPECT_LE(a, prev);
      EXPECT_GE(a, 0.5);
      prev = a;
    }
  }
  EXPECT_THROW((AlphaSchedule{0.5, 1.0, ScheduleForm::constant, 0.0}.validate()), Error);
  EXPECT_THROW((AlphaSchedule{1.0, 0.0, ScheduleForm::constant, 0.0}.validate()), Error);
}

// ---- step_flow -------------------------------------------------------------------

TEST(StepFlow, FlatMetricConstantMapIsFixedPoint) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = MetricField::flat(grid);
  const Snapshot s = make_snapshot(g, MapField(grid, 2, 0.4));
  for (auto integ : {Integrator::euler, Integrator::rk2}) {
    const Snapshot next = step_flow(s, safe_dt(g), AlphaSchedule{3.0, 3.0}, FlowVariant{}, {integ});
    for (std::size_t p = 0; p < grid.size(); ++p) EXPECT_EQ(next.g[p], g[p]);
    for (int mu = 0; mu < 2; ++mu) EXPECT_EQ(next.phi.components[mu], s.phi.components[mu]);
  }
}

TEST(StepFlow, ZeroCouplingOnFlatTorusKeepsMetricStationary) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = MetricField::flat(grid);
  const Snapshot s = make_snapshot(g, sine_map(grid, 0.5));
  // step_flow does not validate the schedule, so alpha = 0 can be stepped directly.
  const Snapshot next = step_flow(s, safe_dt(g), AlphaSchedule{0.0, 0.0}, FlowVariant{});
  for (std::size_t p = 0; p < grid.size(); ++p) EXPECT_EQ(next.g[p], g[p]);
}

TEST(StepFlow, WarpedWithConstantMapIsRicciFlowStep) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 4, 0.1);
  const Snapshot s = make_snapshot(g, MapField(grid, 1, 0.3));
  const double dt = safe_dt(g);
  const Snapshot w = step_flow(s, dt, AlphaSchedule{}, FlowVariant{VariantKind::warped_product, 3, 0.0});
  const Snapshot r = step_flow(s, dt, AlphaSchedule{1.0, 1.0}, FlowVariant{});
  const auto ric = ricci(g);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    EXPECT_EQ(w.g[p], r.g[p]);
    EXPECT_EQ(w.g[p], symmetrized(g[p] + dt * (-2.0 * ric[p])));
  }
  EXPECT_EQ(w.phi.components[0], s.phi.components[0]);
}

TEST(StepFlow, WarpedReactionTermMatchesClosedForm) {
  const Grid grid = Grid::line(16, 1.0);
  const auto g = MetricField::flat(grid);
  const double phi0 = 0.2, mu = -1.5;
  const Snapshot s = make_snapshot(g, MapField(grid, 1, phi0));
  const double dt = safe_dt(g);
  const Snapshot next = step_flow(s, dt, AlphaSchedule{}, FlowVariant{VariantKind::warped_product, 1, mu});
  for (double v : next.phi.components[0]) EXPECT_DOUBLE_EQ(v, phi0 - dt * mu * std::exp(-2.0 * phi0));
}

TEST(StepFlow, StaticVariantLeavesGeometryUntouched) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 2);
  const Snapshot s = make_snapshot(g, sine_map(grid, 1.0));
  const Snapshot next = step_flow(s, safe_dt(g), AlphaSchedule{}, FlowVariant{VariantKind::static_metric});
  for (std::size_t p = 0; p < grid.size(); ++p) EXPECT_EQ(next.g[p], g[p]);
  EXPECT_EQ(next.phi.components, s.phi.components);
}

TEST(StepFlow, RefusesUnstableStep) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = MetricField::flat(grid);
  const Snapshot s = make_snapshot(g, MapField(grid, 1, 0.0));
  EXPECT_THROW(step_flow(s, 1.01 * stability_bound(g, 0.2), AlphaSchedule{}, FlowVariant{}), StabilityViolation);
  EXPECT_THROW(step_heat(s, 1.01 * stability_bound(g, 0.2)), StabilityViolation);
  EXPECT_NO_THROW(step_flow(s, stability_bound(g, 0.2), AlphaSchedule{}, FlowVariant{}));
}

TEST(StepFlow, MetricStaysExactlySymmetric) {
  const Grid grid = Grid::square(16, 1.0);
  Snapshot s = make_snapshot(random_metric(grid, 8), sine_map(grid, 0.3));
  for (int k = 0; k < 20; ++k) {
    s = step_coupled(s, safe_dt(s.g), AlphaSchedule{1.0, 0.5, ScheduleForm::linear_decay, 1.0},
                     FlowVariant{}, {k % 2 ? Integrator::rk2 : Integrator::euler});
    for (const auto& m : s.g.values()) EXPECT_EQ(m(0, 1), m(1, 0));
  }
}

// ---- step_heat -------------------------------------------------------------------

TEST(StepHeat, ConstantDataIsUnchanged) {
  const Grid grid = Grid::square(16, 1.0);
  const auto g = random_metric(grid, 3);
  const Snapshot s = make_snapshot(g, MapField(grid, 1, 0.0), 2.5);
  const ScalarField u = step_heat(s, safe_dt(g));
  for (double v : u.values) EXPECT_NEAR(v, 2.5, 1e-13);
}

TEST(StepHeat, ConservesWeightedMassOnStaticMetric) {
  for (const Grid& grid : {Grid::line(64, 1.0), Grid::square(24, 1.0)}) {
    const auto g = random_metric(grid, 17);
    Snapshot s = make_snapshot(g, MapField(grid, 1, 0.0));
    auto r = random_field(grid, 5);
    for (std::size_t p = 0; p < grid.size(); ++p) s.u[p] = 2.0 + r[p];
    std::vector<double> ones(grid.size(), 1.0);
    const double m0 = weighted_inner(g, s.u.values, ones);
    for (int k = 0; k < 10; ++k) {
      const double before = weighted_inner(g, s.u.values, ones);
      s.u = step_heat(s, safe_dt(g));
      const double after = weighted_inner(g, s.u.values, ones);
      EXPECT_LE(std::abs(after - before), 1e-10 * std::abs(m0));
    }
  }
}

// ---- run ---------------------------------------------------------------------------

struct EigenmodeRun {
  int n;
  double dt;
  double T;
  Integrator integrator;
};

Trajectory eigenmode_run(const EigenmodeRun& e) {
  const Grid grid = Grid::line(e.n, 1.0);
  RunSpec spec{FlowVariant{VariantKind::static_metric}, AlphaSchedule{}, FlowConfig{e.integrator},
               MetricField::flat(grid), MapField(grid, 1, 0.0),
               ScalarField(grid, sample(grid, [](double x, double) { return 2.0 + std::sin(kTwoPi * x); }), ScalarTag::u),
               0.0, e.T, e.dt, 1};
  return run(spec);
}

// Continuous solution u = 2 + exp(-k^2 t) sin(kx).
double continuum_error(const Trajectory& tr) {
  const auto& last = tr.snapshots.back();
  const double decay = std::exp(-kTwoPi * kTwoPi * last.t);
  const auto exact = sample(tr.grid, [&](double x, double) { return 2.0 + decay * std::sin(kTwoPi * x); });
  return max_abs_diff(last.u.values, exact);
}

// Spatially discrete solution: the grid mode decays with the discrete symbol
// 4/h^2 sin^2(kh/2), which isolates the time-stepping error.
double semidiscrete_error(const Trajectory& tr) {
  const auto& last = tr.snapshots.back();
  const double h = tr.grid.h(0);
  const double lam = 4.0 / (h * h) * std::pow(std::sin(0.5 * kTwoPi * h), 2);
  const double decay = std::exp(-lam * last.t);
  const auto exact = sample(tr.grid, [&](double x, double) { return 2.0 + decay * std::sin(kTwoPi * x); });
  return max_abs_diff(last.u.values, exact);
}

TEST(Run, ZeroLengthRunHasSingleSnapshot) {
  const Trajectory tr = eigenmode_run({32, 1e-4, 0.0, Integrator::euler});
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_TRUE(tr.completed());
}

TEST(Run, StaticEigenmodeDecaysAtContinuumRate) {
  const double h = 1.0 / 64;
  const Trajectory tr = eigenmode_run({64, 0.1 * h * h, 0.05, Integrator::euler});
  ASSERT_TRUE(tr.completed());
  EXPECT_NEAR(tr.snapshots.back().t, 0.05, 1e-15);
  // O(dt + h^2) with the leading constants of this mode
  const double k2 = kTwoPi * kTwoPi;
  const double bound = 2.0 * (k2 * k2 * tr.dt + k2 * k2 * h * h / 12.0) * 0.05;
  EXPECT_LT(continuum_error(tr), bound);
}

TEST(Run, EulerTimeErrorIsFirstOrder) {
  const double h = 1.0 / 32, dt = 0.2 * h * h;
  const double coarse = semidiscrete_error(eigenmode_run({32, dt, 0.05, Integrator::euler}));
  const double fine = semidiscrete_error(eigenmode_run({32, dt / 2, 0.05, Integrator::euler}));
  EXPECT_GE(coarse / fine, 1.6);
  EXPECT_LE(coarse / fine, 2.4);
}

TEST(Run, Rk2TimeErrorIsSecondOrder) {
  const double h = 1.0 / 32, dt = 0.2 * h * h;
  const double coarse = semidiscrete_error(eigenmode_run({32, dt, 0.05, Integrator::rk2}));
  const double fine = semidiscrete_error(eigenmode_run({32, dt / 2, 0.05, Integrator::rk2}));
  EXPECT_GE(coarse / fine, 3.2);
  EXPECT_LE(coarse / fine, 4.8);
}

TEST(Run, StepIsShrunkToLandOnFinalTime) {
  const Trajectory tr = eigenmode_run({32, 1e-4, 0.00105, Integrator::euler});
  EXPECT_EQ(tr.snapshots.back().t, 0.00105);
  EXPECT_LE(tr.dt, 1e-4);
  for (std::size_t k = 1; k < tr.snapshots.size(); ++k)
    EXPECT_NEAR(tr.snapshots[k].t - tr.snapshots[k - 1].t, tr.snapshot_spacing(), 1e-15);
}

RunSpec small_data_spec(int n, double dt) {
  const double L = kTwoPi;
  const Grid grid = Grid::square(n, L);
  MetricSpec ms;
  ms.kind = MetricSpec::Kind::conformal;
  Term one{Term::Kind::constant, 1.0};
  Term bump{Term::Kind::gaussian, -0.01};
  bump.center = {L / 2, L / 2};
  bump.width = L / 8;
  ms.factor = {one, bump};
  Term pm1{Term::Kind::mode, 0.01};
  pm1.wavenumber = {1, 0};
  pm1.phase = {-0.5 * std::numbers::pi, 0.0};
  Term pm2{Term::Kind::mode, 0.01};
  pm2.wavenumber = {0, 1};
  Term u0{Term::Kind::constant, 2.0};
  Term um{Term::Kind::mode, 0.5};
  um.wavenumber = {1, 1};
  RunSpec spec{FlowVariant{}, AlphaSchedule{1.0, 0.5, ScheduleForm::exponential_decay, 1.0},
               FlowConfig{Integrator::rk2}, build_metric(grid, ms, 0),
               build_map(grid, {{pm1}, {pm2}}, 0), build_u(grid, {u0, um}, 0), 0.001, 0.1, dt, 1};
  return spec;
}

TEST(Run, SmallDataCompletesWithBoundedMetric) {
  const int n = 32;
  const double h = kTwoPi / n;
  const double dt = 0.1 * h * h;
  const Trajectory a = run(small_data_spec(n, dt));
  ASSERT_TRUE(a.completed()) << a.halt_reason;
  for (const auto& d : a.diagnostics) EXPECT_GT(d.metric_min_eigenvalue, 0.9);
  const Trajectory b = run(small_data_spec(n, dt / 2));
  ASSERT_TRUE(b.completed());
  const auto& ga = a.snapshots.back().g;
  const auto& gb = b.snapshots.back().g;
  double diff = 0.0;
  for (std::size_t p = 0; p < ga.size(); ++p)
    for (int c = 0; c < 4; ++c) diff = std::max(diff, std::abs(ga[p].a[c] - gb[p].a[c]));
  EXPECT_LT(diff, 1e-6);
}

TEST(Run, RecordedAlphaIsMonotoneAndBounded) {
  const int n = 16;
  const double h = kTwoPi / n;
  const Trajectory tr = run(small_data_spec(n, 0.1 * h * h));
  for (std::size_t k = 1; k < tr.diagnostics.size(); ++k) {
    EXPECT_LE(tr.diagnostics[k].alpha, tr.diagnostics[k - 1].alpha);
    EXPECT_GE(tr.diagnostics[k].alpha, 0.5);
  }
}

TEST(Run, IsDeterministic) {
  const int n = 16;
  const double h = kTwoPi / n;
  const Trajectory a = run(small_data_spec(n, 0.1 * h * h));
  const Trajectory b = run(small_data_spec(n, 0.1 * h * h));
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    EXPECT_EQ(a.snapshots[k].t, b.snapshots[k].t);
    EXPECT_EQ(a.snapshots[k].u.values, b.snapshots[k].u.values);
    EXPECT_EQ(a.snapshots[k].phi.components, b.snapshots[k].phi.components);
    EXPECT_EQ(a.snapshots[k].g.values(), b.snapshots[k].g.values());
  }
}

TEST(Run, StrideStoresEveryKthStep) {
  const int n = 16;
  const double h = kTwoPi / n;
  RunSpec spec = small_data_spec(n, 0.1 * h * h);
  spec.T = spec.t_start + 40 * spec.dt;
  spec.stride = 4;
  const Trajectory tr = run(spec);
  EXPECT_EQ(tr.snapshots.size(), 11u);
}

TEST(Run, HaltsWithPartialTrajectoryOnBlowUp) {
  // An oversized stability constant makes explicit stepping unstable; the
  // run must stop with a reason instead of throwing.
  const Grid grid = Grid::square(16, 1.0);
  const auto g = conformal_metric(grid, [](double x, double y) {
    return 0.3 * std::sin(kTwoPi * x) * std::sin(kTwoPi * y);
  });
  const FlowConfig config{Integrator::euler, 5.0};
  RunSpec spec{FlowVariant{}, AlphaSchedule{}, config, g, MapField(grid, 1, 0.0),
               ScalarField(grid, ScalarTag::u, 1.0), 0.0, 1.0, 0.9 * stability_bound(g, 5.0), 1};
  const Trajectory tr = run(spec);
  EXPECT_FALSE(tr.completed());
  EXPECT_FALSE(tr.halt_reason.empty());
  EXPECT_GE(tr.snapshots.size(), 2u);
  EXPECT_LT(tr.snapshots.back().t, 1.0);
}

}  // namespace
}  // namespace rhflow
