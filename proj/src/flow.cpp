#include "rhflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rhflow/geometry.hpp"

namespace rhflow {

double AlphaSchedule::operator()(double t) const {
  switch (form) {
    case ScheduleForm::constant:
      return alpha0;
    case ScheduleForm::linear_decay:
      return std::max(alpha_min, alpha0 - rate * t);
    case ScheduleForm::exponential_decay:
      return alpha_min + (alpha0 - alpha_min) * std::exp(-rate * t);
  }
  return alpha0;
}

void AlphaSchedule::validate() const {
  if (!(alpha_min > 0.0)) throw Error("schedule: alpha_min must be > 0");
  if (!(alpha0 >= alpha_min)) throw Error("schedule: alpha0 must be >= alpha_min");
  if (!(rate >= 0.0)) throw Error("schedule: rate must be >= 0");
}

void FlowVariant::validate(int map_dim) const {
  if (kind == VariantKind::warped_product) {
    if (m < 1) throw Error("variant: warped_product requires m >= 1");
    if (map_dim != 1) throw Error("variant: warped_product requires a scalar map (d = 1)");
  }
}

const char* to_string(ScheduleForm form) {
  switch (form) {
    case ScheduleForm::constant: return "constant";
    case ScheduleForm::linear_decay: return "linear";
    case ScheduleForm::exponential_decay: return "exponential";
  }
  return "constant";
}

const char* to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::rh_alpha: return "rh_alpha";
    case VariantKind::warped_product: return "warped_product";
    case VariantKind::static_metric: return "static";
  }
  return "rh_alpha";
}

const char* to_string(Integrator integrator) {
  return integrator == Integrator::rk2 ? "rk2" : "euler";
}

std::optional<std::size_t> Trajectory::find_time(double t) const {
  const double tol = 1e-9 * std::max(snapshot_spacing(), 1e-300);
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    if (std::abs(snapshots[k].t - t) <= tol) return k;
  }
  return std::nullopt;
}

double stability_bound(const MetricField& g, double c_stab) {
  const double h = g.grid().h_min();
  return c_stab * h * h * g.min_eigenvalue();
}

namespace {

struct Rates {
  std::vector<Mat2> dg;
  std::vector<std::vector<double>> dphi;
};

void require_stable(const MetricField& g, double dt, double c_stab) {
  const double bound = stability_bound(g, c_stab);
  if (!(dt > 0.0) || dt > bound) {
    std::ostringstream os;
    os << "stability bound violated: dt = " << dt << " exceeds c_stab*h^2*lambda_min = "
       << bound;
    throw StabilityViolation(os.str());
  }
}

Rates flow_rates(const MetricField& g, const MapField& phi, double t,
                 const AlphaSchedule& schedule, const FlowVariant& variant) {
  Rates r;
  const std::size_t N = g.size();
  r.dg.assign(N, Mat2{});
  r.dphi.assign(phi.components.size(), std::vector<double>(N, 0.0));
  if (variant.kind == VariantKind::static_metric) return r;

  const double coupling =
      variant.kind == VariantKind::warped_product ? double(variant.m) : schedule(t);
  const TensorField2 ric = ricci(g);
  const TensorField2 P = grad_phi_outer(g, phi);
  for (std::size_t p = 0; p < N; ++p) r.dg[p] = -2.0 * ric[p] + 2.0 * coupling * P[p];

  const LaplaceBeltrami lap(g);
  for (int mu = 0; mu < phi.d(); ++mu) lap.apply(phi.components[mu], r.dphi[mu]);
  if (variant.kind == VariantKind::warped_product) {
    auto& d = r.dphi[0];
    const auto& f = phi.components[0];
    for (std::size_t p = 0; p < N; ++p) d[p] -= variant.mu * std::exp(-2.0 * f[p]);
  }
  return r;
}

MetricField advance_metric(const MetricField& g, const std::vector<Mat2>& dg, double dt) {
  std::vector<Mat2> next(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) next[p] = symmetrized(g[p] + dt * dg[p]);
  return MetricField(g.grid(), std::move(next));
}

MapField advance_map(const MapField& phi, const std::vector<std::vector<double>>& dphi,
                     double dt) {
  MapField next = phi;
  for (std::size_t mu = 0; mu < next.components.size(); ++mu) {
    auto& c = next.components[mu];
    for (std::size_t p = 0; p < c.size(); ++p) c[p] += dt * dphi[mu][p];
  }
  check_finite(next, "step_flow");
  return next;
}

ScalarField advance_heat(const ScalarField& u, const std::vector<double>& du, double dt,
                         double t) {
  std::vector<double> next(u.size());
  for (std::size_t p = 0; p < u.size(); ++p) {
    next[p] = u[p] + dt * du[p];
    if (!(next[p] > 0.0)) {
      std::ostringstream os;
      os << "positivity lost at node " << p << " near t = " << t
         << " (dt too large or data not smooth)";
      throw PositivityLost(os.str());
    }
  }
  return ScalarField(u.grid, std::move(next), ScalarTag::u);
}

std::vector<double> heat_rate(const MetricField& g, const ScalarField& u) {
  std::vector<double> du(u.size());
  LaplaceBeltrami(g).apply(u.values, du);
  return du;
}

}  // namespace

Snapshot step_flow(const Snapshot& s, double dt, const AlphaSchedule& schedule,
                   const FlowVariant& variant, const FlowConfig& config) {
  require_stable(s.g, dt, config.c_stab);
  Snapshot next = s;
  next.t = s.t + dt;
  if (variant.kind == VariantKind::static_metric) return next;

  if (config.integrator == Integrator::euler) {
    const Rates r = flow_rates(s.g, s.phi, s.t, schedule, variant);
    next.g = advance_metric(s.g, r.dg, dt);
    next.phi = advance_map(s.phi, r.dphi, dt);
    return next;
  }
  const Rates r1 = flow_rates(s.g, s.phi, s.t, schedule, variant);
  const MetricField g_mid = advance_metric(s.g, r1.dg, 0.5 * dt);
  const MapField phi_mid = advance_map(s.phi, r1.dphi, 0.5 * dt);
  const Rates r2 = flow_rates(g_mid, phi_mid, s.t + 0.5 * dt, schedule, variant);
  next.g = advance_metric(s.g, r2.dg, dt);
  next.phi = advance_map(s.phi, r2.dphi, dt);
  return next;
}

ScalarField step_heat(const Snapshot& s, double dt, double c_stab) {
  require_stable(s.g, dt, c_stab);
  return advance_heat(s.u, heat_rate(s.g, s.u), dt, s.t);
}

Snapshot step_coupled(const Snapshot& s, double dt, const AlphaSchedule& schedule,
                      const FlowVariant& variant, const FlowConfig& config) {
  if (config.integrator == Integrator::euler) {
    ScalarField u = step_heat(s, dt, config.c_stab);
    Snapshot next = step_flow(s, dt, schedule, variant, config);
    next.u = std::move(u);
    return next;
  }
  require_stable(s.g, dt, config.c_stab);
  const double half = 0.5 * dt;
  const Rates r1 = flow_rates(s.g, s.phi, s.t, schedule, variant);
  const auto du1 = heat_rate(s.g, s.u);
  Snapshot mid;
  mid.t = s.t + half;
  mid.g = variant.kind == VariantKind::static_metric ? s.g : advance_metric(s.g, r1.dg, half);
  mid.phi = advance_map(s.phi, r1.dphi, half);
  mid.u = advance_heat(s.u, du1, half, s.t);
  const Rates r2 = flow_rates(mid.g, mid.phi, mid.t, schedule, variant);
  const auto du2 = heat_rate(mid.g, mid.u);
  Snapshot next;
  next.t = s.t + dt;
  next.g = variant.kind == VariantKind::static_metric ? s.g : advance_metric(s.g, r2.dg, dt);
  next.phi = advance_map(s.phi, r2.dphi, dt);
  next.u = advance_heat(s.u, du2, dt, s.t);
  return next;
}

SnapshotDiagnostics diagnose(const Snapshot& s, double alpha) {
  SnapshotDiagnostics d;
  d.alpha = alpha;
  d.metric_min_eigenvalue = s.g.min_eigenvalue();
  const int n = s.g.dim();
  const TensorField2 ric = ricci(s.g);
  const TensorField2 P = grad_phi_outer(s.g, s.phi);
  d.ric_min = std::numeric_limits<double>::infinity();
  d.ric_max = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < s.g.size(); ++p) {
    const auto [rmin, rmax] = generalized_eigen(ric[p], s.g[p], n);
    d.ric_min = std::min(d.ric_min, rmin);
    d.ric_max = std::max(d.ric_max, rmax);
    d.phi_max = std::max(d.phi_max, generalized_eigen(P[p], s.g[p], n).second);
  }
  d.t_phi_max = s.t * d.phi_max;
  const auto [umin, umax] = std::minmax_element(s.u.values.begin(), s.u.values.end());
  d.u_min = *umin;
  d.u_max = *umax;
  return d;
}

namespace {

// Static metrics reuse one cached operator across all heat steps.
Snapshot step_static(const Snapshot& s, double dt, const LaplaceBeltrami& lap,
                     Integrator integrator) {
  Snapshot next = s;
  next.t = s.t + dt;
  std::vector<double> du(s.u.size());
  lap.apply(s.u.values, du);
  if (integrator == Integrator::euler) {
    next.u = advance_heat(s.u, du, dt, s.t);
    return next;
  }
  const ScalarField mid = advance_heat(s.u, du, 0.5 * dt, s.t);
  lap.apply(mid.values, du);
  next.u = advance_heat(s.u, du, dt, s.t);
  return next;
}

}  // namespace

Trajectory run(const RunSpec& spec) {
  spec.schedule.validate();
  spec.variant.validate(spec.phi0.d());
  require_same_grid(spec.g0.grid(), spec.phi0.grid, "run");
  require_same_grid(spec.g0.grid(), spec.u0.grid, "run");
  if (spec.stride < 1) throw Error("run: snapshot stride must be >= 1");
  if (!(spec.T >= spec.t_start) || spec.t_start < 0.0) {
    throw Error("run: need 0 <= t_start <= T");
  }
  if (!(spec.dt > 0.0)) throw Error("run: dt must be positive");

  Trajectory traj;
  traj.grid = spec.g0.grid();
  traj.schedule = spec.schedule;
  traj.variant = spec.variant;
  traj.config = spec.config;
  traj.T = spec.T;
  traj.t_start = spec.t_start;
  traj.stride = spec.stride;

  const double span = spec.T - spec.t_start;
  long strides = span > 0.0 ? static_cast<long>(std::ceil(span / (spec.dt * spec.stride) - 1e-9)) : 0;
  const long steps = strides * spec.stride;
  traj.dt = steps > 0 ? span / static_cast<double>(steps) : spec.dt;

  Snapshot current{spec.t_start, spec.g0, spec.phi0, spec.u0};
  current.u.tag = ScalarTag::u;
  traj.snapshots.push_back(current);
  traj.diagnostics.push_back(diagnose(current, spec.schedule(current.t)));

  const bool is_static = spec.variant.kind == VariantKind::static_metric;
  std::optional<LaplaceBeltrami> frozen;
  if (is_static) {
    require_stable(spec.g0, traj.dt, spec.config.c_stab);
    frozen.emplace(spec.g0);
  }

  for (long k = 1; k <= steps; ++k) {
    try {
      Snapshot next = is_static
                          ? step_static(current, traj.dt, *frozen, spec.config.integrator)
                          : step_coupled(current, traj.dt, spec.schedule, spec.variant,
                                         spec.config);
      next.t = spec.t_start + static_cast<double>(k) * traj.dt;
      current = std::move(next);
    } catch (const MetricDegenerate& e) {
      std::ostringstream os;
      os << "metric degenerate (blow-up) after t = " << current.t << ": " << e.what();
      traj.halt_reason = os.str();
      break;
    } catch (const FlowError& e) {
      traj.halt_reason = e.what();
      break;
    }
    if (k % spec.stride == 0) {
      traj.snapshots.push_back(current);
      traj.diagnostics.push_back(diagnose(current, spec.schedule(current.t)));
    }
  }
  return traj;
}

}  // namespace rhflow
