#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rhflow/fields.hpp"

namespace rhflow {

class FlowError : public Error {
 public:
  using Error::Error;
};

/// dt exceeds c_stab * h_min^2 * (min eigenvalue of g).
class StabilityViolation : public FlowError {
 public:
  using FlowError::FlowError;
};

/// The heat solution lost strict positivity.
class PositivityLost : public FlowError {
 public:
  using FlowError::FlowError;
};

enum class ScheduleForm { constant, linear_decay, exponential_decay };

/// Coupling alpha(t): non-increasing, bounded below by alpha_min.
struct AlphaSchedule {
  double alpha0 = 1.0;
  double alpha_min = 1.0;
  ScheduleForm form = ScheduleForm::constant;
  double rate = 0.0;

  double operator()(double t) const;
  void validate() const;
};

enum class VariantKind { rh_alpha, warped_product, static_metric };

struct FlowVariant {
  VariantKind kind = VariantKind::rh_alpha;
  int m = 1;        // fibre dimension (warped product)
  double mu = 0.0;  // fibre Einstein constant (warped product)

  void validate(int map_dim) const;
};

enum class Integrator { euler, rk2 };

struct FlowConfig {
  Integrator integrator = Integrator::euler;
  double c_stab = 0.2;
};

const char* to_string(ScheduleForm form);
const char* to_string(VariantKind kind);
const char* to_string(Integrator integrator);

struct Snapshot {
  double t = 0.0;
  MetricField g;
  MapField phi;
  ScalarField u;
};

/// Per-snapshot curvature / map diagnostics recorded while integrating.
struct SnapshotDiagnostics {
  double alpha = 0.0;
  double metric_min_eigenvalue = 0.0;
  double ric_min = 0.0;      // smallest eigenvalue of Ric relative to g
  double ric_max = 0.0;      // largest eigenvalue of Ric relative to g
  double phi_max = 0.0;      // largest eigenvalue of grad phi (x) grad phi relative to g
  double t_phi_max = 0.0;    // t * phi_max
  double u_min = 0.0;
  double u_max = 0.0;
};

struct Trajectory {
  Grid grid;
  std::vector<Snapshot> snapshots;
  std::vector<SnapshotDiagnostics> diagnostics;
  AlphaSchedule schedule;
  FlowVariant variant;
  FlowConfig config;
  double dt = 0.0;       // integrator step
  double T = 0.0;
  double t_start = 0.0;
  int stride = 1;        // integrator steps per stored snapshot
  std::string halt_reason = "completed";

  /// Spacing of stored snapshots (stride * dt).
  double snapshot_spacing() const { return stride * dt; }
  bool completed() const { return halt_reason == "completed"; }
  /// Index of the snapshot whose time equals t (within 1e-9 of the spacing).
  std::optional<std::size_t> find_time(double t) const;
};

/// Largest admissible step: c_stab * h_min^2 * min eigenvalue of g.
double stability_bound(const MetricField& g, double c_stab);

/// Advances g and phi by one step (explicit Euler, or RK2 midpoint when
/// configured); u is carried over unchanged.  The returned metric is
/// re-symmetrised and PD-checked.
Snapshot step_flow(const Snapshot& s, double dt, const AlphaSchedule& schedule,
                   const FlowVariant& variant, const FlowConfig& config = {});

/// u + dt * Laplacian_{g(t)} u on the snapshot's metric.
ScalarField step_heat(const Snapshot& s, double dt, double c_stab = 0.2);

/// One coupled step: heat substep on the frozen g(t) then flow substep
/// (Euler), or a joint midpoint step for (g, phi, u) with RK2.
Snapshot step_coupled(const Snapshot& s, double dt, const AlphaSchedule& schedule,
                      const FlowVariant& variant, const FlowConfig& config);

SnapshotDiagnostics diagnose(const Snapshot& s, double alpha);

struct RunSpec {
  FlowVariant variant;
  AlphaSchedule schedule;
  FlowConfig config;
  MetricField g0;
  MapField phi0;
  ScalarField u0;
  double t_start = 0.0;
  double T = 0.0;
  double dt = 0.0;
  int stride = 1;
};

/// Integrates from t_start to T.  The step is shrunk if needed so that an
/// integer number of strides covers the interval.  Step errors end the run
/// early with `halt_reason` set; the partial trajectory is returned.
Trajectory run(const RunSpec& spec);

}  // namespace rhflow
