#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rhflow/flow.hpp"

namespace rhflow {

/// Per-snapshot, per-node values.
using NodeTable = std::vector<std::vector<double>>;
using NodeMask = std::vector<std::vector<char>>;

struct EstimateSettings {
  double c_tol = 10.0;
  double tol_eig_factor = 1e-8;
  /// Only snapshots with t in [first, second] are reported.
  std::optional<std::pair<double, double>> window;
};

/// Pointwise extreme eigenvalues relative to g, per snapshot and node.
struct CurvatureTable {
  NodeTable ric_min;
  NodeTable ric_max;
  NodeTable phi_max;  // largest eigenvalue of grad phi (x) grad phi
  double ric_abs_max = 0.0;
};

CurvatureTable curvature_table(const Trajectory& traj);

struct HypothesisConstants {
  double k1 = 0.0;
  double k2 = 0.0;
  double C_phi = 0.0;
  bool ric_nonneg = true;
  double ric_min = 0.0;  // smallest Ric eigenvalue over the mask
  double tol_eig = 0.0;
  NodeMask valid_mask;

  std::size_t masked_points() const;
};

/// Geodesic ball dist(x, x0, t) < radius, evaluated on each snapshot's metric.
struct Ball {
  std::size_t x0 = 0;
  double radius = std::numeric_limits<double>::infinity();
};

/// Distances from x0 on every snapshot.
NodeTable distance_table(const Trajectory& traj, std::size_t x0);

/// Constants over the mask (region and t > 0).  Throws on an empty mask.
HypothesisConstants extract_constants(const Trajectory& traj,
                                      const std::optional<Ball>& region = std::nullopt,
                                      double tol_eig_factor = 1e-8);
HypothesisConstants extract_constants(const Trajectory& traj, const CurvatureTable& curv,
                                      NodeMask mask, double tol_eig_factor = 1e-8);

/// f = log u; throws if u <= 0 anywhere.
ScalarField log_field(const ScalarField& u);

/// d/dt log u at snapshot k: centered where both neighbours exist, one-sided
/// at the ends.
ScalarField log_time_derivative(const Trajectory& traj, std::size_t k);

/// |grad f|^2 - beta f_t with a forward difference between the two snapshots
/// (evaluated at s).
ScalarField liyau_quantity(const Snapshot& s, const Snapshot& s_next, double beta);
/// Same quantity at snapshot k using log_time_derivative.
ScalarField liyau_quantity(const Trajectory& traj, std::size_t k, double beta);

/// printed: C_n = n/2 + 4 n C alpha0.  sharp: C_n = n + 4 n C alpha0, which
/// reduces to the classical n/(2t) when k = C = 0.
enum class GlobalForm { printed, sharp };
const char* to_string(GlobalForm form);

double global_rhs(double k, int n, double C_phi, double alpha0, double t,
                  GlobalForm form = GlobalForm::printed);

enum class RhoForm { printed, squared };
const char* to_string(RhoForm form);

double local_rhs(double beta, double rho, double t, double k1, double k2, double cprime,
                 int n, RhoForm form = RhoForm::printed);

struct MarginRow {
  double t = 0.0;
  double min_margin = 0.0;
  std::size_t argmin_node = 0;
  double gated_fraction = 0.0;
};

struct EstimateReport {
  std::string kind;  // global | local | lemma21
  GlobalForm global_form = GlobalForm::printed;
  double beta = 1.0;
  double rho = std::numeric_limits<double>::infinity();
  RhoForm rho_form = RhoForm::printed;
  double cprime = 0.0;
  double a = 0.0, b = 0.0;  // lemma21 only
  std::size_t x0 = 0;

  double c_tol = 10.0;
  double tol_eig = 0.0;
  double h = 0.0;
  double dt_snap = 0.0;
  double scale = 0.0;
  double tol_num = 0.0;
  HypothesisConstants constants;

  std::vector<std::size_t> snapshots;
  std::vector<double> times;
  NodeTable lhs, rhs, margin;
  NodeMask gated;
  std::vector<MarginRow> rows;

  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_row = 0;
  std::size_t worst_node = 0;
  std::size_t gated_points = 0;
  std::size_t excluded_points = 0;

  double gated_fraction() const;
  bool passed() const { return gated_points > 0 && worst_margin >= -tol_num; }
};

/// Global check: |grad f|^2 - f_t <= k n + C_n / (2t).  Nodes where
/// Ric dips below -tol_eig are excluded and counted.
EstimateReport check_global(const Trajectory& traj, const EstimateSettings& settings = {},
                            GlobalForm form = GlobalForm::printed);

/// Local estimate on B_{rho/2} around x0 with hypothesis constants taken
/// over B_rho.  rho = infinity drops the ball terms.
EstimateReport check_local(const Trajectory& traj, double beta, double rho, std::size_t x0,
                           double cprime, RhoForm form = RhoForm::printed,
                           const EstimateSettings& settings = {});

/// Smallest C' >= 0 for which every local margin on `traj` is >= 0.
double fit_cprime(const Trajectory& traj, double beta, double rho, std::size_t x0,
                  RhoForm form = RhoForm::printed, const EstimateSettings& settings = {});

inline constexpr int kIdentityCount = 6;
/// Names of the residual fields, in order.  The last one is the laplacian
/// evolution identity without the tension coupling term.
extern const std::array<const char*, kIdentityCount> kIdentityNames;

struct IdentityResiduals {
  std::size_t snapshot = 0;
  double t = 0.0;
  std::array<std::vector<double>, kIdentityCount> residual;
  std::array<double, kIdentityCount> max_abs{};
  std::array<double, kIdentityCount> scale{};  // max |term| entering each identity
};

/// Residuals (LHS - RHS) at snapshot k; needs 1 <= k <= size - 2.
IdentityResiduals identity_residuals(const Trajectory& traj, std::size_t k);

/// Differential inequality for F = t(|grad f|^2 - beta f_t); margin = LHS - RHS.
EstimateReport lemma21_check(const Trajectory& traj, double beta, double a, double b,
                             const EstimateSettings& settings = {});

}  // namespace rhflow
