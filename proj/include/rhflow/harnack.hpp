#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rhflow/estimates.hpp"

namespace rhflow {

/// Grid-node path gamma_0..gamma_K at times s_0 = t1 < ... < s_K = t2.
struct SpaceTimePath {
  std::vector<std::size_t> nodes;
  std::vector<double> times;
};

/// Sum over segments of |d gamma|^2_g / ds, with g the endpoint average at
/// the snapshot nearest the segment's start time.  Displacements use the
/// shorter periodic representative on each axis.
double path_energy(const Trajectory& traj, const SpaceTimePath& path);

struct GammaOptions {
  int substeps = 32;
  int r_max = 0;  // cells per sub-step per axis; 0 picks it from the pair
};

/// max(2, ceil(4 D / substeps)) with D the larger per-axis cell offset.
int auto_r_max(const Grid& grid, std::size_t x1, std::size_t x2, int substeps);

struct GammaResult {
  double gamma = 0.0;
  int r_max = 0;
  int substeps = 0;
  SpaceTimePath path;  // a minimiser
};

/// Exact minimum of path_energy over paths on `substeps` uniform time layers
/// whose per-layer moves stay within r_max cells on each axis.
GammaResult gamma_inf(const Trajectory& traj, std::size_t x1, double t1, std::size_t x2,
                      double t2, const GammaOptions& options = {});

/// u1 (t2/t1)^{-A3/A1} exp(-A1 Gamma/4 - A2 (t2 - t1)/A1).
double lemma31_rhs(double A1, double A2, double A3, double gamma, double t1, double t2, double u1);
double lemma31_log_rhs(double A1, double A2, double A3, double gamma, double t1, double t2,
                       double log_u1);

struct HarnackPair {
  std::size_t x1 = 0;
  double t1 = 0.0;
  std::size_t x2 = 0;
  double t2 = 0.0;
};

/// n_space x n_space node pairs (evenly spaced along the grid diagonal)
/// times n_time consecutive pairs of time levels.  Levels are snapshots
/// spread over t > 0 up to the second-to-last snapshot, so t2 < T.  Empty
/// when either count is zero.
std::vector<HarnackPair> pair_lattice(const Trajectory& traj, int n_space, int n_time);

enum class HarnackMode { compact, complete };
const char* to_string(HarnackMode mode);

struct HarnackSettings {
  HarnackMode mode = HarnackMode::compact;
  /// Compact mode: C_n as printed (n/2 + ...) or sharp (n + ...), as for the
  /// global estimate.
  GlobalForm form = GlobalForm::printed;
  double beta = 2.0;    // complete mode
  double cprime = 0.0;  // complete mode
  GammaOptions gamma;
  double c_tol = 10.0;
  double tol_eig_factor = 1e-8;
};

struct HarnackRow {
  HarnackPair pair;
  double gamma = 0.0;
  int r_max = 0;
  double u1 = 0.0, u2 = 0.0;
  double log_ratio = 0.0;  // log(u2/u1)
  double log_rhs = 0.0;    // log of the lower bound
  double margin = 0.0;     // log u2 - log rhs
  bool gated = true;
};

struct HarnackReport {
  HarnackMode mode = HarnackMode::compact;
  GlobalForm form = GlobalForm::printed;  // compact mode
  double beta = 1.0;
  double cprime = 0.0;
  double A1 = 0.0, A2 = 0.0, A3 = 0.0;
  HypothesisConstants constants;
  int substeps = 0;
  double c_tol = 10.0;
  double h = 0.0, dt_snap = 0.0;
  double scale = 0.0;
  double tol_num = 0.0;
  std::vector<HarnackRow> rows;
  std::size_t gated_pairs = 0;
  double worst_margin = 0.0;
  std::size_t worst_row = 0;
  /// Gamma is a minimum over a restricted path class, hence an upper bound
  /// on the infimum; a larger Gamma lowers the bound, so the check is only
  /// harder to pass.
  std::string gamma_note =
      "gamma is an upper bound on the infimum (restricted discrete path class); "
      "this makes the asserted inequality harder to satisfy";

  bool passed() const { return gated_pairs > 0 && worst_margin >= -tol_num; }
};

HarnackReport check_harnack(const Trajectory& traj, const std::vector<HarnackPair>& pairs,
                            const HarnackSettings& settings);

}  // namespace rhflow
