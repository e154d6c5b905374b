#include "rhflow/harnack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rhflow {

namespace {

std::size_t snapshot_near(const Trajectory& traj, double t) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const double e = std::abs(traj.snapshots[k].t - t);
    if (e < d) {
      d = e;
      best = k;
    }
  }
  return best;
}

double segment_cost(const MetricField& g, std::size_t p, std::size_t q, int di, int dj,
                    double ds) {
  const Grid& grid = g.grid();
  const Mat2 m = 0.5 * (g[p] + g[q]);
  const double vx = di * grid.h(0);
  const double vy = grid.dim() == 2 ? dj * grid.h(1) : 0.0;
  return (m(0, 0) * vx * vx + 2.0 * m(0, 1) * vx * vy + m(1, 1) * vy * vy) / ds;
}

void require_time(const Trajectory& traj, double t, const char* what) {
  if (traj.snapshots.empty()) throw Error("empty trajectory");
  const double lo = traj.snapshots.front().t, hi = traj.snapshots.back().t;
  const double eps = 1e-9 * std::max(traj.snapshot_spacing(), 1e-300);
  if (t < lo - eps || t > hi + eps) {
    std::ostringstream os;
    os << what << " = " << t << " outside the trajectory [" << lo << ", " << hi << "]";
    throw Error(os.str());
  }
}

}  // namespace

double path_energy(const Trajectory& traj, const SpaceTimePath& path) {
  const auto& nodes = path.nodes;
  const auto& times = path.times;
  if (nodes.size() < 2 || nodes.size() != times.size()) throw Error("path: malformed");
  const Grid& grid = traj.grid;
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double ds = times[k + 1] - times[k];
    if (!(ds > 0.0)) throw Error("path: times must increase");
    if (nodes[k] >= grid.size() || nodes[k + 1] >= grid.size()) throw Error("path: node outside grid");
    const MetricField& g = traj.snapshots[snapshot_near(traj, times[k])].g;
    const int di = grid.wrapped_delta(nodes[k], nodes[k + 1], 0);
    const int dj = grid.dim() == 2 ? grid.wrapped_delta(nodes[k], nodes[k + 1], 1) : 0;
    e += segment_cost(g, nodes[k], nodes[k + 1], di, dj, ds);
  }
  return e;
}

int auto_r_max(const Grid& grid, std::size_t x1, std::size_t x2, int substeps) {
  int D = std::abs(grid.wrapped_delta(x1, x2, 0));
  if (grid.dim() == 2) D = std::max(D, std::abs(grid.wrapped_delta(x1, x2, 1)));
  const int r = static_cast<int>(std::ceil(4.0 * D / std::max(substeps, 1)));
  return std::max(2, r);
}

GammaResult gamma_inf(const Trajectory& traj, std::size_t x1, double t1, std::size_t x2,
                      double t2, const GammaOptions& options) {
  if (!(t1 < t2)) throw Error("gamma_inf: need t1 < t2");
  require_time(traj, t1, "t1");
  require_time(traj, t2, "t2");
  const Grid& grid = traj.grid;
  if (x1 >= grid.size() || x2 >= grid.size()) throw Error("gamma_inf: node outside grid");
  if (options.substeps < 1) throw Error("gamma_inf: substeps must be >= 1");
  int r = options.r_max > 0 ? options.r_max : auto_r_max(grid, x1, x2, options.substeps);
  if (r < 1) throw Error("gamma_inf: r_max must be >= 1");
  // Larger offsets would alias onto shorter periodic representatives.
  int cap = (grid.n(0) - 1) / 2;
  if (grid.dim() == 2) cap = std::min(cap, (grid.n(1) - 1) / 2);
  r = std::min(r, cap);

  const int K = options.substeps;
  const double ds = (t2 - t1) / K;
  const std::size_t N = grid.size();
  const double inf = std::numeric_limits<double>::infinity();
  const int rj = grid.dim() == 2 ? r : 0;

  std::vector<double> cost(N, inf), next(N);
  std::vector<std::vector<std::size_t>> parent(K, std::vector<std::size_t>(N, 0));
  cost[x1] = 0.0;
  for (int k = 0; k < K; ++k) {
    const MetricField& g = traj.snapshots[snapshot_near(traj, t1 + k * ds)].g;
    std::fill(next.begin(), next.end(), inf);
    auto& par = parent[k];
    // Fixed visiting order (source index, then offsets) with strict
    // improvement keeps ties deterministic.
    for (std::size_t p = 0; p < N; ++p) {
      if (cost[p] == inf) continue;
      for (int dj = -rj; dj <= rj; ++dj) {
        for (int di = -r; di <= r; ++di) {
          const std::size_t q = grid.offset(p, di, dj);
          const double c = cost[p] + segment_cost(g, p, q, di, dj, ds);
          if (c < next[q]) {
            next[q] = c;
            par[q] = p;
          }
        }
      }
    }
    cost.swap(next);
  }
  if (cost[x2] == inf) throw Error("gamma_inf: target unreachable");

  GammaResult res;
  res.gamma = cost[x2];
  res.r_max = r;
  res.substeps = K;
  res.path.nodes.assign(K + 1, 0);
  res.path.times.assign(K + 1, 0.0);
  std::size_t node = x2;
  for (int k = K; k >= 0; --k) {
    res.path.nodes[k] = node;
    res.path.times[k] = k == K ? t2 : t1 + k * ds;
    if (k > 0) node = parent[k - 1][node];
  }
  return res;
}

double lemma31_log_rhs(double A1, double A2, double A3, double gamma, double t1, double t2,
                       double log_u1) {
  if (!(A1 > 0.0) || !(A2 >= 0.0) || !(A3 >= 0.0)) {
    throw Error("lemma31: need A1 > 0 and A2, A3 >= 0");
  }
  if (!(t1 > 0.0) || !(t1 < t2)) throw Error("lemma31: need 0 < t1 < t2");
  if (!(gamma >= 0.0)) throw Error("lemma31: gamma must be >= 0");
  return log_u1 - (A3 / A1) * std::log(t2 / t1) - 0.25 * A1 * gamma - A2 * (t2 - t1) / A1;
}

double lemma31_rhs(double A1, double A2, double A3, double gamma, double t1, double t2,
                   double u1) {
  if (!(u1 > 0.0)) throw Error("lemma31: u1 must be > 0");
  return std::exp(lemma31_log_rhs(A1, A2, A3, gamma, t1, t2, std::log(u1)));
}

std::vector<HarnackPair> pair_lattice(const Trajectory& traj, int n_space, int n_time) {
  if (n_space < 1 || n_time < 1) return {};
  std::vector<std::size_t> levels;
  std::size_t first = 0;
  while (first < traj.snapshots.size() && !(traj.snapshots[first].t > 0.0)) ++first;
  if (traj.snapshots.size() < 2 || first + 1 >= traj.snapshots.size()) {
    throw Error("pair lattice: not enough snapshots with t > 0");
  }
  const std::size_t last = traj.snapshots.size() - 2;
  if (last <= first) throw Error("pair lattice: not enough snapshots with t > 0");
  for (int i = 0; i <= n_time; ++i) {
    levels.push_back(first + (last - first) * static_cast<std::size_t>(i) / n_time);
  }
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const Grid& grid = traj.grid;
  std::vector<std::size_t> nodes;
  for (int s = 0; s < n_space; ++s) {
    const int i = grid.n(0) * s / n_space;
    const int j = grid.dim() == 2 ? grid.n(1) * s / n_space : 0;
    nodes.push_back(grid.index(i, j));
  }
  std::vector<HarnackPair> pairs;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    for (std::size_t a : nodes) {
      for (std::size_t b : nodes) {
        pairs.push_back({a, traj.snapshots[levels[l]].t, b, traj.snapshots[levels[l + 1]].t});
      }
    }
  }
  return pairs;
}

const char* to_string(HarnackMode mode) {
  return mode == HarnackMode::complete ? "complete" : "compact";
}

HarnackReport check_harnack(const Trajectory& traj, const std::vector<HarnackPair>& pairs,
                            const HarnackSettings& settings) {
  if (pairs.empty()) throw Error("no pairs");
  const int n = traj.grid.dim();
  HarnackReport rep;
  rep.mode = settings.mode;
  rep.substeps = settings.gamma.substeps;
  rep.c_tol = settings.c_tol;
  rep.h = traj.grid.h_max();
  rep.dt_snap = traj.snapshot_spacing();

  const CurvatureTable curv = curvature_table(traj);
  NodeMask mask(traj.snapshots.size(), std::vector<char>(traj.grid.size(), 0));
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k)
    if (traj.snapshots[k].t > 0.0) std::fill(mask[k].begin(), mask[k].end(), 1);
  rep.constants = extract_constants(traj, curv, std::move(mask), settings.tol_eig_factor);
  const auto& c = rep.constants;
  const double alpha0 = traj.variant.kind == VariantKind::warped_product
                            ? double(traj.variant.m)
                            : traj.schedule.alpha0;

  if (settings.mode == HarnackMode::compact) {
    rep.beta = 1.0;
    rep.form = settings.form;
    const double lead = settings.form == GlobalForm::sharp ? double(n) : 0.5 * n;
    const double Cn = lead + 4.0 * n * c.C_phi * alpha0;
    rep.A1 = 1.0;
    rep.A2 = c.k2 * n;
    rep.A3 = 0.5 * Cn;
  } else {
    const double beta = settings.beta;
    if (!(beta > 1.0)) throw Error("complete mode needs beta > 1");
    if (!(settings.cprime >= 0.0)) throw Error("complete mode needs C' >= 0");
    rep.beta = beta;
    rep.cprime = settings.cprime;
    rep.A1 = beta;
    rep.A2 = settings.cprime * beta * beta * std::max(c.k1, c.k2) +
             n * beta * beta * c.k1 / (4.0 * (beta - 1.0));
    rep.A3 = settings.cprime * beta * beta;
  }

  for (const auto& pr : pairs) {
    if (!(pr.t1 > 0.0) || !(pr.t1 < pr.t2)) throw Error("pair needs 0 < t1 < t2");
    require_time(traj, pr.t1, "t1");
    require_time(traj, pr.t2, "t2");
    const std::size_t k1 = snapshot_near(traj, pr.t1), k2 = snapshot_near(traj, pr.t2);
    HarnackRow row;
    row.pair = pr;
    if (settings.mode == HarnackMode::compact) {
      // 0 <= Ric over the time span of the pair.
      for (std::size_t k = k1; k <= k2 && row.gated; ++k)
        for (double v : curv.ric_min[k])
          if (v < -c.tol_eig) {
            row.gated = false;
            break;
          }
    }
    const GammaResult gr = gamma_inf(traj, pr.x1, pr.t1, pr.x2, pr.t2, settings.gamma);
    row.gamma = gr.gamma;
    row.r_max = gr.r_max;
    row.u1 = traj.snapshots[k1].u[pr.x1];
    row.u2 = traj.snapshots[k2].u[pr.x2];
    const double lu1 = std::log(row.u1);
    row.log_ratio = std::log(row.u2) - lu1;
    row.log_rhs = lemma31_log_rhs(rep.A1, rep.A2, rep.A3, row.gamma, pr.t1, pr.t2, lu1);
    row.margin = std::log(row.u2) - row.log_rhs;
    rep.rows.push_back(row);
  }

  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    if (!row.gated) continue;
    ++rep.gated_pairs;
    const double lu1 = std::log(row.u1);
    rep.scale = std::max({rep.scale, std::abs(row.log_ratio), std::abs(row.log_rhs - lu1)});
    if (row.margin < rep.worst_margin) {
      rep.worst_margin = row.margin;
      rep.worst_row = i;
    }
  }
  rep.tol_num = rep.c_tol * (rep.h * rep.h + rep.dt_snap) * rep.scale;
  return rep;
}

}  // namespace rhflow
