#include "rhflow/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rhflow/geometry.hpp"

namespace rhflow {

const std::array<const char*, kIdentityCount> kIdentityNames = {
    "grad_sq_evolution", "laplacian_evolution", "bochner_covector",
    "bochner_scalar",    "log_heat",            "laplacian_evolution_printed"};

namespace {

double coupling0(const Trajectory& traj) {
  return traj.variant.kind == VariantKind::warped_product ? double(traj.variant.m)
                                                          : traj.schedule.alpha0;
}

bool in_window(const EstimateSettings& s, double t) {
  if (!(t > 0.0)) return false;
  if (!s.window) return true;
  const double eps = 1e-12 * std::max(1.0, std::abs(s.window->second));
  return t >= s.window->first - eps && t <= s.window->second + eps;
}

NodeMask empty_mask(const Trajectory& traj) {
  return NodeMask(traj.snapshots.size(), std::vector<char>(traj.grid.size(), 0));
}

HypothesisConstants constants_over(const Trajectory& traj, const CurvatureTable& curv,
                                   NodeMask mask, double tol_eig_factor) {
  HypothesisConstants c;
  c.tol_eig = tol_eig_factor * curv.ric_abs_max;
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const double t = traj.snapshots[k].t;
    for (std::size_t p = 0; p < mask[k].size(); ++p) {
      if (!mask[k][p]) continue;
      rmin = std::min(rmin, curv.ric_min[k][p]);
      rmax = std::max(rmax, curv.ric_max[k][p]);
      c.C_phi = std::max(c.C_phi, t * curv.phi_max[k][p]);
    }
  }
  if (rmin <= rmax) {
    c.k1 = std::max(0.0, -rmin);
    c.k2 = std::max(0.0, rmax);
    c.ric_min = rmin;
    c.ric_nonneg = rmin >= -c.tol_eig;
  }
  c.valid_mask = std::move(mask);
  return c;
}

void finalize(EstimateReport& r, const Trajectory& traj, const EstimateSettings& settings) {
  r.c_tol = settings.c_tol;
  r.h = traj.grid.h_max();
  r.dt_snap = traj.snapshot_spacing();
  r.scale = 0.0;
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    for (std::size_t p = 0; p < r.lhs[i].size(); ++p) {
      if (r.gated[i][p]) r.scale = std::max(r.scale, std::abs(r.lhs[i][p]));
    }
  }
  r.tol_num = r.c_tol * (r.h * r.h + r.dt_snap) * r.scale;
  r.rows.clear();
  r.gated_points = 0;
  r.excluded_points = 0;
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    MarginRow row;
    row.t = r.times[i];
    row.min_margin = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (std::size_t p = 0; p < r.margin[i].size(); ++p) {
      if (!r.gated[i][p]) {
        ++r.excluded_points;
        continue;
      }
      ++count;
      if (r.margin[i][p] < row.min_margin) {
        row.min_margin = r.margin[i][p];
        row.argmin_node = p;
      }
    }
    row.gated_fraction = r.margin[i].empty() ? 0.0 : double(count) / double(r.margin[i].size());
    r.gated_points += count;
    if (count > 0 && row.min_margin < r.worst_margin) {
      r.worst_margin = row.min_margin;
      r.worst_row = i;
      r.worst_node = row.argmin_node;
    }
    r.rows.push_back(row);
  }
}

void add_row(EstimateReport& r, std::size_t k, double t, std::size_t nodes) {
  r.snapshots.push_back(k);
  r.times.push_back(t);
  r.lhs.emplace_back(nodes, 0.0);
  r.rhs.emplace_back(nodes, 0.0);
  r.margin.emplace_back(nodes, 0.0);
  r.gated.emplace_back(nodes, 0);
}

// g^{ia} g^{jb} T_ab v_i v_j
double quadratic(const Mat2& ginv, const Mat2& T, const Covector& v, int n) {
  double w[2] = {0.0, 0.0};
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i) w[a] += ginv(i, a) * v[i];
  double s = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) s += T(a, b) * w[a] * w[b];
  return s;
}

// Tensor driving the metric evolution, g_t = -2 E, and the coupling c for
// which E = Ric - c grad phi (x) grad phi.
struct Evolution {
  TensorField2 E;
  double coupling = 0.0;
  bool moving = false;
};

Evolution evolution_tensor(const Trajectory& traj, const Snapshot& s) {
  Evolution ev;
  ev.E = TensorField2(s.g.grid());
  if (traj.variant.kind == VariantKind::static_metric) return ev;
  ev.moving = true;
  ev.coupling = traj.variant.kind == VariantKind::warped_product ? double(traj.variant.m)
                                                                 : traj.schedule(s.t);
  ev.E = s_tensor(s.g, s.phi, ev.coupling);
  return ev;
}

}  // namespace

std::size_t HypothesisConstants::masked_points() const {
  std::size_t n = 0;
  for (const auto& row : valid_mask)
    for (char c : row) n += c ? 1 : 0;
  return n;
}

CurvatureTable curvature_table(const Trajectory& traj) {
  CurvatureTable c;
  const int n = traj.grid.dim();
  for (const auto& s : traj.snapshots) {
    const TensorField2 ric = ricci(s.g);
    const TensorField2 P = grad_phi_outer(s.g, s.phi);
    std::vector<double> lo(s.g.size()), hi(s.g.size()), ph(s.g.size());
    for (std::size_t p = 0; p < s.g.size(); ++p) {
      std::tie(lo[p], hi[p]) = generalized_eigen(ric[p], s.g[p], n);
      ph[p] = generalized_eigen(P[p], s.g[p], n).second;
      for (double v : ric[p].a) c.ric_abs_max = std::max(c.ric_abs_max, std::abs(v));
    }
    c.ric_min.push_back(std::move(lo));
    c.ric_max.push_back(std::move(hi));
    c.phi_max.push_back(std::move(ph));
  }
  return c;
}

NodeTable distance_table(const Trajectory& traj, std::size_t x0) {
  if (x0 >= traj.grid.size()) throw Error("x0 outside the grid");
  NodeTable d;
  d.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) d.push_back(geodesic_distance(s.g, x0).values);
  return d;
}

HypothesisConstants extract_constants(const Trajectory& traj, const CurvatureTable& curv,
                                      NodeMask mask, double tol_eig_factor) {
  HypothesisConstants c = constants_over(traj, curv, std::move(mask), tol_eig_factor);
  if (c.masked_points() == 0) throw Error("extract_constants: empty mask");
  return c;
}

HypothesisConstants extract_constants(const Trajectory& traj, const std::optional<Ball>& region,
                                      double tol_eig_factor) {
  if (traj.snapshots.empty()) throw Error("extract_constants: empty trajectory");
  const CurvatureTable curv = curvature_table(traj);
  NodeMask mask = empty_mask(traj);
  NodeTable dist;
  const bool bounded = region && std::isfinite(region->radius);
  if (bounded) dist = distance_table(traj, region->x0);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!(traj.snapshots[k].t > 0.0)) continue;
    for (std::size_t p = 0; p < mask[k].size(); ++p) {
      mask[k][p] = !bounded || dist[k][p] < region->radius;
    }
  }
  return extract_constants(traj, curv, std::move(mask), tol_eig_factor);
}

ScalarField log_field(const ScalarField& u) {
  ScalarField f(u.grid, ScalarTag::f);
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (!(u[p] > 0.0)) {
      std::ostringstream os;
      os << "u is not positive at node " << p;
      throw Error(os.str());
    }
    f[p] = std::log(u[p]);
  }
  return f;
}

ScalarField log_time_derivative(const Trajectory& traj, std::size_t k) {
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 2) throw Error("time derivative needs at least two snapshots");
  if (k >= snaps.size()) throw Error("snapshot index out of range");
  const std::size_t lo = k == 0 ? 0 : k - 1;
  const std::size_t hi = k + 1 == snaps.size() ? k : k + 1;
  const ScalarField a = log_field(snaps[lo].u);
  const ScalarField b = log_field(snaps[hi].u);
  const double dt = snaps[hi].t - snaps[lo].t;
  ScalarField ft(traj.grid);
  for (std::size_t p = 0; p < ft.size(); ++p) ft[p] = (b[p] - a[p]) / dt;
  return ft;
}

ScalarField liyau_quantity(const Snapshot& s, const Snapshot& s_next, double beta) {
  if (!(beta >= 1.0)) throw Error("beta must be >= 1");
  if (!(s_next.t > s.t)) throw Error("liyau_quantity: snapshots out of order");
  const ScalarField f = log_field(s.u);
  const ScalarField fn = log_field(s_next.u);
  ScalarField q = gradient_norm_sq(s.g, f);
  const double dt = s_next.t - s.t;
  for (std::size_t p = 0; p < q.size(); ++p) q[p] -= beta * (fn[p] - f[p]) / dt;
  q.tag = ScalarTag::lhs;
  return q;
}

ScalarField liyau_quantity(const Trajectory& traj, std::size_t k, double beta) {
  if (!(beta >= 1.0)) throw Error("beta must be >= 1");
  const auto& s = traj.snapshots.at(k);
  ScalarField q = gradient_norm_sq(s.g, log_field(s.u));
  const ScalarField ft = log_time_derivative(traj, k);
  for (std::size_t p = 0; p < q.size(); ++p) q[p] -= beta * ft[p];
  q.tag = ScalarTag::lhs;
  return q;
}

const char* to_string(GlobalForm form) { return form == GlobalForm::sharp ? "sharp" : "printed"; }

double global_rhs(double k, int n, double C_phi, double alpha0, double t, GlobalForm form) {
  if (!(t > 0.0)) throw Error("global_rhs: t must be > 0");
  const double lead = form == GlobalForm::sharp ? double(n) : 0.5 * n;
  const double Cn = lead + 4.0 * n * C_phi * alpha0;
  return k * n + Cn / (2.0 * t);
}

const char* to_string(RhoForm form) { return form == RhoForm::squared ? "rho_squared" : "rho"; }

double local_rhs(double beta, double rho, double t, double k1, double k2, double cprime, int n,
                 RhoForm form) {
  if (!(beta > 1.0)) throw Error("local_rhs: beta must be > 1");
  if (!(rho > 0.0)) throw Error("local_rhs: rho must be > 0");
  if (!(t > 0.0)) throw Error("local_rhs: t must be > 0");
  const double rho_term = form == RhoForm::squared ? rho * rho : rho;
  const double b2 = beta * beta;
  return cprime * b2 * (b2 / (rho_term * (beta - 1.0)) + 1.0 / t + std::max(k1, k2)) +
         n * beta * k1 / (4.0 * (beta - 1.0));
}

double EstimateReport::gated_fraction() const {
  const std::size_t total = gated_points + excluded_points;
  return total == 0 ? 0.0 : double(gated_points) / double(total);
}

EstimateReport check_global(const Trajectory& traj, const EstimateSettings& settings,
                            GlobalForm form) {
  if (traj.snapshots.size() < 2) throw Error("check_global: need at least two snapshots");
  const CurvatureTable curv = curvature_table(traj);
  const double tol_eig = settings.tol_eig_factor * curv.ric_abs_max;
  const std::size_t N = traj.grid.size();

  EstimateReport r;
  r.kind = "global";
  r.global_form = form;
  r.tol_eig = tol_eig;
  NodeMask mask = empty_mask(traj);
  bool all_nonneg = true;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    if (!in_window(settings, traj.snapshots[k].t)) continue;
    for (std::size_t p = 0; p < N; ++p) {
      mask[k][p] = curv.ric_min[k][p] >= -tol_eig;
      all_nonneg = all_nonneg && mask[k][p];
    }
  }
  r.constants = constants_over(traj, curv, mask, settings.tol_eig_factor);
  r.constants.ric_nonneg = all_nonneg;
  const int n = traj.grid.dim();
  const double a0 = coupling0(traj);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const double t = traj.snapshots[k].t;
    if (!in_window(settings, t)) continue;
    add_row(r, k, t, N);
    const ScalarField q = liyau_quantity(traj, k, 1.0);
    const double rhs = global_rhs(r.constants.k2, n, r.constants.C_phi, a0, t, form);
    const std::size_t row = r.lhs.size() - 1;
    for (std::size_t p = 0; p < N; ++p) {
      r.lhs[row][p] = q[p];
      r.rhs[row][p] = rhs;
      r.margin[row][p] = rhs - q[p];
      r.gated[row][p] = mask[k][p];
    }
  }
  finalize(r, traj, settings);
  return r;
}

namespace {

struct LocalSetup {
  HypothesisConstants constants;
  NodeMask inner;  // B_{rho/2}, reported snapshots only
};

LocalSetup local_setup(const Trajectory& traj, double rho, std::size_t x0,
                       const EstimateSettings& settings) {
  if (!(rho > 0.0)) throw Error("rho must be > 0");
  const CurvatureTable curv = curvature_table(traj);
  const bool bounded = std::isfinite(rho);
  NodeTable dist;
  if (bounded) dist = distance_table(traj, x0);
  NodeMask outer = empty_mask(traj);
  LocalSetup s;
  s.inner = empty_mask(traj);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const double t = traj.snapshots[k].t;
    if (!(t > 0.0)) continue;
    const bool report = in_window(settings, t);
    for (std::size_t p = 0; p < traj.grid.size(); ++p) {
      outer[k][p] = !bounded || dist[k][p] < rho;
      s.inner[k][p] = report && (!bounded || dist[k][p] < 0.5 * rho);
    }
  }
  s.constants = constants_over(traj, curv, std::move(outer), settings.tol_eig_factor);
  return s;
}

}  // namespace

EstimateReport check_local(const Trajectory& traj, double beta, double rho, std::size_t x0,
                           double cprime, RhoForm form, const EstimateSettings& settings) {
  if (!(beta > 1.0)) throw Error("check_local: beta must be > 1");
  if (!(cprime >= 0.0)) throw Error("check_local: C' must be >= 0");
  if (traj.snapshots.size() < 2) throw Error("check_local: need at least two snapshots");
  LocalSetup setup = local_setup(traj, rho, x0, settings);
  EstimateReport r;
  r.kind = "local";
  r.beta = beta;
  r.rho = rho;
  r.rho_form = form;
  r.cprime = cprime;
  r.x0 = x0;
  r.tol_eig = setup.constants.tol_eig;
  const int n = traj.grid.dim();
  const std::size_t N = traj.grid.size();
  const auto& c = setup.constants;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const double t = traj.snapshots[k].t;
    if (!in_window(settings, t)) continue;
    add_row(r, k, t, N);
    const std::size_t row = r.lhs.size() - 1;
    const ScalarField q = liyau_quantity(traj, k, beta);
    const double rhs = local_rhs(beta, rho, t, c.k1, c.k2, cprime, n, form);
    for (std::size_t p = 0; p < N; ++p) {
      r.lhs[row][p] = q[p];
      r.rhs[row][p] = rhs;
      r.margin[row][p] = rhs - q[p];
      r.gated[row][p] = setup.inner[k][p];
    }
  }
  r.constants = std::move(setup.constants);
  finalize(r, traj, settings);
  return r;
}

double fit_cprime(const Trajectory& traj, double beta, double rho, std::size_t x0, RhoForm form,
                  const EstimateSettings& settings) {
  if (!(beta > 1.0)) throw Error("fit_cprime: beta must be > 1");
  // RHS = C' * A(t) + B with A > 0.
  const LocalSetup setup = local_setup(traj, rho, x0, settings);
  const auto& c = setup.constants;
  const int n = traj.grid.dim();
  const double B = local_rhs(beta, rho, 1.0, c.k1, c.k2, 0.0, n, form);
  double fit = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const double t = traj.snapshots[k].t;
    if (!in_window(settings, t)) continue;
    const double A = local_rhs(beta, rho, t, c.k1, c.k2, 1.0, n, form) - B;
    const ScalarField q = liyau_quantity(traj, k, beta);
    for (std::size_t p = 0; p < q.size(); ++p) {
      if (!setup.inner[k][p]) continue;
      any = true;
      fit = std::max(fit, (q[p] - B) / A);
    }
  }
  if (!any) throw Error("fit_cprime: no gated points");
  return fit;
}

IdentityResiduals identity_residuals(const Trajectory& traj, std::size_t k) {
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 3) throw Error("identity_residuals: need at least three snapshots");
  if (k < 1 || k + 1 >= snaps.size()) {
    throw Error("identity_residuals: snapshot needs a neighbour on each side");
  }
  if (traj.variant.kind == VariantKind::warped_product) {
    throw Error("identity_residuals: not defined for the warped_product variant");
  }
  const Snapshot& s = snaps[k];
  const Snapshot& sm = snaps[k - 1];
  const Snapshot& sp = snaps[k + 1];
  const int n = traj.grid.dim();
  const std::size_t N = traj.grid.size();
  const double dt2 = sp.t - sm.t;

  const ScalarField f = log_field(s.u);
  const ScalarField fm = log_field(sm.u);
  const ScalarField fp = log_field(sp.u);
  ScalarField ft(traj.grid);
  for (std::size_t p = 0; p < N; ++p) ft[p] = (fp[p] - fm[p]) / dt2;

  const ChristoffelField gamma = christoffel(s.g);
  const TensorField2 ric = ricci(s.g, gamma);
  const TensorField2 H = hessian(s.g, gamma, f);
  const Evolution ev = evolution_tensor(traj, s);
  const LaplaceBeltrami lap(s.g);

  const CovectorField df = gradient(f);
  const ScalarField grad_sq = gradient_norm_sq(s.g, f);
  const ScalarField lap_f = lap(f);
  const ScalarField lap_ft = lap(ft);
  const CovectorField dft = gradient(ft);
  const CovectorField dlap = gradient(lap_f);
  const ScalarField lap_grad_sq = lap(grad_sq);
  const CovectorField rough = rough_laplacian(s.g, gamma, df);
  const ScalarField grad_sq_m = gradient_norm_sq(sm.g, fm);
  const ScalarField grad_sq_p = gradient_norm_sq(sp.g, fp);
  const ScalarField lap_m = laplace_beltrami(sm.g, fm);
  const ScalarField lap_p = laplace_beltrami(sp.g, fp);

  std::vector<double> tension_term(N, 0.0);
  if (ev.moving) {
    const MapField tau = tension_field(s.g, s.phi);
    for (int mu = 0; mu < s.phi.d(); ++mu) {
      const CovectorField dphi = gradient(s.phi.component(mu));
      for (std::size_t p = 0; p < N; ++p) {
        const Mat2& gi = s.g.inverse(p);
        double ip = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) ip += gi(i, j) * dphi.values[p][i] * df.values[p][j];
        tension_term[p] += -2.0 * ev.coupling * tau.components[mu][p] * ip;
      }
    }
  }

  IdentityResiduals out;
  out.snapshot = k;
  out.t = s.t;
  for (auto& r : out.residual) r.assign(N, 0.0);
  auto note = [&](int id, std::initializer_list<double> terms) {
    for (double v : terms) out.scale[id] = std::max(out.scale[id], std::abs(v));
  };
  for (std::size_t p = 0; p < N; ++p) {
    const Mat2& gi = s.g.inverse(p);
    const Covector& v = df.values[p];
    double ip_ft = 0.0, ip_lap = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        ip_ft += gi(i, j) * v[i] * dft.values[p][j];
        ip_lap += gi(i, j) * v[i] * dlap.values[p][j];
      }
    }
    const double E_ff = quadratic(gi, ev.E[p], v, n);
    const double ric_ff = quadratic(gi, ric[p], v, n);
    const double E_hess = ev.moving ? contract_full(gi, ev.E[p], H[p], n) : 0.0;
    const double hess_sq = contract_full(gi, H[p], H[p], n);

    // (|grad f|^2)_t = 2 E(grad f, grad f) + 2 <grad f, grad f_t>
    const double lhs1 = (grad_sq_p[p] - grad_sq_m[p]) / dt2;
    out.residual[0][p] = lhs1 - 2.0 * E_ff - 2.0 * ip_ft;
    note(0, {lhs1, 2.0 * E_ff, 2.0 * ip_ft});

    // (Laplacian f)_t = 2 <E, Hess f> + Laplacian f_t - 2c tau phi <grad phi, grad f>
    const double lhs2 = (lap_p[p] - lap_m[p]) / dt2;
    out.residual[5][p] = lhs2 - 2.0 * E_hess - lap_ft[p];
    out.residual[1][p] = out.residual[5][p] - tension_term[p];
    note(1, {lhs2, 2.0 * E_hess, lap_ft[p], tension_term[p]});
    note(5, {lhs2, 2.0 * E_hess, lap_ft[p]});

    // Laplacian of df = d Laplacian f + Ric(grad f)
    Covector res3{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
      double ric_v = 0.0;
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) ric_v += ric[p](i, j) * gi(j, l) * v[l];
      res3[i] = rough.values[p][i] - dlap.values[p][i] - ric_v;
      note(2, {rough.values[p][i], dlap.values[p][i], ric_v});
    }
    double norm3 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) norm3 += gi(i, j) * res3[i] * res3[j];
    out.residual[2][p] = std::sqrt(std::max(0.0, norm3));

    // Laplacian |grad f|^2 = 2|Hess f|^2 + 2 Ric(grad f, grad f) + 2 <grad f, grad Laplacian f>
    out.residual[3][p] = lap_grad_sq[p] - 2.0 * hess_sq - 2.0 * ric_ff - 2.0 * ip_lap;
    note(3, {lap_grad_sq[p], 2.0 * hess_sq, 2.0 * ric_ff, 2.0 * ip_lap});

    // f_t = Laplacian f + |grad f|^2
    out.residual[4][p] = ft[p] - lap_f[p] - grad_sq[p];
    note(4, {ft[p], lap_f[p], grad_sq[p]});
  }
  for (int id = 0; id < kIdentityCount; ++id) {
    for (double v : out.residual[id]) out.max_abs[id] = std::max(out.max_abs[id], std::abs(v));
  }
  return out;
}

EstimateReport lemma21_check(const Trajectory& traj, double beta, double a, double b,
                             const EstimateSettings& settings) {
  if (!(beta >= 1.0)) throw Error("lemma21: beta must be >= 1");
  if (!(a > 0.0) || !(b > 0.0)) throw Error("lemma21: a and b must be > 0");
  if (std::abs(a + 2.0 * b - 1.0 / beta) > 1e-12) throw Error("lemma21: need a + 2b = 1/beta");
  if (traj.variant.kind == VariantKind::warped_product) {
    throw Error("lemma21: not defined for the warped_product variant");
  }
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 5) throw Error("lemma21: need at least five snapshots");
  const std::size_t N = traj.grid.size();
  const int n = traj.grid.dim();

  const CurvatureTable curv = curvature_table(traj);
  NodeMask all = empty_mask(traj);
  for (std::size_t k = 0; k < snaps.size(); ++k)
    if (snaps[k].t > 0.0) std::fill(all[k].begin(), all[k].end(), 1);
  EstimateReport r;
  r.kind = "lemma21";
  r.beta = beta;
  r.a = a;
  r.b = b;
  r.constants = constants_over(traj, curv, std::move(all), settings.tol_eig_factor);
  r.tol_eig = r.constants.tol_eig;
  const double k1 = r.constants.k1, k2 = r.constants.k2, C = r.constants.C_phi;
  const double a0 = coupling0(traj);

  auto F_at = [&](std::size_t j) {
    ScalarField F = liyau_quantity(traj, j, beta);
    for (double& v : F.values) v *= snaps[j].t;
    return F;
  };

  for (std::size_t k = 2; k + 2 < snaps.size(); ++k) {
    const double t = snaps[k].t;
    if (!in_window(settings, t)) continue;
    add_row(r, k, t, N);
    const std::size_t row = r.lhs.size() - 1;
    const Snapshot& s = snaps[k];
    const ScalarField F = F_at(k);
    const ScalarField Fm = F_at(k - 1);
    const ScalarField Fp = F_at(k + 1);
    const ScalarField lapF = laplace_beltrami(s.g, F);
    const ScalarField f = log_field(s.u);
    const CovectorField df = gradient(f);
    const CovectorField dF = gradient(F);
    const ScalarField grad_sq = gradient_norm_sq(s.g, f);
    const ScalarField ip = inner(s.g, df, dF);
    const ScalarField ft = log_time_derivative(traj, k);
    const double dt2 = snaps[k + 1].t - snaps[k - 1].t;
    for (std::size_t p = 0; p < N; ++p) {
      const double lhs = lapF[p] - (Fp[p] - Fm[p]) / dt2;
      const double g2 = grad_sq[p];
      const double q1 = g2 - ft[p];
      const double rhs = -2.0 * ip[p] + (2.0 * a * beta * t / n) * q1 * q1 - (g2 - beta * ft[p]) -
                         2.0 * k1 * beta * t * g2 -
                         (beta * t * n / (2.0 * b)) * std::max(k1 * k1, k2 * k2) -
                         (beta * a0 * a0 * n / (2.0 * b)) * C * C / t -
                         2.0 * (beta - 1.0) * a0 * C * g2;
      r.lhs[row][p] = lhs;
      r.rhs[row][p] = rhs;
      r.margin[row][p] = lhs - rhs;
      r.gated[row][p] = 1;
    }
  }
  finalize(r, traj, settings);
  return r;
}

}  // namespace rhflow
