#include "rhflow/reports.hpp"

#include <cmath>
#include <sstream>

#include "rhflow/persistence.hpp"

namespace rhflow {

using nlohmann::json;

namespace {

std::string num(double v) { return std::isfinite(v) ? format_double(v) : ""; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json constants_json(const HypothesisConstants& c) {
  return {{"k1", c.k1},
          {"k2", c.k2},
          {"C_phi", c.C_phi},
          {"ric_nonneg", c.ric_nonneg},
          {"ric_min", c.ric_min},
          {"tol_eig", c.tol_eig},
          {"masked_points", c.masked_points()}};
}

std::string estimate_csv(const std::vector<EstimateReport>& reports) {
  std::ostringstream os;
  os << "kind,form,beta,rho_form,t,min_margin,argmin_node,gated_fraction\n";
  for (const auto& r : reports) {
    const std::string form = r.kind == "global" ? to_string(r.global_form) : "";
    const std::string rho_form = r.kind == "local" ? to_string(r.rho_form) : "";
    for (const auto& row : r.rows) {
      const bool any = row.gated_fraction > 0.0;
      os << r.kind << ',' << form << ',' << format_double(r.beta) << ',' << rho_form << ','
         << format_double(row.t) << ',' << (any ? num(row.min_margin) : "") << ','
         << (any ? std::to_string(row.argmin_node) : "") << ','
         << format_double(row.gated_fraction) << '\n';
    }
  }
  return os.str();
}

json estimate_json(const EstimateReport& r, bool full_fields) {
  json j;
  j["kind"] = r.kind;
  j["passed"] = r.passed();
  if (r.kind == "global") j["global_form"] = to_string(r.global_form);
  j["beta"] = r.beta;
  if (r.kind == "local") {
    j["rho"] = finite_or_null(r.rho);
    j["rho_form"] = to_string(r.rho_form);
    j["cprime"] = r.cprime;
    j["x0"] = r.x0;
  }
  if (r.kind == "lemma21") {
    j["a"] = r.a;
    j["b"] = r.b;
  }
  j["constants"] = constants_json(r.constants);
  j["tolerances"] = {{"c_tol", r.c_tol}, {"tol_eig", r.tol_eig}, {"h", r.h},
                     {"dt", r.dt_snap},  {"scale", r.scale},     {"tol_num", r.tol_num}};
  j["worst_margin"] = finite_or_null(r.worst_margin);
  if (r.gated_points > 0) {
    j["worst_t"] = r.times[r.worst_row];
    j["worst_node"] = r.worst_node;
  }
  j["gated_points"] = r.gated_points;
  j["excluded_points"] = r.excluded_points;
  j["gated_fraction"] = r.gated_fraction();
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    json e = {{"snapshot", r.snapshots[i]},
              {"t", row.t},
              {"gated_fraction", row.gated_fraction}};
    if (row.gated_fraction > 0.0) {
      e["min_margin"] = row.min_margin;
      e["argmin_node"] = row.argmin_node;
    }
    if (full_fields) {
      std::vector<int> gated(r.gated[i].begin(), r.gated[i].end());
      e["lhs"] = r.lhs[i];
      e["rhs"] = r.rhs[i];
      e["margin"] = r.margin[i];
      e["gated"] = gated;
    }
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string harnack_csv(const HarnackReport& r) {
  std::ostringstream os;
  os << "x1,t1,x2,t2,gamma,r_max,u1,u2,log_ratio,log_rhs,margin,gated\n";
  for (const auto& row : r.rows) {
    os << row.pair.x1 << ',' << format_double(row.pair.t1) << ',' << row.pair.x2 << ','
       << format_double(row.pair.t2) << ',' << format_double(row.gamma) << ',' << row.r_max << ','
       << format_double(row.u1) << ',' << format_double(row.u2) << ','
       << format_double(row.log_ratio) << ',' << format_double(row.log_rhs) << ','
       << format_double(row.margin) << ',' << (row.gated ? 1 : 0) << '\n';
  }
  return os.str();
}

json harnack_json(const HarnackReport& r) {
  json j;
  j["mode"] = to_string(r.mode);
  if (r.mode == HarnackMode::compact) j["form"] = to_string(r.form);
  j["passed"] = r.passed();
  j["beta"] = r.beta;
  j["cprime"] = r.cprime;
  j["A"] = {r.A1, r.A2, r.A3};
  j["constants"] = constants_json(r.constants);
  j["substeps"] = r.substeps;
  j["tolerances"] = {{"c_tol", r.c_tol}, {"h", r.h},         {"dt", r.dt_snap},
                     {"scale", r.scale}, {"tol_num", r.tol_num}};
  j["pairs"] = r.rows.size();
  j["gated_pairs"] = r.gated_pairs;
  if (r.gated_pairs > 0) {
    j["worst_margin"] = r.worst_margin;
    j["worst_pair"] = r.worst_row;
  }
  j["gamma_note"] = r.gamma_note;
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"x1", row.pair.x1},
                    {"t1", row.pair.t1},
                    {"x2", row.pair.x2},
                    {"t2", row.pair.t2},
                    {"gamma", row.gamma},
                    {"r_max", row.r_max},
                    {"u1", row.u1},
                    {"u2", row.u2},
                    {"log_ratio", row.log_ratio},
                    {"log_rhs", row.log_rhs},
                    {"margin", row.margin},
                    {"gated", row.gated}});
  }
  j["rows"] = std::move(rows);
  return j;
}

bool IdentityReport::passed() const {
  if (rows.empty()) return false;
  for (int i = 0; i < kIdentityCount; ++i) {
    if (asserted[i] && !(worst_ratio[i] <= 1.0)) return false;
  }
  return true;
}

IdentityReport check_identities(const Trajectory& traj, double c_tol) {
  IdentityReport r;
  r.c_tol = c_tol;
  r.h = traj.grid.h_max();
  r.dt_snap = traj.snapshot_spacing();
  for (int i = 0; i < kIdentityCount; ++i) r.asserted[i] = i + 1 < kIdentityCount;
  const double factor = c_tol * (r.h * r.h + r.dt_snap);
  for (std::size_t k = 1; k + 1 < traj.snapshots.size(); ++k) {
    if (!(traj.snapshots[k - 1].t > 0.0)) continue;
    r.rows.push_back(identity_residuals(traj, k));
    const auto& row = r.rows.back();
    for (int i = 0; i < kIdentityCount; ++i) {
      const double tol = factor * row.scale[i];
      const double ratio = row.max_abs[i] == 0.0 ? 0.0 : row.max_abs[i] / tol;
      r.worst_ratio[i] = std::max(r.worst_ratio[i], ratio);
    }
  }
  if (r.rows.empty()) throw Error("identities: need three consecutive snapshots with t > 0");
  return r;
}

std::string identities_csv(const IdentityReport& r) {
  std::ostringstream os;
  os << "snapshot,t";
  for (const char* name : kIdentityNames) os << ',' << name << ',' << name << "_scale";
  os << '\n';
  for (const auto& row : r.rows) {
    os << row.snapshot << ',' << format_double(row.t);
    for (int i = 0; i < kIdentityCount; ++i) {
      os << ',' << format_double(row.max_abs[i]) << ',' << format_double(row.scale[i]);
    }
    os << '\n';
  }
  return os.str();
}

json identities_json(const IdentityReport& r, bool full_fields) {
  json j;
  j["passed"] = r.passed();
  j["tolerances"] = {{"c_tol", r.c_tol}, {"h", r.h}, {"dt", r.dt_snap}};
  json ids = json::array();
  for (int i = 0; i < kIdentityCount; ++i) {
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, row.max_abs[i]);
    ids.push_back({{"name", kIdentityNames[i]},
                   {"asserted", r.asserted[i]},
                   {"max_abs", worst},
                   {"worst_ratio_to_tolerance", r.worst_ratio[i]}});
  }
  j["identities"] = std::move(ids);
  json rows = json::array();
  for (const auto& row : r.rows) {
    json e = {{"snapshot", row.snapshot},
              {"t", row.t},
              {"max_abs", row.max_abs},
              {"scale", row.scale}};
    if (full_fields) {
      json fields;
      for (int i = 0; i < kIdentityCount; ++i) fields[kIdentityNames[i]] = row.residual[i];
      e["residual"] = std::move(fields);
    }
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

json cutoff_json(const CutoffReport& r) {
  json C_a = json::object();
  for (std::size_t i = 0; i < kCutoffExponents.size(); ++i) {
    C_a[format_double(kCutoffExponents[i])] = finite_or_null(r.C_a[i]);
  }
  return {{"passed", r.passed()},
          {"rho", r.rho},
          {"tau", r.tau},
          {"T", r.T},
          {"samples", {r.samples_r, r.samples_t}},
          {"r_max", r.r_max},
          {"support", r.support},
          {"plateau", r.plateau},
          {"initial_zero", r.initial_zero},
          {"monotone", r.monotone},
          {"C_bar", finite_or_null(r.C_bar)},
          {"C_a", C_a},
          {"failures", r.failures}};
}

}  // namespace rhflow
