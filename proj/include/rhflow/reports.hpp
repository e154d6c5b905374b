#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rhflow/cutoff.hpp"
#include "rhflow/estimates.hpp"
#include "rhflow/harnack.hpp"

namespace rhflow {

/// One row per reported snapshot:
/// kind,form,beta,rho_form,t,min_margin,argmin_node,gated_fraction.
/// Several reports are concatenated under one header.
std::string estimate_csv(const std::vector<EstimateReport>& reports);

/// Summary, constants and per-row minima; per-node lhs/rhs/margin/gated
/// tables when full_fields is set.
nlohmann::json estimate_json(const EstimateReport& r, bool full_fields);

/// One row per pair.
std::string harnack_csv(const HarnackReport& r);
nlohmann::json harnack_json(const HarnackReport& r);

struct IdentityReport {
  std::vector<IdentityResiduals> rows;
  std::array<double, kIdentityCount> worst_ratio{};  // max_abs / tolerance
  std::array<bool, kIdentityCount> asserted{};
  double c_tol = 10.0;
  double h = 0.0, dt_snap = 0.0;

  bool passed() const;
};

/// Residuals at every interior snapshot with t > 0.  Each asserted
/// identity must satisfy max |residual| <= c_tol (h^2 + dt) scale, with
/// scale the largest term entering it.  The printed laplacian evolution
/// form is reported but not asserted.
IdentityReport check_identities(const Trajectory& traj, double c_tol);

std::string identities_csv(const IdentityReport& r);
nlohmann::json identities_json(const IdentityReport& r, bool full_fields);

nlohmann::json cutoff_json(const CutoffReport& r);

nlohmann::json constants_json(const HypothesisConstants& c);

}  // namespace rhflow
