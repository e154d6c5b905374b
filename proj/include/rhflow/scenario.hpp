#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rhflow/estimates.hpp"
#include "rhflow/harnack.hpp"
#include "rhflow/initial_data.hpp"

namespace rhflow {

class ScenarioError : public Error {
 public:
  using Error::Error;
};

struct CheckSpec {
  std::vector<double> betas{1.5, 2.0, 4.0};
  double rho = 0.0;                   // 0: 0.6 * shortest chart length
  std::array<int, 2> x0{-1, -1};      // -1: grid centre
  std::optional<double> cprime;       // local estimate; fitted on the run when absent
  std::optional<double> cprime_harnack;
  double c_tol = 10.0;
  double tol_eig = 1e-8;
  std::optional<std::pair<double, double>> time_window;
  int pairs_space = 5;
  int pairs_time = 4;
  HarnackMode harnack_mode = HarnackMode::compact;
  double harnack_beta = 2.0;
  int substeps = 32;
  int r_max = 0;
  double lemma21_beta = 1.5;
  double lemma21_a = 0.0;  // 0: 1/(3 beta)
  double lemma21_b = 0.0;  // 0: (1/beta - a)/2
  double cutoff_rho = 0.0;  // 0: rho
  double cutoff_tau = 0.0;  // 0: T/4
  double cutoff_T = 0.0;    // 0: T
  int cutoff_samples = 512;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  Grid grid;
  FlowVariant variant;
  AlphaSchedule schedule;
  FlowConfig config;
  MetricSpec metric;
  std::vector<Expression> phi;
  Expression u;
  double T = 0.0;
  double dt = 0.0;
  double t_start = 0.0;
  int stride = 1;
  CheckSpec checks;
  std::string output_directory;

  std::size_t x0_node() const;
  EstimateSettings estimate_settings() const;
};

/// Parses and validates a scenario document.  Unknown fields are rejected;
/// defaults are filled in so that scenario_to_json echoes the full config.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::string& path);
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& s);

/// Builds the initial data and run parameters.
RunSpec make_run_spec(const Scenario& s);

}  // namespace rhflow
