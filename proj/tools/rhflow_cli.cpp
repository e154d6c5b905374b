#include <CLI11.hpp>

#include <iostream>

#include "rhflow/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ricci-harmonic flow estimate harness"};
  app.require_subcommand(1);

  rhflow::RunOptions run_opt;
  std::string scenario;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "integrate a scenario and persist the trajectory");
  run->add_option("scenario", scenario, "scenario JSON file")->required();
  auto* out_flag = run->add_option("--out", out_dir, "run directory");
  auto* seed_flag = run->add_option("--seed", seed, "override the scenario seed");

  rhflow::CheckOptions check_opt;
  std::string run_dir;
  std::string which;
  std::string form = "printed";
  double tol_eig = 0.0, c_tol = 0.0, cprime = 0.0;
  auto* check = app.add_subcommand("check", "evaluate a check over a stored run");
  check->add_option("run_dir", run_dir, "run directory")->required();
  check->add_option("--which", which, "check name")
      ->required()
      ->check(CLI::IsMember({"identities", "global", "local", "lemma21", "harnack", "cutoff"}));
  auto* tol_eig_flag = check->add_option("--tol-eig", tol_eig, "hypothesis tolerance factor");
  auto* c_tol_flag = check->add_option("--c-tol", c_tol, "numerical tolerance constant");
  auto* cprime_flag = check->add_option("--cprime", cprime, "C' for local and complete Harnack checks");
  check->add_flag("--full-fields", check_opt.full_fields, "dump per-node fields in the JSON report");
  check->add_option("--global-form", form, "asserted global form (also the compact Harnack C_n)")
      ->check(CLI::IsMember({"printed", "sharp"}));

  std::string report_dir;
  auto* report = app.add_subcommand("report", "write a summary table and plot data");
  report->add_option("run_dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rhflow::kExitError;
  }

  if (*run) {
    if (*out_flag) run_opt.out = out_dir;
    if (*seed_flag) run_opt.seed = seed;
    return rhflow::cmd_run(scenario, run_opt, std::cout, std::cerr);
  }
  if (*check) {
    if (*tol_eig_flag) check_opt.tol_eig = tol_eig;
    if (*c_tol_flag) check_opt.c_tol = c_tol;
    if (*cprime_flag) check_opt.cprime = cprime;
    check_opt.global_form = form == "sharp" ? rhflow::GlobalForm::sharp : rhflow::GlobalForm::printed;
    return rhflow::cmd_check(run_dir, which, check_opt, std::cout, std::cerr);
  }
  return rhflow::cmd_report(report_dir, std::cout, std::cerr);
}
