#include "rhflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "rhflow/cutoff.hpp"
#include "rhflow/harnack.hpp"
#include "rhflow/persistence.hpp"
#include "rhflow/reports.hpp"
#include "rhflow/scenario.hpp"

namespace rhflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

/// Writes (or clears) failure_<which>.json and refreshes the manifest.
void settle(const fs::path& dir, const std::string& which, bool passed, const json& detail) {
  const std::string name = "failure_" + which + ".json";
  if (passed) {
    fs::remove(dir / name);
  } else {
    json f = {{"check", which}, {"status", "fail"}, {"detail", detail}};
    write_run_file(dir, name, dump_json(f));
  }
  update_manifest(dir);
}

json failure_detail(const EstimateReport& r) {
  json d = {{"kind", r.kind},
            {"beta", r.beta},
            {"tol_num", r.tol_num},
            {"gated_points", r.gated_points}};
  if (r.gated_points == 0) {
    d["reason"] = "hypothesis gate is empty";
  } else {
    d["reason"] = "margin below -tol_num";
    d["worst_margin"] = r.worst_margin;
    d["worst_t"] = r.times[r.worst_row];
    d["worst_node"] = r.worst_node;
  }
  if (r.kind == "local") d["rho_form"] = to_string(r.rho_form);
  if (r.kind == "global") d["global_form"] = to_string(r.global_form);
  return d;
}

void require_variant(const Trajectory& traj, const std::string& which) {
  if (traj.variant.kind == VariantKind::warped_product) {
    throw Error("check '" + which + "' is not available for the warped_product variant");
  }
}

struct CprimeChoice {
  double value = 0.0;
  std::string source;
};

int check_estimates(const LoadedRun& run, const std::string& which, const CheckOptions& opt,
                    const EstimateSettings& settings, std::ostream& out) {
  const Trajectory& traj = run.traj;
  const Scenario& sc = run.scenario;
  std::vector<EstimateReport> reports;
  json doc;
  std::size_t asserted_begin = 0;
  if (which == "global") {
    const GlobalForm other = opt.global_form == GlobalForm::printed ? GlobalForm::sharp : GlobalForm::printed;
    reports.push_back(check_global(traj, settings, opt.global_form));
    reports.push_back(check_global(traj, settings, other));
    doc["asserted_form"] = to_string(opt.global_form);
    doc["ric_nonneg_everywhere"] = reports[0].constants.ric_nonneg;
    doc["note"] = reports[0].constants.ric_nonneg
                      ? "Ric >= -tol_eig at every reported point"
                      : "Ric dips below -tol_eig somewhere; points there are excluded and counted";
  } else if (which == "local") {
    const std::size_t x0 = sc.x0_node();
    json sources = json::array();
    for (double beta : sc.checks.betas) {
      for (RhoForm form : {RhoForm::printed, RhoForm::squared}) {
        CprimeChoice c;
        if (sc.checks.cprime) {
          c = {*sc.checks.cprime, "scenario"};
        } else if (opt.cprime) {
          c = {*opt.cprime, "flag"};
        } else {
          c = {fit_cprime(traj, beta, sc.checks.rho, x0, form, settings), "fitted_in_sample"};
        }
        reports.push_back(check_local(traj, beta, sc.checks.rho, x0, c.value, form, settings));
        sources.push_back({{"beta", beta}, {"rho_form", to_string(form)}, {"cprime", c.value},
                           {"source", c.source}});
      }
    }
    doc["cprime"] = sources;
    if (sources[0]["source"] == "fitted_in_sample") {
      doc["note"] = "C' fitted on this run (in-sample); margins are >= 0 by construction";
    }
  } else {
    require_variant(traj, which);
    reports.push_back(lemma21_check(traj, sc.checks.lemma21_beta, sc.checks.lemma21_a,
                                    sc.checks.lemma21_b, settings));
  }
  const std::size_t asserted_end = which == "global" ? 1 : reports.size();

  bool passed = true;
  json failures = json::array();
  for (std::size_t i = asserted_begin; i < asserted_end; ++i) {
    if (!reports[i].passed()) {
      passed = false;
      failures.push_back(failure_detail(reports[i]));
    }
  }
  json list = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    json r = estimate_json(reports[i], opt.full_fields);
    r["asserted"] = i >= asserted_begin && i < asserted_end;
    list.push_back(std::move(r));
  }
  doc["check"] = which;
  doc["passed"] = passed;
  doc["reports"] = std::move(list);
  write_run_file(run.dir, which + ".csv", estimate_csv(reports));
  write_run_file(run.dir, which + ".json", dump_json(doc));
  settle(run.dir, which, passed, failures);

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << which;
    if (r.kind == "global") out << " [" << to_string(r.global_form) << ']';
    if (r.kind != "global") out << " beta=" << r.beta;
    if (r.kind == "local") out << " [" << to_string(r.rho_form) << "] C'=" << r.cprime;
    out << ": worst margin " << r.worst_margin << ", tol_num " << r.tol_num << ", gated "
        << r.gated_points << '/' << (r.gated_points + r.excluded_points)
        << (i < asserted_end ? (r.passed() ? "  PASS" : "  FAIL") : "  (not asserted)") << '\n';
  }
  return passed ? kExitPass : kExitFail;
}

int check_identities_cmd(const LoadedRun& run, const CheckOptions& opt, double c_tol,
                         std::ostream& out) {
  require_variant(run.traj, "identities");
  const IdentityReport r = check_identities(run.traj, c_tol);
  write_run_file(run.dir, "identities.csv", identities_csv(r));
  write_run_file(run.dir, "identities.json", dump_json(identities_json(r, opt.full_fields)));
  json failures = json::array();
  for (int i = 0; i < kIdentityCount; ++i) {
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, row.max_abs[i]);
    out << kIdentityNames[i] << ": max residual " << worst << ", ratio to tolerance "
        << r.worst_ratio[i] << (r.asserted[i] ? (r.worst_ratio[i] <= 1.0 ? "  PASS" : "  FAIL") : "  (diagnostic)")
        << '\n';
    if (r.asserted[i] && !(r.worst_ratio[i] <= 1.0)) {
      failures.push_back({{"identity", kIdentityNames[i]}, {"ratio_to_tolerance", r.worst_ratio[i]}});
    }
  }
  settle(run.dir, "identities", r.passed(), failures);
  return r.passed() ? kExitPass : kExitFail;
}

int check_harnack_cmd(const LoadedRun& run, const CheckOptions& opt, const EstimateSettings& settings,
                      std::ostream& out) {
  const Scenario& sc = run.scenario;
  const auto pairs = pair_lattice(run.traj, sc.checks.pairs_space, sc.checks.pairs_time);
  if (pairs.empty()) throw Error("no pairs");
  HarnackSettings hs;
  hs.mode = sc.checks.harnack_mode;
  hs.form = opt.global_form;
  hs.beta = sc.checks.harnack_beta;
  hs.gamma.substeps = sc.checks.substeps;
  hs.gamma.r_max = sc.checks.r_max;
  hs.c_tol = settings.c_tol;
  hs.tol_eig_factor = settings.tol_eig_factor;
  std::string source;
  if (hs.mode == HarnackMode::complete) {
    if (sc.checks.cprime_harnack) {
      hs.cprime = *sc.checks.cprime_harnack;
      source = "scenario";
    } else if (opt.cprime) {
      hs.cprime = *opt.cprime;
      source = "flag";
    } else {
      EstimateSettings all = settings;
      all.window.reset();
      hs.cprime = fit_cprime(run.traj, hs.beta, std::numeric_limits<double>::infinity(),
                             sc.x0_node(), RhoForm::printed, all);
      source = "fitted_in_sample";
    }
  }
  const HarnackReport r = check_harnack(run.traj, pairs, hs);
  json doc = harnack_json(r);
  if (!source.empty()) doc["cprime_source"] = source;
  write_run_file(run.dir, "harnack.csv", harnack_csv(r));
  write_run_file(run.dir, "harnack.json", dump_json(doc));
  json detail = {{"gated_pairs", r.gated_pairs}, {"tol_num", r.tol_num}};
  if (r.gated_pairs == 0) {
    detail["reason"] = "hypothesis gate is empty";
  } else {
    detail["reason"] = "margin below -tol_num";
    detail["worst_margin"] = r.worst_margin;
    detail["worst_pair"] = r.worst_row;
  }
  settle(run.dir, "harnack", r.passed(), detail);
  out << "harnack [" << to_string(r.mode) << "] pairs " << r.rows.size() << ", gated "
      << r.gated_pairs << ", worst margin " << r.worst_margin << ", tol_num " << r.tol_num
      << (r.passed() ? "  PASS" : "  FAIL") << '\n'
      << "note: " << r.gamma_note << '\n';
  return r.passed() ? kExitPass : kExitFail;
}

int check_cutoff_cmd(const LoadedRun& run, std::ostream& out) {
  const auto& c = run.scenario.checks;
  const CutoffReport r =
      cutoff_verify(cutoff_build(c.cutoff_rho, c.cutoff_tau, c.cutoff_T), c.cutoff_samples, c.cutoff_samples);
  write_run_file(run.dir, "cutoff.json", dump_json(cutoff_json(r)));
  settle(run.dir, "cutoff", r.passed(), {{"failures", r.failures}});
  out << "cutoff: C_bar " << r.C_bar << ", C_a " << r.C_a[0] << ' ' << r.C_a[1] << ' ' << r.C_a[2]
      << (r.passed() ? "  PASS" : "  FAIL") << '\n';
  for (const auto& f : r.failures) out << "  " << f << '\n';
  return r.passed() ? kExitPass : kExitFail;
}

}  // namespace

fs::path run_directory_for(const std::string& scenario_name, const std::string& output_directory,
                           const RunOptions& options) {
  if (options.out) return *options.out;
  const fs::path sub = output_directory.empty() ? fs::path(scenario_name) : fs::path(output_directory);
  return sub.is_absolute() ? sub : default_output_root() / sub;
}

int cmd_run(const fs::path& scenario_path, const RunOptions& options, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    Scenario sc = load_scenario(scenario_path.string());
    if (options.seed) sc.seed = *options.seed;
    const fs::path dir = run_directory_for(sc.name, sc.output_directory, options);
    RunTimes times;
    times.started = utc_now();
    const Trajectory traj = run(make_run_spec(sc));
    times.finished = utc_now();
    write_run(dir, sc, traj, times);
    out << "run " << sc.name << ": " << traj.snapshots.size() << " snapshots, halt reason '"
        << traj.halt_reason << "' -> " << dir.string() << '\n';
    if (!traj.completed()) {
      settle(dir, "run", false,
             {{"reason", traj.halt_reason},
              {"t_last", traj.snapshots.empty() ? 0.0 : traj.snapshots.back().t}});
      return int(kExitFail);
    }
    return int(kExitPass);
  });
}

int cmd_check(const fs::path& run_dir, const std::string& which, const CheckOptions& options,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (std::find(std::begin(kCheckNames), std::end(kCheckNames), which) == std::end(kCheckNames)) {
      throw Error("unknown check '" + which + "'");
    }
    const LoadedRun run = load_run(run_dir);
    EstimateSettings settings = run.scenario.estimate_settings();
    if (options.tol_eig) settings.tol_eig_factor = *options.tol_eig;
    if (options.c_tol) settings.c_tol = *options.c_tol;
    if (which == "identities") return check_identities_cmd(run, options, settings.c_tol, out);
    if (which == "harnack") return check_harnack_cmd(run, options, settings, out);
    if (which == "cutoff") return check_cutoff_cmd(run, out);
    return check_estimates(run, which, options, settings, out);
  });
}

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedRun run = load_run(run_dir);
    const Trajectory& traj = run.traj;
    const std::size_t x0 = run.scenario.x0_node();
    EstimateSettings settings = run.scenario.estimate_settings();
    settings.window.reset();
    std::optional<EstimateReport> global;
    if (traj.snapshots.size() >= 2) global = check_global(traj, settings, GlobalForm::printed);

    std::ostringstream csv;
    csv << "t,alpha,metric_min_eigenvalue,ric_min,ric_max,u_min,u_max,global_min_margin,lhs_x0,rhs_x0\n";
    std::size_t row = 0;
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      const auto& d = traj.diagnostics[k];
      csv << format_double(traj.snapshots[k].t) << ',' << format_double(d.alpha) << ','
          << format_double(d.metric_min_eigenvalue) << ',' << format_double(d.ric_min) << ','
          << format_double(d.ric_max) << ',' << format_double(d.u_min) << ','
          << format_double(d.u_max);
      if (global && row < global->snapshots.size() && global->snapshots[row] == k) {
        const auto& r = global->rows[row];
        csv << ',' << (r.gated_fraction > 0.0 ? format_double(r.min_margin) : "") << ','
            << format_double(global->lhs[row][x0]) << ',' << format_double(global->rhs[row][x0]);
        ++row;
      } else {
        csv << ",,,";
      }
      csv << '\n';
    }

    std::ostringstream sum;
    const Scenario& sc = run.scenario;
    sum << "scenario        " << sc.name << '\n'
        << "variant         " << to_string(sc.variant.kind) << '\n'
        << "grid            " << traj.grid.describe() << '\n'
        << "integrator      " << to_string(sc.config.integrator) << ", dt " << format_double(traj.dt)
        << ", stride " << traj.stride << '\n'
        << "time            [" << format_double(traj.t_start) << ", " << format_double(traj.T) << "]\n"
        << "snapshots       " << traj.snapshots.size() << '\n'
        << "halt reason     " << traj.halt_reason << '\n'
        << "tracked node    " << x0 << '\n';
    if (global) {
      sum << "global margin   " << global->worst_margin << " (tol_num " << global->tol_num
          << ", gated fraction " << global->gated_fraction() << ")\n";
    }
    sum << "\ncheck           status\n";
    for (const char* name : kCheckNames) {
      const fs::path p = run.dir / (std::string(name) + ".json");
      if (!fs::exists(p)) continue;
      const json j = json::parse(read_file(p));
      sum << std::left << std::setw(16) << name << (j.value("passed", false) ? "pass" : "FAIL") << '\n';
    }
    write_run_file(run.dir, "plot_data.csv", csv.str());
    write_run_file(run.dir, "summary.txt", sum.str());
    update_manifest(run.dir);
    out << sum.str();
    return int(kExitPass);
  });
}

}  // namespace rhflow
