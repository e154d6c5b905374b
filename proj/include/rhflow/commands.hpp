#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "rhflow/estimates.hpp"

namespace rhflow {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitError = 2 };

struct RunOptions {
  /// Run directory; defaults to <output root>/<output.directory or name>.
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

struct CheckOptions {
  std::optional<double> tol_eig;
  std::optional<double> c_tol;
  std::optional<double> cprime;
  bool full_fields = false;
  GlobalForm global_form = GlobalForm::printed;
};

inline constexpr const char* kCheckNames[] = {"identities", "global", "local",
                                              "lemma21",    "harnack", "cutoff"};

/// Each command reports errors on `err` and returns an ExitCode; it never
/// throws.  `out` receives a short human-readable summary.
int cmd_run(const std::filesystem::path& scenario_path, const RunOptions& options,
            std::ostream& out, std::ostream& err);
int cmd_check(const std::filesystem::path& run_dir, const std::string& which,
              const CheckOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

std::filesystem::path run_directory_for(const std::string& scenario_name,
                                        const std::string& output_directory,
                                        const RunOptions& options);

}  // namespace rhflow
