#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhflow/flow.hpp"
#include "rhflow/scenario.hpp"

namespace rhflow {

inline constexpr const char* kToolVersion = "rhflow 0.3.0";
inline constexpr const char* kOutputRootEnv = "RHFLOW_OUTPUT_ROOT";

class RunDirectoryError : public Error {
 public:
  using Error::Error;
};

/// Shortest-form-free rendering: 17 significant digits, round-trip exact.
std::string format_double(double v);

/// Serialises with every floating value rendered by format_double.  Object
/// keys keep nlohmann's sorted order, so the output is deterministic.
std::string dump_json(const nlohmann::json& j, int indent = 1);

std::string sha256_hex(const std::string& bytes);

/// $RHFLOW_OUTPUT_ROOT, or "runs" when unset.
std::filesystem::path default_output_root();

/// Writes a file inside the run directory (atomically via a temporary).
void write_run_file(const std::filesystem::path& dir, const std::string& name,
                    const std::string& content);
std::string read_file(const std::filesystem::path& path);

nlohmann::json snapshot_to_json(const Snapshot& s);
Snapshot snapshot_from_json(const nlohmann::json& j, const Grid& grid);

struct RunTimes {
  std::string started;
  std::string finished;
};

std::string utc_now();

/// scenario.json, snap_NNNNN.json, meta.json, then manifest.json last.
void write_run(const std::filesystem::path& dir, const Scenario& scenario, const Trajectory& traj,
               const RunTimes& times);

/// Rewrites manifest.json with the current inventory, keeping the recorded
/// run metadata.  Called after every emitted report.
void update_manifest(const std::filesystem::path& dir);

struct LoadedRun {
  std::filesystem::path dir;
  Scenario scenario;
  Trajectory traj;
  nlohmann::json manifest;
};

/// Verifies the manifest (completeness and hashes) before reading.
LoadedRun load_run(const std::filesystem::path& dir);

/// Throws RunDirectoryError on a missing manifest, unlisted file, missing
/// file or hash mismatch.
void verify_manifest(const std::filesystem::path& dir);

}  // namespace rhflow
