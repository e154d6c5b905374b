#include "rhflow/persistence.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace rhflow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  std::string s(buf, res.ptr);
  // keep JSON numbers recognisably floating
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

void dump_rec(const json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string pad_end = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case json::value_t::number_float: {
      const double v = j.get<double>();
      // JSON has no NaN/Infinity literals; non-finite values become strings
      if (!std::isfinite(v)) {
        out += '"' + format_double(v) + '"';
      } else {
        out += format_double(v);
      }
      break;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad + json(it.key()).dump() + (indent > 0 ? ": " : ":");
        dump_rec(it.value(), indent, depth + 1, out);
      }
      out += nl + pad_end + "}";
      break;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      // arrays of scalars stay on one line
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      out += "[";
      if (!flat) out += nl;
      bool first = true;
      for (const auto& e : j) {
        if (!first) {
          out += ",";
          out += flat ? "" : nl;
        }
        first = false;
        if (!flat) out += pad;
        dump_rec(e, indent, depth + 1, out);
      }
      if (!flat) out += nl + pad_end;
      out += "]";
      break;
    }
    default:
      out += j.dump();
  }
}

std::string snap_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%05zu.json", k);
  return buf;
}

json diagnostics_to_json(const SnapshotDiagnostics& d) {
  return {{"alpha", d.alpha},         {"metric_min_eigenvalue", d.metric_min_eigenvalue},
          {"ric_min", d.ric_min},     {"ric_max", d.ric_max},
          {"phi_max", d.phi_max},     {"t_phi_max", d.t_phi_max},
          {"u_min", d.u_min},         {"u_max", d.u_max}};
}

SnapshotDiagnostics diagnostics_from_json(const json& j) {
  SnapshotDiagnostics d;
  d.alpha = j.at("alpha").get<double>();
  d.metric_min_eigenvalue = j.at("metric_min_eigenvalue").get<double>();
  d.ric_min = j.at("ric_min").get<double>();
  d.ric_max = j.at("ric_max").get<double>();
  d.phi_max = j.at("phi_max").get<double>();
  d.t_phi_max = j.at("t_phi_max").get<double>();
  d.u_min = j.at("u_min").get<double>();
  d.u_max = j.at("u_max").get<double>();
  return d;
}

json inventory(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "manifest.json" || name.rfind(".tmp_", 0) == 0) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  json files = json::array();
  for (const auto& name : names) {
    const std::string bytes = read_file(dir / name);
    files.push_back({{"name", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  return files;
}

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::string out;
  dump_rec(j, indent, 0, out);
  out += "\n";
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 0xf];
  }
  return s;
}

fs::path default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunDirectoryError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_run_file(const fs::path& dir, const std::string& name, const std::string& content) {
  const fs::path tmp = dir / (".tmp_" + name);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RunDirectoryError("cannot write " + (dir / name).string());
    out << content;
    if (!out) throw RunDirectoryError("write failed for " + (dir / name).string());
  }
  fs::rename(tmp, dir / name);
}

json snapshot_to_json(const Snapshot& s) {
  const int n = s.g.dim();
  json g = json::array();
  for (const auto& m : s.g.values()) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g.push_back(m(i, j));
  }
  json phi = json::array();
  for (const auto& c : s.phi.components) phi.push_back(c);
  return {{"t", s.t}, {"g", g}, {"phi", phi}, {"u", s.u.values}};
}

Snapshot snapshot_from_json(const json& j, const Grid& grid) {
  const int n = grid.dim();
  const auto gv = j.at("g").get<std::vector<double>>();
  if (gv.size() != grid.size() * static_cast<std::size_t>(n * n)) {
    throw RunDirectoryError("snapshot metric has the wrong size");
  }
  std::vector<Mat2> mats(grid.size(), Mat2::identity());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) mats[p](a, b) = gv[p * n * n + a * n + b];
  }
  const auto& phij = j.at("phi");
  MapField phi(grid, static_cast<int>(phij.size()));
  for (std::size_t mu = 0; mu < phij.size(); ++mu) {
    phi.components[mu] = phij[mu].get<std::vector<double>>();
    if (phi.components[mu].size() != grid.size()) throw RunDirectoryError("snapshot phi has the wrong size");
  }
  Snapshot s{j.at("t").get<double>(), MetricField(grid, std::move(mats)), std::move(phi),
             ScalarField(grid, j.at("u").get<std::vector<double>>(), ScalarTag::u)};
  return s;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run(const fs::path& dir, const Scenario& scenario, const Trajectory& traj,
               const RunTimes& times) {
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) fs::remove(e.path());
  }
  const json echo = scenario_to_json(scenario);
  write_run_file(dir, "scenario.json", dump_json(echo));
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    write_run_file(dir, snap_name(k), dump_json(snapshot_to_json(traj.snapshots[k]), 0));
  }
  json diag = json::array();
  for (const auto& d : traj.diagnostics) diag.push_back(diagnostics_to_json(d));
  json meta = {{"scenario", echo},
               {"tool_version", kToolVersion},
               {"started", times.started},
               {"finished", times.finished},
               {"halt_reason", traj.halt_reason},
               {"dt", traj.dt},
               {"T", traj.T},
               {"t_start", traj.t_start},
               {"stride", traj.stride},
               {"snapshots", traj.snapshots.size()},
               {"diagnostics", diag}};
  write_run_file(dir, "meta.json", dump_json(meta));
  json manifest = {{"scenario", echo},
                   {"tool_version", kToolVersion},
                   {"started", times.started},
                   {"finished", times.finished},
                   {"halt_reason", traj.halt_reason},
                   {"files", inventory(dir)}};
  write_run_file(dir, "manifest.json", dump_json(manifest));
}

void update_manifest(const fs::path& dir) {
  json manifest = json::parse(read_file(dir / "manifest.json"));
  manifest["files"] = inventory(dir);
  write_run_file(dir, "manifest.json", dump_json(manifest));
}

void verify_manifest(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw RunDirectoryError("run directory " + dir.string() + " does not exist");
  if (!fs::exists(dir / "manifest.json")) {
    throw RunDirectoryError("run directory " + dir.string() + " has no manifest.json");
  }
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw RunDirectoryError("corrupt manifest.json: " + std::string(e.what()));
  }
  std::set<std::string> listed;
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("name").get<std::string>();
    listed.insert(name);
    if (!fs::exists(dir / name)) throw RunDirectoryError("file listed in manifest is missing: " + name);
    if (sha256_hex(read_file(dir / name)) != f.at("sha256").get<std::string>()) {
      throw RunDirectoryError("hash mismatch for " + name);
    }
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.json" || !e.is_regular_file()) continue;
    if (!listed.count(name)) throw RunDirectoryError("file not listed in manifest: " + name);
  }
}

LoadedRun load_run(const fs::path& dir) {
  verify_manifest(dir);
  LoadedRun r;
  r.dir = dir;
  r.manifest = json::parse(read_file(dir / "manifest.json"));
  try {
    const json meta = json::parse(read_file(dir / "meta.json"));
    r.scenario = scenario_from_json(json::parse(read_file(dir / "scenario.json")));
    Trajectory& t = r.traj;
    t.grid = r.scenario.grid;
    t.schedule = r.scenario.schedule;
    t.variant = r.scenario.variant;
    t.config = r.scenario.config;
    t.dt = meta.at("dt").get<double>();
    t.T = meta.at("T").get<double>();
    t.t_start = meta.at("t_start").get<double>();
    t.stride = meta.at("stride").get<int>();
    t.halt_reason = meta.at("halt_reason").get<std::string>();
    const std::size_t count = meta.at("snapshots").get<std::size_t>();
    for (std::size_t k = 0; k < count; ++k) {
      t.snapshots.push_back(snapshot_from_json(json::parse(read_file(dir / snap_name(k))), t.grid));
    }
    for (const auto& d : meta.at("diagnostics")) t.diagnostics.push_back(diagnostics_from_json(d));
  } catch (const json::exception& e) {
    throw RunDirectoryError("corrupt run directory " + dir.string() + ": " + e.what());
  }
  return r;
}

}  // namespace rhflow
