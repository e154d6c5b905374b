#include "rhflow/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rhflow {

using nlohmann::json;

namespace {

// ---- strict field access ---------------------------------------------------

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }
  ~Obj() = default;

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ScenarioError("scenario field '" + path + "': " + msg);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& get(const std::string& key) {
    if (!has(key)) fail(at(key), "missing required field");
    return j_.at(key);
  }

  double num(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(at(key), "must be finite");
    return d;
  }
  double num(const std::string& key, double def) { return has(key) ? num(key) : def; }

  long integer(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<long>();
  }
  long integer(const std::string& key, long def) { return has(key) ? integer(key) : def; }

  std::string str(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& def) { return has(key) ? str(key) : def; }

  /// Rejects any key that was never asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> num_list(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return out;
  }
  if (!v.is_array()) Obj::fail(path, "expected a number or an array of numbers");
  for (const auto& e : v) {
    if (!e.is_number()) Obj::fail(path, "expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::array<double, 2> pair_of(const json& v, const std::string& path, int dim) {
  const auto xs = num_list(v, path);
  if (static_cast<int>(xs.size()) != dim) {
    Obj::fail(path, "expected " + std::to_string(dim) + " value(s)");
  }
  return {xs[0], dim == 2 ? xs[1] : 0.0};
}

Term::Kind term_kind(const std::string& k, const std::string& path) {
  for (auto kind : {Term::Kind::constant, Term::Kind::mode, Term::Kind::gaussian,
                    Term::Kind::heat_kernel, Term::Kind::random_modes}) {
    if (k == to_string(kind)) return kind;
  }
  Obj::fail(path, "unknown term kind '" + k + "'");
}

Term parse_term(const json& j, const std::string& path, int dim) {
  Obj o(j, path);
  Term t;
  t.kind = term_kind(o.str("kind"), o.at("kind"));
  switch (t.kind) {
    case Term::Kind::constant:
      t.value = o.num("value");
      break;
    case Term::Kind::mode: {
      t.value = o.num("amplitude");
      const auto k = pair_of(o.get("wavenumber"), o.at("wavenumber"), dim);
      for (int a = 0; a < 2; ++a) {
        if (k[a] != std::floor(k[a])) Obj::fail(o.at("wavenumber"), "expected integers");
        t.wavenumber[a] = static_cast<int>(k[a]);
      }
      if (o.has("phase")) t.phase = pair_of(o.get("phase"), o.at("phase"), dim);
      break;
    }
    case Term::Kind::gaussian:
      t.value = o.num("amplitude");
      t.center = pair_of(o.get("center"), o.at("center"), dim);
      t.width = o.num("width");
      if (!(t.width > 0.0)) Obj::fail(o.at("width"), "must be > 0");
      break;
    case Term::Kind::heat_kernel:
      t.value = o.num("mass", 1.0);
      t.center = pair_of(o.get("center"), o.at("center"), dim);
      t.time = o.num("time");
      if (!(t.time > 0.0)) Obj::fail(o.at("time"), "must be > 0");
      break;
    case Term::Kind::random_modes:
      t.value = o.num("amplitude");
      t.count = static_cast<int>(o.integer("count"));
      t.max_wavenumber = static_cast<int>(o.integer("max_wavenumber", 2));
      if (t.count < 1) Obj::fail(o.at("count"), "must be >= 1");
      if (t.max_wavenumber < 1) Obj::fail(o.at("max_wavenumber"), "must be >= 1");
      break;
  }
  o.finish();
  return t;
}

Expression parse_expr(const json& j, const std::string& path, int dim) {
  Expression e;
  if (j.is_number()) {
    e.push_back(Term{Term::Kind::constant, j.get<double>()});
    return e;
  }
  if (j.is_object()) {
    e.push_back(parse_term(j, path, dim));
    return e;
  }
  if (!j.is_array() || j.empty()) Obj::fail(path, "expected a number, a term or a non-empty list of terms");
  for (std::size_t i = 0; i < j.size(); ++i) {
    e.push_back(parse_term(j[i], path + "[" + std::to_string(i) + "]", dim));
  }
  return e;
}

json term_to_json(const Term& t, int dim) {
  auto pair = [dim](const auto& a) {
    json v = json::array();
    for (int i = 0; i < dim; ++i) v.push_back(a[i]);
    return v;
  };
  json j;
  j["kind"] = to_string(t.kind);
  switch (t.kind) {
    case Term::Kind::constant:
      j["value"] = t.value;
      break;
    case Term::Kind::mode:
      j["amplitude"] = t.value;
      j["wavenumber"] = pair(t.wavenumber);
      j["phase"] = pair(t.phase);
      break;
    case Term::Kind::gaussian:
      j["amplitude"] = t.value;
      j["center"] = pair(t.center);
      j["width"] = t.width;
      break;
    case Term::Kind::heat_kernel:
      j["mass"] = t.value;
      j["center"] = pair(t.center);
      j["time"] = t.time;
      break;
    case Term::Kind::random_modes:
      j["amplitude"] = t.value;
      j["count"] = t.count;
      j["max_wavenumber"] = t.max_wavenumber;
      break;
  }
  return j;
}

json expr_to_json(const Expression& e, int dim) {
  json a = json::array();
  for (const auto& t : e) a.push_back(term_to_json(t, dim));
  return a;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::size_t Scenario::x0_node() const {
  const int i = checks.x0[0] >= 0 ? checks.x0[0] : grid.n(0) / 2;
  const int j = grid.dim() == 2 ? (checks.x0[1] >= 0 ? checks.x0[1] : grid.n(1) / 2) : 0;
  return grid.index(i, j);
}

EstimateSettings Scenario::estimate_settings() const {
  EstimateSettings s;
  s.c_tol = checks.c_tol;
  s.tol_eig_factor = checks.tol_eig;
  s.window = checks.time_window;
  return s;
}

Scenario scenario_from_json(const json& doc) {
  Obj root(doc, "");
  Scenario s;
  s.name = root.str("name");
  if (s.name.empty()) Obj::fail("name", "must be non-empty");
  if (root.has("seed")) {
    const json& v = root.get("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long>() >= 0)) {
      Obj::fail("seed", "expected a non-negative integer");
    }
    s.seed = v.get<std::uint64_t>();
  }

  {
    Obj g(root.get("grid"), "grid");
    const long dim = g.integer("dim");
    if (dim != 1 && dim != 2) Obj::fail("grid.dim", "must be 1 or 2");
    auto ns = num_list(g.get("n"), "grid.n");
    auto ls = num_list(g.get("length"), "grid.length");
    if (ns.size() == 1) ns.resize(dim, ns[0]);
    if (ls.size() == 1) ls.resize(dim, ls[0]);
    if (static_cast<long>(ns.size()) != dim) Obj::fail("grid.n", "expected one value per axis");
    if (static_cast<long>(ls.size()) != dim) Obj::fail("grid.length", "expected one value per axis");
    for (double v : ns)
      if (v != std::floor(v) || v < 8) Obj::fail("grid.n", "must be integers >= 8");
    for (double v : ls)
      if (!(v > 0.0)) Obj::fail("grid.length", "must be > 0");
    g.finish();
    s.grid = Grid(static_cast<int>(dim), {static_cast<int>(ns[0]), dim == 2 ? static_cast<int>(ns[1]) : 1},
                  {ls[0], dim == 2 ? ls[1] : 1.0});
  }
  const int dim = s.grid.dim();

  {
    const json& v = root.get("variant");
    std::string kind;
    if (v.is_string()) {
      kind = v.get<std::string>();
    } else {
      Obj o(v, "variant");
      kind = o.str("kind");
      s.variant.m = static_cast<int>(o.integer("m", 1));
      s.variant.mu = o.num("mu", 0.0);
      o.finish();
    }
    if (kind == "rh_alpha") s.variant.kind = VariantKind::rh_alpha;
    else if (kind == "warped_product") s.variant.kind = VariantKind::warped_product;
    else if (kind == "static") s.variant.kind = VariantKind::static_metric;
    else Obj::fail("variant", "unknown kind '" + kind + "' (rh_alpha, warped_product, static)");
    if (s.variant.kind == VariantKind::warped_product && s.variant.m < 1) {
      Obj::fail("variant.m", "must be >= 1");
    }
  }

  if (root.has("schedule")) {
    Obj o(root.get("schedule"), "schedule");
    s.schedule.alpha0 = o.num("alpha0", 1.0);
    s.schedule.alpha_min = o.num("alpha_min", s.schedule.alpha0);
    const std::string form = o.str("form", "constant");
    if (form == "constant") s.schedule.form = ScheduleForm::constant;
    else if (form == "linear") s.schedule.form = ScheduleForm::linear_decay;
    else if (form == "exponential") s.schedule.form = ScheduleForm::exponential_decay;
    else Obj::fail("schedule.form", "unknown form '" + form + "' (constant, linear, exponential)");
    s.schedule.rate = o.num("rate", 0.0);
    o.finish();
  }
  try {
    s.schedule.validate();
  } catch (const Error& e) {
    Obj::fail("schedule", e.what());
  }

  const std::string integ = root.str("integrator", "euler");
  if (integ == "euler") s.config.integrator = Integrator::euler;
  else if (integ == "rk2") s.config.integrator = Integrator::rk2;
  else Obj::fail("integrator", "must be euler or rk2");
  s.config.c_stab = root.num("c_stab", 0.2);
  if (!(s.config.c_stab > 0.0)) Obj::fail("c_stab", "must be > 0");

  if (root.has("initial")) {
    Obj o(root.get("initial"), "initial");
    if (o.has("metric")) {
      Obj m(o.get("metric"), "initial.metric");
      const std::string kind = m.str("kind", "flat");
      if (kind == "flat") {
        s.metric.kind = MetricSpec::Kind::flat;
      } else if (kind == "conformal") {
        s.metric.kind = MetricSpec::Kind::conformal;
        s.metric.factor = parse_expr(m.get("factor"), "initial.metric.factor", dim);
      } else if (kind == "exp_conformal") {
        s.metric.kind = MetricSpec::Kind::exp_conformal;
        s.metric.w = parse_expr(m.get("w"), "initial.metric.w", dim);
      } else if (kind == "components") {
        s.metric.kind = MetricSpec::Kind::components;
        s.metric.xx = parse_expr(m.get("xx"), "initial.metric.xx", dim);
        if (dim == 2) {
          s.metric.xy = m.has("xy") ? parse_expr(m.get("xy"), "initial.metric.xy", dim) : Expression{Term{}};
          s.metric.yy = parse_expr(m.get("yy"), "initial.metric.yy", dim);
        }
      } else {
        Obj::fail("initial.metric.kind", "unknown kind '" + kind + "'");
      }
      m.finish();
    }
    if (o.has("phi")) {
      const json& p = o.get("phi");
      if (!p.is_array() || p.empty()) Obj::fail("initial.phi", "expected a list with one entry per map component");
      for (std::size_t mu = 0; mu < p.size(); ++mu) {
        s.phi.push_back(parse_expr(p[mu], "initial.phi[" + std::to_string(mu) + "]", dim));
      }
    }
    if (o.has("u")) s.u = parse_expr(o.get("u"), "initial.u", dim);
    o.finish();
  }
  if (s.phi.empty()) s.phi.push_back(Expression{Term{Term::Kind::constant, 0.0}});
  if (s.u.empty()) s.u.push_back(Term{Term::Kind::constant, 1.0});
  try {
    s.variant.validate(static_cast<int>(s.phi.size()));
  } catch (const Error& e) {
    Obj::fail("variant", e.what());
  }

  bool phi_constant = true;
  for (const auto& c : s.phi) phi_constant = phi_constant && is_constant(c);
  std::optional<double> dt;
  {
    json empty = json::object();
    Obj o(root.has("time") ? root.get("time") : empty, "time");
    s.T = o.num("T", 0.1);
    if (!(s.T >= 0.0)) Obj::fail("time.T", "must be >= 0");
    s.t_start = o.num("t_start", phi_constant ? 0.0 : 0.01 * s.T);
    if (!(s.t_start >= 0.0) || s.t_start > s.T) Obj::fail("time.t_start", "must lie in [0, T]");
    if (o.has("dt")) {
      dt = o.num("dt");
      if (!(*dt > 0.0)) Obj::fail("time.dt", "must be > 0");
    }
    s.stride = static_cast<int>(o.integer("stride", 1));
    if (s.stride < 1) Obj::fail("time.stride", "must be >= 1");
    o.finish();
  }

  if (root.has("checks")) {
    Obj o(root.get("checks"), "checks");
    auto& c = s.checks;
    if (o.has("betas")) c.betas = num_list(o.get("betas"), "checks.betas");
    for (double b : c.betas)
      if (!(b > 1.0)) Obj::fail("checks.betas", "each beta must be > 1");
    c.rho = o.num("rho", 0.0);
    if (c.rho < 0.0) Obj::fail("checks.rho", "must be > 0");
    if (o.has("x0")) {
      const auto xs = pair_of(o.get("x0"), "checks.x0", dim);
      for (int a = 0; a < dim; ++a) {
        if (xs[a] != std::floor(xs[a]) || xs[a] < 0 || xs[a] >= s.grid.n(a)) {
          Obj::fail("checks.x0", "node indices must lie on the grid");
        }
        c.x0[a] = static_cast<int>(xs[a]);
      }
    }
    if (o.has("cprime")) c.cprime = o.num("cprime");
    if (o.has("cprime_harnack")) c.cprime_harnack = o.num("cprime_harnack");
    if ((c.cprime && *c.cprime < 0.0) || (c.cprime_harnack && *c.cprime_harnack < 0.0)) {
      Obj::fail("checks.cprime", "must be >= 0");
    }
    c.c_tol = o.num("c_tol", 10.0);
    c.tol_eig = o.num("tol_eig", 1e-8);
    if (!(c.c_tol >= 0.0)) Obj::fail("checks.c_tol", "must be >= 0");
    if (!(c.tol_eig >= 0.0)) Obj::fail("checks.tol_eig", "must be >= 0");
    if (o.has("time_window")) {
      const auto w = num_list(o.get("time_window"), "checks.time_window");
      if (w.size() != 2 || !(w[0] <= w[1])) Obj::fail("checks.time_window", "expected [t_lo, t_hi]");
      c.time_window = std::make_pair(w[0], w[1]);
    }
    if (o.has("pairs")) {
      Obj p(o.get("pairs"), "checks.pairs");
      c.pairs_space = static_cast<int>(p.integer("space", 5));
      c.pairs_time = static_cast<int>(p.integer("time", 4));
      if (c.pairs_space < 0 || c.pairs_time < 0) Obj::fail("checks.pairs", "counts must be >= 0");
      p.finish();
    }
    if (o.has("harnack")) {
      Obj h(o.get("harnack"), "checks.harnack");
      const std::string mode = h.str("mode", "compact");
      if (mode == "compact") c.harnack_mode = HarnackMode::compact;
      else if (mode == "complete") c.harnack_mode = HarnackMode::complete;
      else Obj::fail("checks.harnack.mode", "must be compact or complete");
      c.harnack_beta = h.num("beta", 2.0);
      if (!(c.harnack_beta > 1.0)) Obj::fail("checks.harnack.beta", "must be > 1");
      c.substeps = static_cast<int>(h.integer("substeps", 32));
      c.r_max = static_cast<int>(h.integer("r_max", 0));
      if (c.substeps < 1) Obj::fail("checks.harnack.substeps", "must be >= 1");
      if (c.r_max < 0) Obj::fail("checks.harnack.r_max", "must be >= 0 (0 = automatic)");
      h.finish();
    }
    if (o.has("lemma21")) {
      Obj l(o.get("lemma21"), "checks.lemma21");
      c.lemma21_beta = l.num("beta", 1.5);
      c.lemma21_a = l.num("a", 0.0);
      c.lemma21_b = l.num("b", 0.0);
      l.finish();
    }
    if (o.has("cutoff")) {
      Obj l(o.get("cutoff"), "checks.cutoff");
      c.cutoff_rho = l.num("rho", 0.0);
      c.cutoff_tau = l.num("tau", 0.0);
      c.cutoff_T = l.num("T", 0.0);
      c.cutoff_samples = static_cast<int>(l.integer("samples", 512));
      if (c.cutoff_samples < 2) Obj::fail("checks.cutoff.samples", "must be >= 2");
      l.finish();
    }
    o.finish();
  }
  auto& c = s.checks;
  if (c.rho == 0.0) c.rho = 0.6 * std::min(s.grid.length(0), dim == 2 ? s.grid.length(1) : s.grid.length(0));
  for (int a = 0; a < 2; ++a)
    if (c.x0[a] < 0) c.x0[a] = a < dim ? s.grid.n(a) / 2 : 0;
  if (!(c.lemma21_beta >= 1.0)) Obj::fail("checks.lemma21.beta", "must be >= 1");
  if (c.lemma21_a == 0.0) c.lemma21_a = 1.0 / (3.0 * c.lemma21_beta);
  if (c.lemma21_b == 0.0) c.lemma21_b = 0.5 * (1.0 / c.lemma21_beta - c.lemma21_a);
  if (!(c.lemma21_a > 0.0) || !(c.lemma21_b > 0.0) ||
      std::abs(c.lemma21_a + 2.0 * c.lemma21_b - 1.0 / c.lemma21_beta) > 1e-12) {
    Obj::fail("checks.lemma21", "need a, b > 0 with a + 2b = 1/beta");
  }
  if (c.cutoff_rho == 0.0) c.cutoff_rho = c.rho;
  if (c.cutoff_T == 0.0) c.cutoff_T = s.T > 0.0 ? s.T : 1.0;
  if (c.cutoff_tau == 0.0) c.cutoff_tau = 0.25 * c.cutoff_T;
  if (!(c.cutoff_tau > 0.0) || c.cutoff_tau > c.cutoff_T) Obj::fail("checks.cutoff.tau", "need 0 < tau <= T");

  if (root.has("output")) {
    Obj o(root.get("output"), "output");
    s.output_directory = o.str("directory", "");
    o.finish();
  }
  root.finish();

  // Stability precondition on the initial metric.
  const MetricField g0 = build_metric(s.grid, s.metric, s.seed);
  const double bound = stability_bound(g0, s.config.c_stab);
  if (!dt) {
    s.dt = 0.5 * bound;
  } else {
    s.dt = *dt;
    if (s.dt > bound) {
      std::ostringstream os;
      os << "scenario field 'time.dt': dt = " << s.dt
         << " exceeds the stability bound c_stab*h^2*lambda_min(g) = " << bound;
      throw ScenarioError(os.str());
    }
  }
  return s;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << source << ": parse error at " << line_col(text, e.byte == 0 ? 0 : e.byte - 1) << ": "
       << e.what();
    throw ScenarioError(os.str());
  }
  try {
    return scenario_from_json(doc);
  } catch (const ScenarioError& e) {
    throw ScenarioError(source + ": " + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

json scenario_to_json(const Scenario& s) {
  const int dim = s.grid.dim();
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  json n = json::array(), L = json::array();
  for (int a = 0; a < dim; ++a) {
    n.push_back(s.grid.n(a));
    L.push_back(s.grid.length(a));
  }
  j["grid"] = {{"dim", dim}, {"n", n}, {"length", L}};
  j["variant"] = {{"kind", to_string(s.variant.kind)}, {"m", s.variant.m}, {"mu", s.variant.mu}};
  j["schedule"] = {{"alpha0", s.schedule.alpha0},
                   {"alpha_min", s.schedule.alpha_min},
                   {"form", to_string(s.schedule.form)},
                   {"rate", s.schedule.rate}};
  j["integrator"] = to_string(s.config.integrator);
  j["c_stab"] = s.config.c_stab;
  json metric = {{"kind", to_string(s.metric.kind)}};
  switch (s.metric.kind) {
    case MetricSpec::Kind::flat: break;
    case MetricSpec::Kind::conformal: metric["factor"] = expr_to_json(s.metric.factor, dim); break;
    case MetricSpec::Kind::exp_conformal: metric["w"] = expr_to_json(s.metric.w, dim); break;
    case MetricSpec::Kind::components:
      metric["xx"] = expr_to_json(s.metric.xx, dim);
      if (dim == 2) {
        metric["xy"] = expr_to_json(s.metric.xy, dim);
        metric["yy"] = expr_to_json(s.metric.yy, dim);
      }
      break;
  }
  json phi = json::array();
  for (const auto& c : s.phi) phi.push_back(expr_to_json(c, dim));
  j["initial"] = {{"metric", metric}, {"phi", phi}, {"u", expr_to_json(s.u, dim)}};
  j["time"] = {{"T", s.T}, {"dt", s.dt}, {"t_start", s.t_start}, {"stride", s.stride}};
  const auto& c = s.checks;
  json x0 = json::array();
  for (int a = 0; a < dim; ++a) x0.push_back(c.x0[a]);
  json checks = {
      {"betas", c.betas},
      {"rho", c.rho},
      {"x0", x0},
      {"c_tol", c.c_tol},
      {"tol_eig", c.tol_eig},
      {"pairs", {{"space", c.pairs_space}, {"time", c.pairs_time}}},
      {"harnack",
       {{"mode", to_string(c.harnack_mode)},
        {"beta", c.harnack_beta},
        {"substeps", c.substeps},
        {"r_max", c.r_max}}},
      {"lemma21", {{"beta", c.lemma21_beta}, {"a", c.lemma21_a}, {"b", c.lemma21_b}}},
      {"cutoff",
       {{"rho", c.cutoff_rho}, {"tau", c.cutoff_tau}, {"T", c.cutoff_T}, {"samples", c.cutoff_samples}}}};
  checks["cprime"] = c.cprime ? json(*c.cprime) : json(nullptr);
  checks["cprime_harnack"] = c.cprime_harnack ? json(*c.cprime_harnack) : json(nullptr);
  checks["time_window"] =
      c.time_window ? json::array({c.time_window->first, c.time_window->second}) : json(nullptr);
  j["checks"] = checks;
  j["output"] = {{"directory", s.output_directory}};
  return j;
}

RunSpec make_run_spec(const Scenario& s) {
  RunSpec r{s.variant,
            s.schedule,
            s.config,
            build_metric(s.grid, s.metric, s.seed),
            build_map(s.grid, s.phi, s.seed),
            build_u(s.grid, s.u, s.seed),
            s.t_start,
            s.T,
            s.dt,
            s.stride};
  return r;
}

}  // namespace rhflow
