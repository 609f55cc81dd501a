#include "memstab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "memstab/errors.hpp"

namespace memstab {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so that the
// remaining ones can be rejected as typos.
class Section {
public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string key(const std::string& name) const {
    return prefix_.empty() ? name : prefix_ + "." + name;
  }

  const json* get(const std::string& name) {
    seen_.insert(name);
    auto it = obj_.find(name);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  double number(const std::string& name, double fallback, bool required = false) {
    const json* v = get(name);
    if (v == nullptr) {
      if (required) throw ConfigError("missing required key \"" + key(name) + "\"");
      return fallback;
    }
    if (!v->is_number()) throw ConfigError("\"" + key(name) + "\" must be a number");
    return v->get<double>();
  }

  std::uint64_t unsigned_int(const std::string& name, std::uint64_t fallback) {
    const json* v = get(name);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
      throw ConfigError("\"" + key(name) + "\" must be a nonnegative integer");
    return v->get<std::uint64_t>();
  }

  void finish() const {
    for (const auto& [name, value] : obj_.items()) {
      if (!seen_.count(name)) throw ConfigError("unknown key \"" + key(name) + "\"");
    }
  }

private:
  std::string where() const { return prefix_.empty() ? "config" : "\"" + prefix_ + "\""; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("\"" + key + "\" must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError("\"" + key + "\" must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

TimeFunction parse_time_function(const json& v, const std::string& key) {
  try {
    if (v.is_number()) {
      const double c = v.get<double>();
      return c == 0.0 ? TimeFunction::zero() : TimeFunction::exponential(c, 0.0);
    }
    Section s(v, key);
    TimeFunction out;
    if (const json* terms = s.get("exp")) {
      std::vector<ExpTerm> list;
      if (!terms->is_array()) throw ConfigError("\"" + key + ".exp\" must be a list of [c, q]");
      for (const auto& t : *terms) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_number() || !t[1].is_number())
          throw ConfigError("\"" + key + ".exp\" must be a list of [c, q]");
        list.push_back({t[0].get<double>(), t[1].get<double>()});
      }
      out = TimeFunction::exp_poly(std::move(list));
    } else if (const json* table = s.get("table")) {
      Section ts(*table, key + ".table");
      const json* t = ts.get("t");
      const json* vals = ts.get("v");
      if (t == nullptr || vals == nullptr)
        throw ConfigError("\"" + key + ".table\" needs \"t\" and \"v\"");
      ts.finish();
      out = TimeFunction::table(number_list(*t, key + ".table.t"),
                                number_list(*vals, key + ".table.v"));
    } else {
      throw ConfigError("\"" + key + "\" must hold \"exp\" or \"table\"");
    }
    s.finish();
    return out;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("\"" + key + "\": " + e.what());
  }
}

json time_function_json(const TimeFunction& f) {
  if (f.kind() == TimeFunction::Kind::Table) {
    return {{"table", {{"t", std::vector<double>(f.times().begin(), f.times().end())},
                       {"v", std::vector<double>(f.values().begin(), f.values().end())}}}};
  }
  json terms = json::array();
  for (const auto& t : f.terms()) terms.push_back({t.coeff, t.rate});
  return {{"exp", terms}};
}

DelaySpec parse_delay(const json& v, const std::string& key, double r) {
  try {
    if (v.is_string()) {
      const auto name = v.get<std::string>();
      if (name == "inv_one_plus_abs_sin") return DelaySpec::inv_one_plus_abs_sin(r);
      if (name == "inv_one_plus_abs_cos") return DelaySpec::inv_one_plus_abs_cos(r);
      throw ConfigError("\"" + key + "\": unknown delay \"" + name + "\"");
    }
    Section s(v, key);
    DelaySpec out = DelaySpec::constant(0.0, r);
    if (const json* lag = s.get("constant")) {
      if (!lag->is_number()) throw ConfigError("\"" + key + ".constant\" must be a number");
      out = DelaySpec::constant(lag->get<double>(), r);
    } else if (const json* table = s.get("table")) {
      Section ts(*table, key + ".table");
      const json* t = ts.get("t");
      const json* lags = ts.get("lag");
      if (t == nullptr || lags == nullptr)
        throw ConfigError("\"" + key + ".table\" needs \"t\" and \"lag\"");
      ts.finish();
      out = DelaySpec::table(number_list(*t, key + ".table.t"),
                             number_list(*lags, key + ".table.lag"), r);
    } else {
      throw ConfigError("\"" + key + "\" must be a built-in name, \"constant\" or \"table\"");
    }
    s.finish();
    return out;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("\"" + key + "\": " + e.what());
  }
}

json delay_json(const DelaySpec& d) {
  switch (d.kind()) {
    case DelaySpec::Kind::InvOnePlusAbsSin:
      return "inv_one_plus_abs_sin";
    case DelaySpec::Kind::InvOnePlusAbsCos:
      return "inv_one_plus_abs_cos";
    case DelaySpec::Kind::Constant:
      return {{"constant", d.constant_lag()}};
    case DelaySpec::Kind::Table:
      return {{"table", {{"t", std::vector<double>(d.times().begin(), d.times().end())},
                         {"lag", std::vector<double>(d.lags().begin(), d.lags().end())}}}};
  }
  return nullptr;
}

InitialSegment parse_phi(const json& v, const std::string& key) {
  try {
    if (v.is_number() && v.get<double>() == 0.0) return {};
    Section s(v, key);
    InitialSegment out;
    if (const json* c = s.get("constant")) {
      out = InitialSegment::constant(number_list(*c, key + ".constant"));
    } else if (const json* b = s.get("bump")) {
      Section bs(*b, key + ".bump");
      const auto mode = static_cast<int>(bs.unsigned_int("mode", 1));
      const double amplitude = bs.number("amplitude", 1.0);
      const double center = bs.number("center", -0.5);
      const double width = bs.number("width", 0.5);
      bs.finish();
      out = InitialSegment::bump(mode, amplitude, center, width);
    } else if (const json* l = s.get("linear")) {
      Section ls(*l, key + ".linear");
      const json* at_zero = ls.get("at_zero");
      const json* slope = ls.get("slope");
      if (at_zero == nullptr || slope == nullptr)
        throw ConfigError("\"" + key + ".linear\" needs \"at_zero\" and \"slope\"");
      ls.finish();
      out = InitialSegment::linear(number_list(*at_zero, key + ".linear.at_zero"),
                                   number_list(*slope, key + ".linear.slope"));
    } else {
      throw ConfigError("\"" + key + "\" must hold \"constant\", \"bump\" or \"linear\"");
    }
    s.finish();
    return out;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("\"" + key + "\": " + e.what());
  }
}

json phi_json(const InitialSegment& phi) {
  auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  switch (phi.kind()) {
    case InitialSegment::Kind::Constant:
      return {{"constant", vec(phi.coeffs())}};
    case InitialSegment::Kind::Bump:
      return {{"bump",
               {{"mode", phi.mode()},
                {"amplitude", phi.amplitude()},
                {"center", phi.center()},
                {"width", phi.width()}}}};
    case InitialSegment::Kind::Linear:
      return {{"linear", {{"at_zero", vec(phi.coeffs())}, {"slope", vec(phi.slope())}}}};
  }
  return nullptr;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("\"" + key + "\" " + what);
}

}  // namespace

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  Section top(doc, "");

  const json* model = top.get("model");
  if (model == nullptr) throw ConfigError("missing required section \"model\"");
  {
    Section s(*model, "model");
    auto& m = cfg.model;
    m.nu = s.number("nu", 0.0, true);
    m.b1 = s.number("b1", 0.0, true);
    m.b2 = s.number("b2", 0.0, true);
    m.k = s.number("k", 0.0, true);
    require(m.nu > 0.0, "model.nu", "must be positive");
    require(m.b1 >= 0.0, "model.b1", "must be nonnegative");
    require(m.b2 >= 0.0, "model.b2", "must be nonnegative");
    require(m.k > 0.0, "model.k", "must be positive");
    if (const json* v = s.get("k1")) m.k1 = parse_time_function(*v, "model.k1");
    if (const json* v = s.get("k2")) m.k2 = parse_time_function(*v, "model.k2");
    if (const json* v = s.get("p")) m.p_coeffs = number_list(*v, "model.p");
    m.phi = InitialSegment::constant({1.0});
    if (const json* v = s.get("phi")) m.phi = parse_phi(*v, "model.phi");
    m.n_modes = s.unsigned_int("n_modes", 16);
    require(m.n_modes >= 1, "model.n_modes", "must be at least 1");
    const double r = s.number("r", 1.0);
    require(r > 0.0, "model.r", "must be positive");
    m.rho = parse_delay(s.get("rho") ? *s.get("rho") : json("inv_one_plus_abs_sin"), "model.rho", r);
    m.tau = parse_delay(s.get("tau") ? *s.get("tau") : json("inv_one_plus_abs_cos"), "model.tau", r);
    s.finish();
  }

  if (const json* sim = top.get("sim")) {
    Section s(*sim, "sim");
    auto& c = cfg.sim;
    c.dt = s.number("dt", c.dt);
    require(c.dt > 0.0, "sim.dt", "must be positive");
    c.T = s.number("T", c.T);
    require(c.T > 0.0, "sim.T", "must be positive");
    c.n_paths = s.unsigned_int("n_paths", c.n_paths);
    require(c.n_paths >= 1, "sim.n_paths", "must be at least 1");
    c.master_seed = s.unsigned_int("seed", c.master_seed);
    c.output_stride = s.unsigned_int("output_stride", c.output_stride);
    require(c.output_stride >= 1, "sim.output_stride", "must be at least 1");
    c.workers = static_cast<unsigned>(s.unsigned_int("workers", c.workers));
    s.finish();
  }

  if (const json* cert = top.get("certificate")) {
    Section s(*cert, "certificate");
    auto& c = cfg.cert;
    c.gamma1_fraction = s.number("gamma1_fraction", c.gamma1_fraction);
    require(c.gamma1_fraction > 0.0 && c.gamma1_fraction < 1.0, "certificate.gamma1_fraction",
            "must lie in (0, 1)");
    c.safety = s.number("safety", c.safety);
    require(c.safety > 0.0 && c.safety < 1.0, "certificate.safety", "must lie in (0, 1)");
    c.tol = s.number("tol", c.tol);
    require(c.tol > 0.0, "certificate.tol", "must be positive");
    if (const json* w = s.get("r3_weight")) {
      const std::string name = w->is_string() ? w->get<std::string>() : "";
      if (name == "sigma1") c.r3_weight = R3Weight::Sigma1;
      else if (name == "sigma") c.r3_weight = R3Weight::Sigma;
      else throw ConfigError("\"certificate.r3_weight\" must be \"sigma1\" or \"sigma\"");
    }
    s.finish();
  }

  if (const json* ver = top.get("verify")) {
    Section s(*ver, "verify");
    auto& v = cfg.verify;
    v.ci_mult = s.number("ci_mult", v.ci_mult);
    require(v.ci_mult >= 0.0, "verify.ci_mult", "must be nonnegative");
    v.window_fraction = s.number("window_fraction", v.window_fraction);
    require(v.window_fraction > 0.0 && v.window_fraction <= 1.0, "verify.window_fraction",
            "must lie in (0, 1]");
    v.N0 = static_cast<int>(s.unsigned_int("N0", static_cast<std::uint64_t>(v.N0)));
    v.min_rate_fraction = s.number("min_rate_fraction", v.min_rate_fraction);
    s.finish();
  }

  if (const json* en = top.get("energy")) {
    Section s(*en, "energy");
    auto& e = cfg.energy;
    e.levels = static_cast<int>(s.unsigned_int("levels", static_cast<std::uint64_t>(e.levels)));
    require(e.levels >= 2, "energy.levels", "must be at least 2");
    e.paths = s.unsigned_int("paths", e.paths);
    require(e.paths >= 1, "energy.paths", "must be at least 1");
    e.T = s.number("T", e.T);
    require(e.T > 0.0, "energy.T", "must be positive");
    e.min_ratio = s.number("min_ratio", e.min_ratio);
    s.finish();
  }

  if (const json* out = top.get("out")) {
    if (!out->is_string()) throw ConfigError("\"out\" must be a string");
    cfg.out_dir = out->get<std::string>();
  }
  top.finish();
  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  try {
    (void)map_heat_to_problem(cfg.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  try {
    validate_sim_config(cfg.sim, cfg.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(doc);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

json config_to_json(const RunConfig& cfg) {
  const auto& m = cfg.model;
  json doc;
  doc["model"] = {{"nu", m.nu},
                  {"b1", m.b1},
                  {"b2", m.b2},
                  {"k", m.k},
                  {"k1", time_function_json(m.k1)},
                  {"k2", time_function_json(m.k2)},
                  {"p", m.p_coeffs},
                  {"phi", phi_json(m.phi)},
                  {"n_modes", m.n_modes},
                  {"r", m.memory_horizon()},
                  {"rho", delay_json(m.rho)},
                  {"tau", delay_json(m.tau)}};
  doc["sim"] = {{"dt", cfg.sim.dt},
                {"T", cfg.sim.T},
                {"n_paths", cfg.sim.n_paths},
                {"seed", cfg.sim.master_seed},
                {"output_stride", cfg.sim.output_stride},
                {"workers", cfg.sim.workers}};
  doc["certificate"] = {{"gamma1_fraction", cfg.cert.gamma1_fraction},
                        {"safety", cfg.cert.safety},
                        {"tol", cfg.cert.tol},
                        {"r3_weight", cfg.cert.r3_weight == R3Weight::Sigma1 ? "sigma1" : "sigma"}};
  doc["verify"] = {{"ci_mult", cfg.verify.ci_mult},
                   {"window_fraction", cfg.verify.window_fraction},
                   {"N0", cfg.verify.N0},
                   {"min_rate_fraction", cfg.verify.min_rate_fraction}};
  doc["energy"] = {{"levels", cfg.energy.levels},
                   {"paths", cfg.energy.paths},
                   {"T", cfg.energy.T},
                   {"min_ratio", cfg.energy.min_ratio}};
  doc["out"] = cfg.out_dir;
  return doc;
}

}  // namespace memstab
