#include "gpdf/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "gpdf/blowup.hpp"
#include "gpdf/csv.hpp"
#include "gpdf/ensemble.hpp"
#include "gpdf/hierarchy.hpp"
#include "gpdf/nls.hpp"
#include "gpdf/numerics.hpp"
#include "gpdf/observables.hpp"
#include "gpdf/scattering.hpp"
#include "json.hpp"

#ifndef GPDF_VERSION
#define GPDF_VERSION "unknown"
#endif

namespace gpdf {

ConfigError::ConfigError(const std::string& what, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string library_version() { return GPDF_VERSION; }

// ---------------------------------------------------------------------------
// scenario table

const std::vector<ScenarioInfo>& scenario_list() {
  static const std::vector<ScenarioInfo> list{
      {"defocusing-scatter", "small defocusing Gaussian: pull-back Cauchy table and k-body distances"},
      {"focusing-blowup", "virial certificate against a focusing run, and shell windows T_j"},
      {"dichotomy", "trace growth of the blowup measure, weight-sum constant and truncation sweep"},
      {"hierarchy-residual", "hierarchy residual of the constant solution under step refinement"},
      {"higher-energy", "K functional per atom and along a defocusing run"},
      {"lemma-sum", "log-space super-exponential weight sums and fitted constant"},
  };
  return list;
}

bool is_scenario(const std::string& name) {
  const auto& l = scenario_list();
  return std::any_of(l.begin(), l.end(), [&](const ScenarioInfo& s) { return s.name == name; });
}

ScenarioConfig scenario_defaults(const std::string& name) {
  if (!is_scenario(name)) throw ConfigError("unknown scenario '" + name + "'", 0);
  ScenarioConfig c;
  c.name = name;
  c.b = 2.0 * GaussianProfile{c.measure_sigma}.x_moment();
  if (name == "defocusing-scatter") {
    c.extent = 32.0;
    c.points = 64;
    c.amplitude = 0.1;
    c.dt = 1e-2;
    c.t_max = 8.0;
  } else if (name == "focusing-blowup") {
    c.points = 64;
    c.amplitude = 8.0;
    c.lambda = -1.0;
    c.t_max = 2.0;
    c.snapshot_interval = 0.02;
  } else if (name == "dichotomy") {
    c.k_max = 32;
  } else if (name == "hierarchy-residual") {
    c.extent = 2.0 * std::numbers::pi;
    c.points = 16;
    c.dt = 1e-2;
    c.t_max = 0.1;
    c.snapshot_interval = 0.0;
  } else if (name == "higher-energy") {
    c.points = 64;
    c.t_max = 0.25;
    c.snapshot_interval = 0.05;
  } else if (name == "lemma-sum") {
    c.r = 1.5;
    c.k_list = {20, 40, 80};
  }
  return c;
}

// ---------------------------------------------------------------------------
// key table

namespace {

struct KeyDesc {
  std::string section;
  std::string key;
  std::string doc;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&)> set;  // throws std::invalid_argument
};

template <class T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument(std::string("expected ") + what);
  return v;
}

double parse_real(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  const double v = parse_number<double>(s, "a number");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("expected a comma-separated integer list");
    out.push_back(parse_number<int>(item.substr(b, e - b + 1), "a comma-separated integer list"));
  }
  return out;
}

KeyDesc real_key(std::string sec, std::string key, std::string doc, double ScenarioConfig::*m) {
  return {std::move(sec), std::move(key), std::move(doc), [m](const ScenarioConfig& c) { return format_double(c.*m); },
          [m](ScenarioConfig& c, const std::string& v) { c.*m = parse_real(v); }};
}

KeyDesc int_key(std::string sec, std::string key, std::string doc, int ScenarioConfig::*m) {
  return {std::move(sec), std::move(key), std::move(doc), [m](const ScenarioConfig& c) { return std::to_string(c.*m); },
          [m](ScenarioConfig& c, const std::string& v) { c.*m = parse_number<int>(v, "an integer"); }};
}

KeyDesc bool_key(std::string sec, std::string key, std::string doc, bool ScenarioConfig::*m) {
  return {std::move(sec), std::move(key), std::move(doc),
          [m](const ScenarioConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m](ScenarioConfig& c, const std::string& v) { c.*m = parse_bool(v); }};
}

const std::vector<KeyDesc>& key_table() {
  using C = ScenarioConfig;
  static const std::vector<KeyDesc> table = [] {
    std::vector<KeyDesc> t;
    t.push_back({"scenario", "name", "scenario to run (see list-scenarios)", [](const C& c) { return c.name; },
                 [](C& c, const std::string& v) { c.name = v; }});
    t.push_back(int_key("scenario", "threads", "worker threads for per-atom and per-row work", &C::threads));
    t.push_back({"scenario", "seed", "seed of the randomized property checks",
                 [](const C& c) { return std::to_string(c.seed); },
                 [](C& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v, "a non-negative integer"); }});
    t.push_back(real_key("grid", "extent", "box side length L", &C::extent));
    t.push_back(int_key("grid", "points", "samples per axis N (power of two)", &C::points));
    t.push_back(real_key("initial", "sigma", "width of the initial Gaussian", &C::sigma));
    t.push_back(real_key("initial", "amplitude", "factor applied to the normalized initial Gaussian", &C::amplitude));
    t.push_back(real_key("solver", "lambda", "+1 defocusing, -1 focusing", &C::lambda));
    t.push_back(real_key("solver", "dt", "time step (initial step for the adaptive policy)", &C::dt));
    t.push_back(real_key("solver", "t_max", "final time", &C::t_max));
    t.push_back({"solver", "policy", "fixed or adaptive", [](const C& c) { return c.policy; },
                 [](C& c, const std::string& v) {
                   if (v != "fixed" && v != "adaptive") throw std::invalid_argument("expected fixed or adaptive");
                   c.policy = v;
                 }});
    t.push_back(real_key("solver", "beta", "adaptive step exponent", &C::beta));
    t.push_back(real_key("solver", "dt_min", "smallest adaptive step", &C::dt_min));
    t.push_back(bool_key("solver", "dealias", "apply the 2/3 rule after each nonlinear phase", &C::dealias));
    t.push_back(real_key("solver", "snapshot_interval", "snapshot cadence; 0 keeps every step", &C::snapshot_interval));
    t.push_back(real_key("solver", "blowup_h1_threshold", "H1 norm that flags blowup", &C::blowup_h1_threshold));
    t.push_back(real_key("solver", "resolution_guard", "spectral tail share that flags lost resolution",
                         &C::resolution_guard));
    t.push_back(real_key("measure", "r", "growth exponent of the blowup measure (r > 1)", &C::r));
    t.push_back(int_key("measure", "J", "largest shell of the blowup measure", &C::J));
    t.push_back(real_key("measure", "sigma", "width of the base profile g", &C::measure_sigma));
    t.push_back(real_key("measure", "b", "variance cap of the shells M_j", &C::b));
    t.push_back(real_key("measure", "c_l4", "L4 constant of the shells M_j", &C::c_l4));
    t.push_back(int_key("hierarchy", "k_max", "largest marginal order", &C::k_max));
    t.push_back({"hierarchy", "k_list", "comma-separated orders for the weight sum (each >= 4)",
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.k_list.size(); ++i) s += (i ? "," : "") + std::to_string(c.k_list[i]);
                   return s;
                 },
                 [](C& c, const std::string& v) { c.k_list = parse_int_list(v); }});
    t.push_back(real_key("hierarchy", "alpha", "Sobolev weight of S^(k,alpha)", &C::alpha));
    t.push_back(int_key("hierarchy", "m_max", "largest K functional order", &C::m_max));
    t.push_back(int_key("hierarchy", "refinements", "number of halved steps in the residual study", &C::refinements));
    t.push_back(int_key("scattering", "levels", "dyadic check levels below t_max", &C::levels));
    t.push_back(bool_key("scattering", "enforce_window", "refuse t_max past the wraparound window",
                         &C::enforce_window));
    t.push_back(real_key("sweep", "r", "growth exponent of the swept measure", &C::sweep_r));
    t.push_back(int_key("sweep", "J", "largest shell of the swept measure", &C::sweep_J));
    t.push_back(int_key("sweep", "k", "marginal order of the swept trace", &C::sweep_k));
    t.push_back(int_key("sweep", "from", "first retained shell of the radius list", &C::sweep_from));
    t.push_back(int_key("sweep", "to", "last retained shell of the radius list", &C::sweep_to));
    return t;
  }();
  return table;
}

const KeyDesc* find_key(const std::string& section, const std::string& key) {
  for (const auto& d : key_table())
    if (d.section == section && d.key == key) return &d;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  const KeyDesc* desc;
  std::string value;
  int line;
};

}  // namespace

std::vector<std::string> config_key_docs() {
  std::vector<std::string> out;
  for (const auto& d : key_table()) out.push_back(d.section + "." + d.key + ": " + d.doc);
  return out;
}

ScenarioConfig parse_config(const std::string& text, const std::optional<std::string>& name_override) {
  std::vector<Entry> entries;
  std::set<const KeyDesc*> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  const Entry* name_entry = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header '" + line + "'", line_no);
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& d : key_table()) known = known || d.section == section;
      if (!known) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    if (section.empty()) throw ConfigError("key outside of a section", line_no);
    const std::string key = trim(line.substr(0, eq));
    const KeyDesc* d = find_key(section, key);
    if (!d) throw ConfigError("unknown key " + section + "." + key, line_no);
    if (!seen.insert(d).second) throw ConfigError("duplicate key " + section + "." + key, line_no);
    entries.push_back({d, trim(line.substr(eq + 1)), line_no});
  }
  for (const auto& e : entries)
    if (e.desc->section == "scenario" && e.desc->key == "name") name_entry = &e;

  std::string name;
  if (name_entry) {
    name = name_entry->value;
    if (name_override && *name_override != name)
      throw ConfigError("scenario.name '" + name + "' conflicts with the requested scenario '" + *name_override + "'",
                        name_entry->line);
    if (!is_scenario(name)) throw ConfigError("unknown scenario '" + name + "'", name_entry->line);
  } else if (name_override) {
    name = *name_override;
  } else {
    throw ConfigError("missing required key scenario.name (end of input at line " + std::to_string(line_no) + ")",
                      line_no);
  }

  ScenarioConfig cfg = scenario_defaults(name);
  for (const auto& e : entries) {
    try {
      e.desc->set(cfg, e.value);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(e.desc->section + "." + e.desc->key + ": " + err.what() + ", got '" + e.value + "'", e.line);
    }
  }
  return cfg;
}

std::string serialize_config(const ScenarioConfig& cfg) {
  std::string out, section;
  for (const auto& d : key_table()) {
    if (d.section != section) {
      if (!section.empty()) out += "\n";
      section = d.section;
      out += "[" + section + "]\n";
    }
    out += d.key + " = " + d.get(cfg) + "\n";
  }
  return out;
}

namespace {

SolverConfig solver_config(const ScenarioConfig& c) {
  SolverConfig s;
  s.lambda = c.lambda;
  s.dt_init = c.dt;
  s.policy = c.policy == "adaptive" ? StepPolicy::adaptive : StepPolicy::fixed;
  s.beta = c.beta;
  s.dt_min = c.dt_min;
  s.dealias = c.dealias;
  s.t_max = c.t_max;
  s.blowup_h1_threshold = c.blowup_h1_threshold;
  s.resolution_guard = c.resolution_guard;
  s.snapshot_interval = c.snapshot_interval;
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what, 0);
}

}  // namespace

void validate_config(const ScenarioConfig& c) {
  require(is_scenario(c.name), "unknown scenario '" + c.name + "'");
  require(c.threads >= 1 && c.threads <= 256, "scenario.threads must lie in [1, 256]");
  require(c.extent > 0.0 && std::isfinite(c.extent), "grid.extent must be positive");
  require(c.points >= 8 && c.points <= 256 && (c.points & (c.points - 1)) == 0,
          "grid.points must be a power of two in [8, 256]");
  require(c.sigma > 0.0, "initial.sigma must be positive");
  require(c.amplitude >= 0.0 && std::isfinite(c.amplitude), "initial.amplitude must be non-negative");
  try {
    solver_config(c).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what(), 0);
  }
  require(c.r > 1.0, "measure.r must exceed 1");
  require(c.J >= 1 && c.J <= 60, "measure.J must lie in [1, 60]");
  require(c.measure_sigma > 0.0, "measure.sigma must be positive");
  require(c.b > 0.0, "measure.b must be positive");
  require(c.c_l4 > 0.0, "measure.c_l4 must be positive");
  require(c.k_max >= 4 && c.k_max <= 64, "hierarchy.k_max must lie in [4, 64]");
  for (int k : c.k_list) require(k >= 4 && k <= 100000, "hierarchy.k_list entries must lie in [4, 100000]");
  require(c.alpha >= 0.0, "hierarchy.alpha must be non-negative");
  require(c.m_max >= 1 && c.m_max <= 4, "hierarchy.m_max must lie in [1, 4]");
  require(c.refinements >= 2 && c.refinements <= 8, "hierarchy.refinements must lie in [2, 8]");
  require(c.levels >= 1 && c.levels <= 20, "scattering.levels must lie in [1, 20]");
  require(c.sweep_r > 1.0, "sweep.r must exceed 1");
  require(c.sweep_J >= 1 && c.sweep_J <= 60, "sweep.J must lie in [1, 60]");
  require(c.sweep_k >= 1 && c.sweep_k <= 64, "sweep.k must lie in [1, 64]");
  require(c.sweep_from >= 0 && c.sweep_from <= c.sweep_to && c.sweep_to <= c.sweep_J,
          "sweep shells need 0 <= from <= to <= J");

  const BoxGrid grid(3, c.extent, c.points);
  const bool resolved = GaussianProfile{c.sigma}.resolved_on(grid);
  if (c.name == "defocusing-scatter") {
    require(c.lambda == 1.0, "defocusing-scatter needs solver.lambda = 1");
    require(resolved, "initial.sigma is not resolved on the grid");
    try {
      ScatteringConfig sc;
      sc.t_max = c.t_max;
      sc.levels = c.levels;
      sc.dt = c.dt;
      sc.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("scattering: ") + e.what(), 0);
    }
  } else if (c.name == "focusing-blowup") {
    require(c.lambda == -1.0, "focusing-blowup needs solver.lambda = -1");
    require(resolved, "initial.sigma is not resolved on the grid");
  } else if (c.name == "hierarchy-residual") {
    require(c.snapshot_interval == 0.0, "hierarchy-residual needs solver.snapshot_interval = 0");
    require(c.t_max >= 4.0 * c.dt, "hierarchy-residual needs t_max >= 4 dt");
  } else if (c.name == "higher-energy") {
    require(c.lambda == 1.0, "higher-energy needs solver.lambda = 1");
    require(GaussianProfile{2.0 * c.sigma}.resolved_on(grid) && resolved,
            "initial.sigma is not resolved on the grid");
  } else if (c.name == "lemma-sum") {
    require(!c.k_list.empty(), "lemma-sum needs hierarchy.k_list");
  }
}

// ---------------------------------------------------------------------------
// manifest

bool RunManifest::passed() const {
  return std::all_of(invariants.begin(), invariants.end(), [](const InvariantResult& r) { return r.passed; });
}

std::vector<std::string> RunManifest::failed() const {
  std::vector<std::string> out;
  for (const auto& r : invariants)
    if (!r.passed) out.push_back(r.name);
  return out;
}

namespace {

nlohmann::json number_or_text(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["scenario"] = m.scenario;
  j["version"] = m.version;
  j["passed"] = m.passed();
  j["failed"] = m.failed();
  j["wall_time_s"] = m.wall_time_s;
  j["statuses"] = m.statuses;
  j["config"] = m.config;
  auto& inv = j["invariants"] = nlohmann::ordered_json::array();
  for (const auto& r : m.invariants) inv.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  auto& met = j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.metrics) met[k] = number_or_text(v);
  auto& outs = j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& o : m.outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return j.dump(2) + "\n";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("GPDF_OUT"); env && *env) return env;
  return "gpdf-out";
}

std::vector<std::string> check_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read " + manifest_path.string());
  const auto j = nlohmann::json::parse(in);
  const auto dir = manifest_path.parent_path();
  std::vector<std::string> problems;
  for (const auto& o : j.at("outputs")) {
    const std::string file = o.at("file");
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) {
      problems.push_back(file + ": missing");
      continue;
    }
    const std::string actual = sha256_file(path);
    if (actual != o.at("sha256").get<std::string>()) problems.push_back(file + ": digest mismatch");
  }
  return problems;
}

// ---------------------------------------------------------------------------
// scenarios

namespace {

struct Run {
  const ScenarioConfig& cfg;
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<InvariantResult> invariants;
  std::map<std::string, double> metrics;
  std::vector<std::string> statuses;

  void expect(const std::string& name, bool ok, const std::string& detail) { invariants.push_back({name, ok, detail}); }
  std::ostream& file(const std::string& name) {
    streams.emplace_back(name, std::make_unique<std::ostringstream>());
    return *streams.back().second;
  }
  void collect() {
    for (auto& [n, s] : streams) files.emplace_back(n, s->str());
    streams.clear();
  }

  std::vector<std::pair<std::string, std::unique_ptr<std::ostringstream>>> streams;
};

std::string fmt(double v) { return format_double(v); }

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

void defocusing_scatter(Run& run) {
  const auto& c = run.cfg;
  const BoxGrid grid(3, c.extent, c.points);
  const WaveFunction phi(Complex(c.amplitude) * GaussianProfile{c.sigma}.sample(grid));
  const auto mu = AtomicMeasure::from_states({{1.0, phi}});
  ScatteringConfig sc;
  sc.lambda = c.lambda;
  sc.t_max = c.t_max;
  sc.levels = c.levels;
  sc.dt = c.dt;
  sc.dealias = c.dealias;
  sc.enforce_window = c.enforce_window;
  const auto runs = scatter_atoms(mu, sc, c.threads);
  const auto rows = scattering_table(mu, runs);
  write_scattering_csv(run.file("scattering.csv"), rows);

  const auto& r = runs.front();
  run.statuses.push_back(to_string(r.termination));
  if (c.t_max > r.window_limit) run.statuses.push_back("t_max past the wraparound window");
  run.metrics["window_limit"] = r.window_limit;
  run.metrics["wrapped_fraction"] = r.wrapped_fraction;
  run.metrics["residual_estimate"] = r.residual_estimate;
  run.metrics["steps"] = static_cast<double>(r.steps);
  const int levels = r.decreasing_levels();
  run.metrics["decreasing_levels"] = levels;
  run.expect("Cauchy increments decrease over >= 3 dyadic levels", levels >= 3,
             "decreasing levels " + std::to_string(levels));

  const std::size_t span = static_cast<std::size_t>(std::max(levels, 3));
  const std::size_t first = rows.size() > span ? rows.size() - 1 - span : 0;
  for (int k = 1; k <= 3; ++k) {
    std::vector<double> d;
    for (std::size_t i = first; i < rows.size(); ++i) d.push_back(k == 1 ? rows[i].D1 : k == 2 ? rows[i].D2 : rows[i].D3);
    run.expect("D_" + std::to_string(k) + " decreases over the same check times", strictly_decreasing(d),
               "rows " + std::to_string(first) + ".." + std::to_string(rows.size() - 1));
  }
  bool below = true;
  for (const auto& row : rows) below = below && row.D3 <= row.bound_D3 * (1 + 1e-12);
  run.expect("D_3 below the telescoping bound", below, "all check times");
}

void focusing_blowup(Run& run) {
  const auto& c = run.cfg;
  const BoxGrid grid(3, c.extent, c.points);
  const WaveFunction phi(Complex(c.amplitude) * GaussianProfile{c.sigma}.sample(grid));
  const auto cert = certify_blowup(phi);
  run.metrics["E"] = cert.E;
  run.metrics["b"] = cert.b;
  run.metrics["c"] = cert.c;
  run.metrics["T"] = cert.T;
  run.metrics["T_full_rate"] = cert.T_full_rate;
  run.metrics["certificate_residual"] = cert.residual;

  const auto synthetic = certify_blowup(-1.0, 1.0, 1.0);
  run.expect("synthetic certificate T = 1/2", synthetic.valid && std::abs(synthetic.T - 0.5) <= 1e-12,
             "T = " + fmt(synthetic.T));
  run.expect("certificate valid", cert.valid, "E = " + fmt(cert.E));
  run.expect("certificate root residual <= 1e-10", cert.residual <= 1e-10, fmt(cert.residual));

  const Trajectory traj = evolve(phi, solver_config(c));
  run.statuses.push_back(to_string(traj.termination));
  run.metrics["steps"] = static_cast<double>(traj.steps);
  std::vector<ObservableRecord> records;
  for (const auto& s : traj.snapshots) records.push_back(measure(s.state, c.lambda, s.t));
  write_observables_csv(run.file("observables.csv"), records);

  const auto ev = detect_blowup(traj);
  run.metrics["flag_time"] = ev ? ev->t : std::numeric_limits<double>::infinity();
  if (cert.valid) {
    run.expect("flag raised at t* <= 1.2 T", ev && ev->t <= 1.2 * cert.T,
               ev ? "t* = " + fmt(ev->t) + ", T = " + fmt(cert.T) : "no flag before t_max");
    const double excess = virial_envelope_excess(traj, cert);
    run.metrics["envelope_excess"] = excess;
    run.expect("variance stays below the virial envelope", excess <= 1e-6, fmt(excess));
  }

  // shell windows
  const GaussianProfile base{c.measure_sigma};
  const int j1 = first_negative_energy_shell(base);
  const int j0 = first_member_shell(base, c.c_l4);
  run.metrics["first_negative_energy_shell"] = j1;
  run.metrics["first_member_shell"] = j0;
  CsvWriter w(run.file("shells.csv"), {"j", "variant", "member", "E", "b", "c", "T", "T_full_rate"});
  std::vector<double> jf, tf, jb, tb;
  bool product = true;
  for (int j = j1; j <= std::max(j0, j1) + 4; ++j) {
    ShellSpec spec = default_shell_spec(base, j);
    spec.b = c.b;
    spec.c_l4 = c.c_l4;
    const auto n = norms_of(base.rescaled(j));
    product = product && std::abs(n.x_moment * n.hdot1 - 1.5) <= 1e-10;
    for (auto variant : {ShellVariant::gaussian_family, ShellVariant::fixed_b}) {
      const auto s = shell_blowup_bound(j, base, spec, variant, false);
      const auto& k = s.certificate;
      const bool fam = variant == ShellVariant::gaussian_family;
      w.row({std::to_string(j), fam ? "gaussian_family" : "fixed_b", s.member ? "true" : "false", fmt(k.E), fmt(k.b),
             fmt(k.c), fmt(k.T), fmt(k.T_full_rate)});
      if (fam && j < j1 + 5) {
        jf.push_back(j);
        tf.push_back(std::log2(k.T));
      }
      if (!fam && j >= j0 && j < j0 + 5 && k.valid) {
        jb.push_back(j);
        tb.push_back(std::log2(k.T));
      }
    }
  }
  const double slope_f = fit_line(jf, tf).slope;
  run.metrics["slope_gaussian_family"] = slope_f;
  if (jb.size() >= 2) run.metrics["slope_fixed_b"] = fit_line(jb, tb).slope;
  run.expect("scale-invariant product 3/2 across shells", product, "shells " + std::to_string(j1) + "..");
  run.expect("gaussian-family log2 T_j slope <= -5/2 + 0.1", slope_f <= -2.4, fmt(slope_f));
}

void dichotomy(Run& run) {
  const auto& c = run.cfg;
  const GaussianProfile base{c.measure_sigma};
  const auto mu = build_blowup_measure(c.r, c.J, base);
  const double alpha = c.alpha;
  const Functional h_alpha = Functional::of([alpha](const Atom& a) { return a.profile->h_alpha(alpha); });
  const double log_two_kappa = std::log(2.0 * kappa_r(c.r, c.J));
  const auto est = estimate_RH1(mu, c.k_max);
  std::vector<int> ks;
  for (int k = 4; k <= c.k_max; ++k) ks.push_back(k);
  const auto lemma = lemma_sum_check(c.r, ks);

  std::vector<TraceDiagnostics> traces;
  bool agree = true, bounded = true;
  double c_trace = 0.0, worst = 0.0;
  CsvWriter w(run.file("dichotomy.csv"),
              {"k", "trace_log", "moment_log", "bound_log", "a_k", "c_fit", "growth_exponent"});
  for (int k = 1; k <= c.k_max; ++k) {
    const auto d = trace_S_alpha(marginal(mu, k), alpha);
    traces.push_back(d);
    const double m = log_moment(mu, h_alpha, 2 * k);
    const double rel = std::abs(d.value_log - m) / std::max(1.0, std::abs(m));
    worst = std::max(worst, rel);
    agree = agree && rel <= 1e-12;
    double bound = std::numeric_limits<double>::quiet_NaN();
    if (k >= 4) {
      bound = log_two_kappa + lemma_log_sum(c.r, k);
      bounded = bounded && (alpha != 1.0 || d.value_log <= bound);
      c_trace = std::max(c_trace, d.value_log / std::pow(k, c.r));
    }
    w.row({static_cast<double>(k), d.value_log, m, bound, est.a[k - 1], lemma.c_fit, est.growth_exponent});
  }
  write_trace_csv(run.file("trace.csv"), traces);
  run.metrics["c_fit"] = lemma.c_fit;
  run.metrics["c_trace"] = c_trace;
  run.metrics["growth_exponent"] = est.growth_exponent;
  run.metrics["support_radius"] = est.limit;
  run.expect("trace equals the H^alpha moment (log, 1e-12)", agree, "worst " + fmt(worst));
  run.expect("trace below 2 kappa times the weight sum for k >= 4", bounded, "checked for alpha = 1");

  // Chebyshev bound against the exact tail mass
  std::mt19937_64 rng(c.seed);
  double max_h1 = 0.0;
  for (const auto& a : mu.atoms()) max_h1 = std::max(max_h1, a.norms.h1);
  std::uniform_real_distribution<double> tau_dist(0.5, 2.0 * max_h1);
  std::uniform_int_distribution<int> k_dist(1, 8);
  int violations = 0;
  for (int i = 0; i < 200; ++i) {
    const auto cb = chebyshev_support_bound(mu, Functional::h1_norm(), tau_dist(rng), k_dist(rng));
    if (cb.bound < cb.exact_mass * (1 - 1e-12)) ++violations;
  }
  run.expect("Chebyshev bound dominates the tail mass (200 cases)", violations == 0,
             std::to_string(violations) + " violations");

  // truncation sweep
  const GaussianProfile sweep_base{c.measure_sigma};
  const auto radii = shell_radii(sweep_base, c.sweep_from, c.sweep_to);
  const auto rep = instantaneous_blowup_sweep(c.sweep_r, c.sweep_J, c.sweep_k, radii, sweep_base, c.threads);
  write_sweep_csv(run.file("sweep.csv"), rep);
  const auto swept = build_blowup_measure(c.sweep_r, c.sweep_J, sweep_base);
  double sweep_worst = 0.0;
  for (const auto& row : rep.rows) {
    const double m = log_moment(truncate_measure(swept, row.R), Functional::h1_norm(), 2 * c.sweep_k);
    sweep_worst = std::max(sweep_worst, std::abs(row.log_trace - m) / std::max(1.0, std::abs(m)));
  }
  run.expect("sweep traces match truncate + moment (log, 1e-12)", sweep_worst <= 1e-12, "worst " + fmt(sweep_worst));
  run.expect("sweep trace strictly increasing", rep.trace_increasing, "");
  run.expect("sweep window strictly decreasing", rep.window_decreasing,
             "shells " + std::to_string(c.sweep_from) + ".." + std::to_string(c.sweep_to));
  run.statuses.push_back("completed");
}

void hierarchy_residual_scenario(Run& run) {
  const auto& c = run.cfg;
  const BoxGrid grid(3, c.extent, c.points);
  Field constant(grid);
  for (std::size_t i = 0; i < constant.size(); ++i) constant[i] = c.amplitude;
  const WaveFunction phi(constant);
  const double omega = c.lambda * c.amplitude * c.amplitude;

  CsvWriter w(run.file("residual.csv"), {"dt", "k", "t", "one_body", "k_body_bound"});
  std::vector<double> dts, errs;
  double exact_err = 0.0;
  for (int i = 0; i < c.refinements; ++i) {
    auto sc = solver_config(c);
    sc.dt_init = c.dt / std::ldexp(1.0, i);
    const Trajectory traj = evolve(phi, sc);
    run.statuses.push_back(to_string(traj.termination));
    const auto& last = traj.snapshots.back();
    const Complex exact = c.amplitude * std::exp(Complex(0, -omega * last.t));
    for (std::size_t p = 0; p < last.state.field().size(); ++p)
      exact_err = std::max(exact_err, std::abs(last.state.field()[p] - exact));
    double err = 0.0;
    for (int k = 1; k <= 2; ++k)
      for (const auto& row : hierarchy_residual(traj, c.lambda, k)) {
        w.row({sc.dt_init, static_cast<double>(k), row.t, row.one_body, row.k_body_bound});
        if (k == 1) err = std::max(err, row.one_body);
      }
    dts.push_back(sc.dt_init);
    errs.push_back(err);
  }
  double order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < errs.size(); ++i) order = std::min(order, std::log2(errs[i - 1] / errs[i]));
  const double C = errs.front() / (dts.front() * dts.front());
  bool quadratic = true;
  for (std::size_t i = 0; i < errs.size(); ++i) quadratic = quadratic && errs[i] <= 1.05 * C * dts[i] * dts[i];
  run.metrics["order"] = order;
  run.metrics["C"] = C;
  run.metrics["max_exact_error"] = exact_err;
  run.expect("measured residual order >= 1.9", order >= 1.9, fmt(order));
  run.expect("residual <= C dt^2", quadratic, "C = " + fmt(C));
}

void higher_energy(Run& run) {
  const auto& c = run.cfg;
  const BoxGrid grid(3, c.extent, c.points);
  auto target = [](const Field& f, int m) {
    return std::pow(0.5 * std::pow(h1_norm(f), 2) + 0.25 * std::pow(l4_norm(f), 4), m);
  };
  CsvWriter pa(run.file("k_atoms.csv"), {"sigma", "m", "K_slot_product", "K_target", "rel_error"});
  double worst = 0.0;
  for (double s : {c.sigma, 1.5 * c.sigma, 2.0 * c.sigma}) {
    const auto phi = WaveFunction::normalized(GaussianProfile{s}.sample(grid));
    const auto mu = AtomicMeasure::from_states({{1.0, phi}});
    for (int m = 1; m <= c.m_max; ++m) {
      const double K = K_functional(mu, m).slot_product;
      const double T = target(phi.field(), m);
      const double rel = std::abs(K - T) / T;
      worst = std::max(worst, rel);
      pa.row({s, static_cast<double>(m), K, T, rel});
    }
  }
  run.metrics["per_atom_worst"] = worst;
  run.expect("slot product equals (H1^2/2 + L4^4/4)^m per atom (1e-10)", worst <= 1e-10, fmt(worst));

  const auto phi0 = WaveFunction::normalized(GaussianProfile{c.sigma}.sample(grid));
  const Trajectory traj = evolve(phi0, solver_config(c));
  run.statuses.push_back(to_string(traj.termination));
  CsvWriter w(run.file("higher_energy.csv"), {"t", "m", "K_slot_product", "K_target"});
  std::vector<double> K0(c.m_max + 1, 0.0);
  double drift = 0.0;
  for (const auto& s : traj.snapshots) {
    const auto mu = AtomicMeasure::from_states({{1.0, s.state}});
    for (int m = 1; m <= c.m_max; ++m) {
      const double K = K_functional(mu, m).slot_product;
      if (s.t == 0.0) K0[m] = K;
      drift = std::max(drift, std::abs(K - K0[m]) / K0[m]);
      w.row({s.t, static_cast<double>(m), K, target(s.state.field(), m)});
    }
  }
  run.metrics["drift"] = drift;
  run.expect("K conserved along the run (1e-5 relative)", drift <= 1e-5, fmt(drift));
}

void lemma_sum(Run& run) {
  const auto& c = run.cfg;
  const auto check = lemma_sum_check(c.r, c.k_list);
  write_lemma_csv(run.file("lemma.csv"), check);
  bool margins = true, tails = true;
  for (const auto& row : check.rows) {
    margins = margins && row.margin >= 0.0;
    tails = tails && row.tail_below_one;
  }
  run.metrics["c_fit"] = check.c_fit;
  run.expect("exp(c_fit k^r) bounds every sum", margins, "c_fit = " + fmt(check.c_fit));
  run.expect("tail past the split below one", tails, "");
  run.statuses.push_back("completed");
}

}  // namespace

RunManifest run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  Run run{cfg, {}, {}, {}, {}, {}};
  if (cfg.name == "defocusing-scatter")
    defocusing_scatter(run);
  else if (cfg.name == "focusing-blowup")
    focusing_blowup(run);
  else if (cfg.name == "dichotomy")
    dichotomy(run);
  else if (cfg.name == "hierarchy-residual")
    hierarchy_residual_scenario(run);
  else if (cfg.name == "higher-energy")
    higher_energy(run);
  else
    lemma_sum(run);
  run.collect();
  run.files.emplace_back("config.ini", serialize_config(cfg));

  RunManifest m;
  m.scenario = cfg.name;
  m.config = serialize_config(cfg);
  m.version = library_version();
  m.statuses = std::move(run.statuses);
  m.invariants = std::move(run.invariants);
  m.metrics = std::move(run.metrics);

  std::filesystem::create_directories(out_dir);
  for (const auto& [name, content] : run.files) {
    std::ofstream out(out_dir / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
    m.outputs.push_back({name, sha256_hex(content), content.size()});
  }
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  out << to_json(m);
  if (!out) throw std::runtime_error("cannot write manifest");
  return m;
}

}  // namespace gpdf
