#pragma once

// Named end-to-end experiments, their sectioned key = value configuration and
// the run manifest (resolved config, output digests, invariant outcomes).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpdf {

/// Config errors carry the 1-based line (0 when not tied to a line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line);
  int line() const { return line_; }

 private:
  int line_;
};

struct ScenarioConfig {
  // [scenario]
  std::string name;
  int threads = 1;
  std::uint64_t seed = 0;
  // [grid]
  double extent = 16.0;
  int points = 32;
  // [initial]  amplitude * normalized Gaussian of width sigma
  double sigma = 1.0;
  double amplitude = 1.0;
  // [solver]
  double lambda = 1.0;
  double dt = 1e-3;
  double t_max = 1.0;
  std::string policy = "fixed";
  double beta = 2.0;
  double dt_min = 1e-8;
  bool dealias = false;
  double snapshot_interval = 0.1;
  double blowup_h1_threshold = 1e3;
  double resolution_guard = 0.1;
  // [measure]
  double r = 2.0;
  int J = 8;
  double measure_sigma = 2.0;
  double b = 0.0;
  double c_l4 = 1.0;
  // [hierarchy]
  int k_max = 16;
  std::vector<int> k_list;
  double alpha = 1.0;
  int m_max = 3;
  int refinements = 3;
  // [scattering]
  int levels = 5;
  bool enforce_window = false;
  // [sweep]
  double sweep_r = 2.0;
  int sweep_J = 12;
  int sweep_k = 2;
  int sweep_from = 7;
  int sweep_to = 12;

  bool operator==(const ScenarioConfig&) const = default;
};

struct ScenarioInfo {
  std::string name;
  std::string summary;
};

const std::vector<ScenarioInfo>& scenario_list();
bool is_scenario(const std::string& name);

/// Defaults for one scenario; throws ConfigError for an unknown name.
ScenarioConfig scenario_defaults(const std::string& name);

/// Parses the sectioned text over the scenario's defaults.  name_override
/// (from the command line) supplies or must match [scenario] name.
ScenarioConfig parse_config(const std::string& text, const std::optional<std::string>& name_override = std::nullopt);
/// Every key, in canonical order.
std::string serialize_config(const ScenarioConfig& cfg);
/// Range checks run before any computation; throws ConfigError.
void validate_config(const ScenarioConfig& cfg);

/// "section.key: description" for every accepted key.
std::vector<std::string> config_key_docs();

struct InvariantResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OutputFile {
  std::string file;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string scenario;
  std::string config;  // serialized effective config
  std::string version;
  double wall_time_s = 0.0;
  std::vector<std::string> statuses;
  std::vector<InvariantResult> invariants;
  std::map<std::string, double> metrics;
  std::vector<OutputFile> outputs;

  bool passed() const;
  std::vector<std::string> failed() const;
};

std::string to_json(const RunManifest& m);

/// Runs the scenario, writes its CSVs and manifest.json under out_dir.
/// Invalid configs throw ConfigError before anything is written.
RunManifest run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

/// GPDF_OUT, or ./gpdf-out when unset.
std::filesystem::path default_output_root();

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Recomputes the digest of every listed output; returns one message per
/// missing or mismatched file (empty when all match).
std::vector<std::string> check_manifest(const std::filesystem::path& manifest_path);

std::string library_version();

}  // namespace gpdf
