#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gpdf/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-measure NLS and hierarchy experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gpdf::library_version());

  auto* run = app.add_subcommand("run", "run a scenario and write CSVs plus manifest.json");
  std::string scenario, config_path, out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  run->add_option("scenario", scenario, "scenario name")->required();
  run->add_option("--config", config_path, "sectioned key = value file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (default $GPDF_OUT/<scenario>)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "seed of the randomized checks");

  auto* list = app.add_subcommand("list-scenarios", "list scenario names");
  bool show_keys = false;
  list->add_flag("--keys", show_keys, "also list every config key");

  auto* check = app.add_subcommand("check", "re-verify the output digests of a manifest");
  std::string manifest;
  check->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& s : gpdf::scenario_list()) std::cout << s.name << "  " << s.summary << "\n";
      if (show_keys)
        for (const auto& k : gpdf::config_key_docs()) std::cout << "  " << k << "\n";
      return 0;
    }
    if (*check) {
      const auto problems = gpdf::check_manifest(manifest);
      for (const auto& p : problems) std::cerr << p << "\n";
      if (problems.empty()) std::cout << "all digests match\n";
      return problems.empty() ? 0 : 1;
    }

    if (!gpdf::is_scenario(scenario)) {
      std::cerr << "unknown scenario '" << scenario << "'; see gpdf list-scenarios\n";
      return 2;
    }
    auto cfg = gpdf::parse_config(config_path.empty() ? std::string() : read_file(config_path), scenario);
    if (threads) cfg.threads = *threads;
    if (seed) cfg.seed = *seed;
    gpdf::validate_config(cfg);
    const std::filesystem::path out =
        out_dir.empty() ? gpdf::default_output_root() / scenario : std::filesystem::path(out_dir);
    const auto m = gpdf::run_scenario(cfg, out);
    for (const auto& inv : m.invariants)
      std::cout << (inv.passed ? "pass  " : "FAIL  ") << inv.name << (inv.detail.empty() ? "" : "  [" + inv.detail + "]")
                << "\n";
    std::cout << "wrote " << (out / "manifest.json").string() << " (" << m.wall_time_s << " s)\n";
    return m.passed() ? 0 : 1;
  } catch (const gpdf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
