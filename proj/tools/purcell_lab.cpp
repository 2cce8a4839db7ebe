#include "purcell/studies.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

namespace {

size_t default_workers() {
  if (const char* env = std::getenv("PURCELL_LAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<size_t>(v);
    std::cerr << "warning: ignoring invalid PURCELL_LAB_WORKERS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

int main(int argc, char** argv) {
  using namespace purcell;
  CLI::App app{"Collective Purcell-effect simulator: cavity response, fluctuations, Kerr and free-space studies"};
  app.set_version_flag("--version", PURCELL_LAB_VERSION);
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  size_t workers = default_workers();
  bool seedless = false;

  auto* run = app.add_subcommand("run", "Run a scenario and write <study>.csv and manifest.json");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.directory)");
  run->add_option("--workers", workers, "Worker threads for sweep points (default: $PURCELL_LAB_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
  run->add_flag("--seedless", seedless, "Accepted for compatibility; every study is deterministic and uses no RNG");

  auto* validate = app.add_subcommand("validate", "Check a scenario against the schema");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  auto* list = app.add_subcommand("list-studies", "List the available study types");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (list->parsed()) {
    for (const auto& [study, name] : scenario::kStudies)
      std::cout << name << "\t" << scenario::study_description(study) << "\n";
    return 0;
  }

  scenario::Scenario scn;
  try {
    scn = scenario::load(scenario_path);
  } catch (const scenario::ScenarioError& e) {
    std::cerr << "schema error in field '" << e.field() << "': " << e.what() << "\n";
    return 1;
  }
  if (validate->parsed()) {
    std::cout << scenario_path << ": ok (" << scenario::to_string(scn.study) << ")\n";
    return 0;
  }

  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(scn.output_directory) : std::filesystem::path(out_dir);
  try {
    const auto res = studies::run_and_write(scn, dir, workers);
    for (const auto& w : res.result.summary.value("warnings", scenario::json::array())) std::cerr << "warning: " << w.get<std::string>() << "\n";
    for (const auto& f : res.files) std::cout << f.string() << "\n";
  } catch (const scenario::ScenarioError& e) {
    std::cerr << "schema error in field '" << e.field() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  (void)seedless;
  return 0;
}
