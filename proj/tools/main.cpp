#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "safebo/experiment.hpp"

namespace {

int fail(const std::string& kind, const std::vector<std::string>& details) {
  nlohmann::json err{{"error", kind}, {"details", details}};
  std::cerr << err.dump(2) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safebo - safe Bayesian optimization experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<int> log_iters;

  CLI::App* run = app.add_subcommand("run", "execute a run config and generate reports");
  run->add_option("config", config_path, "path to a run config JSON file")->required();
  run->add_option("--out", out_dir, "output directory (overrides config and SAFEBO_OUT)");
  run->add_option("--seeds", seeds, "seeds to run (overrides the config)")->delimiter(',');
  run->add_option("--log-iters", log_iters, "iterations to emit GP/barrier grids for")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    safebo::RunConfig config = safebo::parse_config(config_path);
    if (const char* env = std::getenv("SAFEBO_OUT"); env != nullptr && *env != '\0') {
      config.output_dir = env;
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (!seeds.empty()) config.seeds = seeds;
    if (!log_iters.empty()) config.log_iters = log_iters;

    const safebo::ExecutionResult result = safebo::execute(config);
    safebo::report(result.summary_file);

    int failed = 0;
    for (const auto& cell : result.cells) {
      if (!cell.error.empty()) ++failed;
    }
    std::cout << "wrote " << result.summary_file.string() << " (" << result.cells.size()
              << " cells, " << failed << " failed)" << std::endl;
    if (failed > 0) {
      std::vector<std::string> details;
      for (const auto& cell : result.cells) {
        if (!cell.error.empty()) details.push_back(cell.run_id + ": " + cell.error);
      }
      return fail("cells_failed", details);
    }
    return 0;
  } catch (const safebo::ConfigError& e) {
    return fail("config_invalid", e.violations());
  } catch (const std::exception& e) {
    return fail("run_failed", {e.what()});
  }
}
