// Command-line front end for the gencat experiment runner. Talks to the
// library exclusively through the C interface.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gencat/capi.h"

namespace {

struct RunnerDeleter {
  void operator()(gencat_runner* r) const { gencat_runner_destroy(r); }
};

// Failures emit one machine-readable JSON object on stderr.
int fail(gencat_runner* runner, int code) {
  nlohmann::ordered_json err = {
      {"error", {{"code", code}, {"message", gencat_runner_last_error(runner)}}}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
  return 1;
}

// Relative run directories resolve under $GENCAT_RUN_ROOT when it is set.
std::string resolve_run_dir(const std::string& run_dir) {
  const char* root = std::getenv("GENCAT_RUN_ROOT");
  if (!root || !*root || run_dir.empty() || run_dir.front() == '/') return run_dir;
  return std::string(root) + "/" + run_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gencat: knowledge-conditioned generative item-response experiments"};
  app.set_version_flag("--version", std::string(gencat_version()));

  std::string stage;
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> overrides;
  bool print_config = false;

  app.add_option("stage", stage,
                 "Stage to run: pipeline, synth, split, train_girt, align_dpo, "
                 "train_scorer, fit_irt, simulate, evaluate")
      ->required();
  app.add_option("-c,--config", config_path, "Experiment configuration (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("-r,--run-dir", run_dir, "Artifact directory")->required();
  app.add_option("-s,--set", overrides,
                 "Configuration override, dotted.path=value (repeatable)");
  app.add_flag("--print-config", print_config,
               "Print the resolved configuration before running");

  CLI11_PARSE(app, argc, argv);
  run_dir = resolve_run_dir(run_dir);

  std::unique_ptr<gencat_runner, RunnerDeleter> runner(gencat_runner_create());
  if (!runner) {
    std::fprintf(stderr, "error: could not allocate runner\n");
    return 1;
  }

  if (!config_path.empty()) {
    if (int rc = gencat_runner_load_config(runner.get(), config_path.c_str()); rc != GENCAT_OK)
      return fail(runner.get(), rc);
  }
  for (const auto& assignment : overrides) {
    if (int rc = gencat_runner_set_override(runner.get(), assignment.c_str());
        rc != GENCAT_OK)
      return fail(runner.get(), rc);
  }

  if (print_config) {
    const char* resolved = gencat_runner_resolved_config(runner.get());
    if (!resolved) return fail(runner.get(), GENCAT_ERR_CONFIG);
    std::printf("%s\n", resolved);
  }

  if (int rc = gencat_runner_run(runner.get(), stage.c_str(), run_dir.c_str());
      rc != GENCAT_OK)
    return fail(runner.get(), rc);

  std::printf("%s: done (artifacts in %s)\n", stage.c_str(), run_dir.c_str());
  return 0;
}
