#include "gencat/capi.h"

#include <fstream>
#include <new>
#include <string>

#include "gencat/harness.hpp"

using json = nlohmann::json;

struct gencat_runner {
  json config = json::object();
  std::string last_error;
  std::string resolved;  // scratch for gencat_runner_resolved_config
};

namespace {

int code_of(gencat::ErrorKind kind) {
  switch (kind) {
    case gencat::ErrorKind::Config: return GENCAT_ERR_CONFIG;
    case gencat::ErrorKind::Parse: return GENCAT_ERR_PARSE;
    case gencat::ErrorKind::Validation: return GENCAT_ERR_VALIDATION;
    case gencat::ErrorKind::Io: return GENCAT_ERR_IO;
    case gencat::ErrorKind::Numeric: return GENCAT_ERR_NUMERIC;
    case gencat::ErrorKind::MissingArtifact: return GENCAT_ERR_MISSING_ARTIFACT;
  }
  return GENCAT_ERR_UNKNOWN;
}

template <typename Fn>
int guarded(gencat_runner* runner, Fn&& fn) {
  if (!runner) return GENCAT_ERR_INVALID_ARGUMENT;
  try {
    fn();
    runner->last_error.clear();
    return GENCAT_OK;
  } catch (const gencat::Error& e) {
    runner->last_error = e.what();
    return code_of(e.kind());
  } catch (const std::exception& e) {
    runner->last_error = e.what();
    return GENCAT_ERR_UNKNOWN;
  }
}

int require_arg(gencat_runner* runner, const char* arg, const char* name) {
  if (arg && *arg) return GENCAT_OK;
  if (runner) runner->last_error = std::string(name) + " must be a non-empty string";
  return GENCAT_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* gencat_version(void) { return "0.1.0"; }

gencat_runner* gencat_runner_create(void) { return new (std::nothrow) gencat_runner(); }

void gencat_runner_destroy(gencat_runner* runner) { delete runner; }

int gencat_runner_load_config(gencat_runner* runner, const char* path) {
  if (int rc = require_arg(runner, path, "path"); rc != GENCAT_OK) return rc;
  return guarded(runner, [&] {
    // Parse and validate up front so a bad file never half-replaces the
    // current configuration.
    gencat::ExperimentConfig::load(path);
    std::ifstream in(path);
    json doc;
    in >> doc;
    runner->config = std::move(doc);
  });
}

int gencat_runner_set_override(gencat_runner* runner, const char* assignment) {
  if (int rc = require_arg(runner, assignment, "assignment"); rc != GENCAT_OK) return rc;
  return guarded(runner, [&] { gencat::apply_override(runner->config, assignment); });
}

int gencat_runner_run(gencat_runner* runner, const char* stage, const char* run_dir) {
  if (int rc = require_arg(runner, stage, "stage"); rc != GENCAT_OK) return rc;
  if (int rc = require_arg(runner, run_dir, "run_dir"); rc != GENCAT_OK) return rc;
  return guarded(runner, [&] {
    gencat::ExperimentConfig cfg = gencat::ExperimentConfig::from_json(runner->config);
    gencat::run_stage(stage, cfg, run_dir);
  });
}

const char* gencat_runner_resolved_config(gencat_runner* runner) {
  if (!runner) return nullptr;
  const int rc = guarded(runner, [&] {
    runner->resolved = gencat::ExperimentConfig::from_json(runner->config).resolved().dump(2);
  });
  return rc == GENCAT_OK ? runner->resolved.c_str() : nullptr;
}

const char* gencat_runner_last_error(const gencat_runner* runner) {
  return runner ? runner->last_error.c_str() : "null runner";
}

}  // extern "C"
