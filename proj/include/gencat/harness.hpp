#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gencat/cat.hpp"
#include "gencat/dpo.hpp"
#include "gencat/evaluation.hpp"
#include "gencat/girt.hpp"
#include "gencat/irt.hpp"
#include "gencat/scorer.hpp"

namespace gencat {

struct DataSection {
  std::string source = "synthetic";  // "synthetic" or "directory"
  std::string dir;                   // for source = directory
  CorpusFormat format = CorpusFormat::Jsonl;
  SynthConfig synth;
  double binarize_threshold = 1.0;
  SplitConfig split;
};

struct GirtSection {
  int latent_dim = 2;
  std::vector<int> projection_hidden{64};
  TrainConfig train;
  std::string prompt_template = "compact";  // compact | standard | file path
};

struct ScorerSection {
  ScorerConfig train;
  std::string prompt_template = "compact";  // compact | standard
  bool binarize_targets = false;  // train on thresholded instead of raw scores
};

struct CatSection {
  std::vector<std::string> selectors{"uncertainty", "random"};
  CatConfig session;  // selector field is overridden per run
  int t_max = 10;
  int embed_dim = 32;
  int workers = 1;  // simulate parallelism across students
};

struct EvalSection {
  int folds = 5;
  double alpha = 0.05;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  DataSection data;
  BackboneConfig backbone;
  GirtSection girt;
  DpoConfig dpo;
  ScorerSection scorer;
  IrtConfig irt;
  CatSection cat;
  EvalSection eval;

  // Strict parse: unknown keys anywhere are an error. Absent keys keep their
  // defaults.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::string& path);

  // Every field materialized, suitable for writing into a run directory.
  nlohmann::ordered_json resolved() const;

  void validate() const;
};

// Applies "dotted.path=value" to a config JSON document; the value is parsed
// as JSON with a fallback to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Pipeline stages. Each writes immutable artifacts under run_dir and fails
// with a missing-artifact error naming the prerequisite stage.
void run_synth(const ExperimentConfig& config, const std::string& run_dir);
void run_split(const ExperimentConfig& config, const std::string& run_dir);
void run_train_girt(const ExperimentConfig& config, const std::string& run_dir);
void run_align_dpo(const ExperimentConfig& config, const std::string& run_dir);
void run_train_scorer(const ExperimentConfig& config, const std::string& run_dir);
void run_fit_irt(const ExperimentConfig& config, const std::string& run_dir);
void run_simulate(const ExperimentConfig& config, const std::string& run_dir);
nlohmann::ordered_json run_evaluate(const ExperimentConfig& config, const std::string& run_dir);

// Dispatch by stage name; "pipeline" runs all stages in order.
void run_stage(const std::string& stage, const ExperimentConfig& config,
               const std::string& run_dir);

std::vector<std::string> stage_names();

}  // namespace gencat
