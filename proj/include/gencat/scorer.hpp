#pragma once

#include <string>
#include <vector>

#include "gencat/backbone.hpp"
#include "gencat/dataset.hpp"

namespace gencat {

using nn::Mat;
using nn::Vec;

struct ScorerConfig {
  int epochs = 5;
  int batch_size = 8;
  double lr = 1e-3;
  double warmup_fraction = 0.1;
  uint64_t seed = 0;

  void validate() const;
};

// Per-sample binary cross-entropy against a continuous target score;
// predicted is clamped to [1e-6, 1 - 1e-6].
double scorer_bce(double predicted, double score);

// Correctness scorer: reads the logits of the two verdict tokens ('1' and
// '0') at the final prompt position and normalizes them with a two-way
// softmax. Owns an independent backbone copy.
class ScoringModel {
 public:
  ScoringModel() = default;
  static ScoringModel init(const BackboneConfig& config, uint64_t seed);

  TransformerLm& backbone() { return backbone_; }
  const TransformerLm& backbone() const { return backbone_; }
  int verdict_correct() const { return verdict_correct_; }
  int verdict_incorrect() const { return verdict_incorrect_; }

  // Template with {question} and {code} slots; compact by default.
  const std::string& prompt_template() const { return template_; }
  void set_prompt_template(const std::string& tmpl);
  static std::string compact_template();
  static std::string standard_template();

  std::string render_prompt(const Question& question, const std::string& code) const;
  std::vector<int> prompt_tokens(const Question& question, const std::string& code) const;

  double score(const Question& question, const std::string& code) const;

  void save(const std::string& dir) const;
  static ScoringModel load(const std::string& dir);

 private:
  TransformerLm backbone_;
  std::string template_;
  int verdict_correct_ = -1;
  int verdict_incorrect_ = -1;
};

// Minimizes mean BCE between the two-way softmax score and the continuous
// ground-truth score over the given responses. Returns per-epoch mean BCE.
std::vector<double> scorer_fit(ScoringModel& model, const Corpus& corpus,
                               const std::vector<const StudentResponse*>& responses,
                               const ScorerConfig& config);

}  // namespace gencat
