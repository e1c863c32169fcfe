#pragma once

#include <map>
#include <string>
#include <vector>

#include "gencat/backbone.hpp"
#include "gencat/dataset.hpp"
#include "gencat/knowledge.hpp"

namespace gencat {

struct TrainConfig {
  double lambda = 0.2;           // weight of the KC-alignment loss
  int epochs = 10;
  int batch_size = 8;
  int grad_accum = 1;            // optimizer steps every batch_size*grad_accum samples
  double lr_backbone = 1e-3;
  double lr_latent = 0.01;       // latent table and projection
  double warmup_fraction = 0.1;  // linear warmup over this fraction of steps
  double weight_decay = 0.01;    // backbone only; knowledge parameters are undecayed
  double binarize_threshold = 1.0;  // KC loss uses score >= threshold
  uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double sft = 0.0;
  double kc = 0.0;
  double total = 0.0;
};

// Generative item-response model: backbone (phi), projection (epsilon) and a
// per-student latent knowledge table (z). The mastery anchors are frozen at
// construction time.
class GirtModel {
 public:
  GirtModel() = default;

  static GirtModel init(const BackboneConfig& backbone_config, int latent_dim,
                        const std::vector<int>& projection_hidden, const Corpus& corpus,
                        const std::vector<std::string>& students, PromptTemplate tmpl,
                        uint64_t seed);

  TransformerLm& backbone() { return backbone_; }
  const TransformerLm& backbone() const { return backbone_; }
  KnowledgeProjection& projection() { return projection_; }
  const KnowledgeProjection& projection() const { return projection_; }
  const MasteryEmbedder& embedder() const { return embedder_; }
  const PromptTemplate& prompt_template() const { return template_; }
  const KcIndex& kcs() const { return kcs_; }

  bool has_latent(const std::string& student_id) const;
  nn::Param& latent(const std::string& student_id);
  const nn::Param& latent(const std::string& student_id) const;
  std::vector<std::string> latent_students() const;  // sorted
  void add_latent(const std::string& student_id, const Vec& z);

  Vec mastery_of(const std::string& student_id) const;
  // Mean mastery over the question's KCs (the model's predicted correctness).
  double predicted_correctness(const std::string& student_id, const Question& question) const;

  AssembledPrompt prompt_for(const Question& question, const Vec& mastery) const;

  void save(const std::string& dir) const;
  static GirtModel load(const std::string& dir);

 private:
  TransformerLm backbone_;
  KnowledgeProjection projection_;
  MasteryEmbedder embedder_;
  PromptTemplate template_;
  KcIndex kcs_;
  std::map<std::string, nn::Param> latents_;
};

// BCE between mean mastery over the question's KCs and the binary score.
// Accumulates d(loss)/d(mastery) into *d_mastery (scaled by grad_scale) when
// provided. The predicted value is clamped to [1e-6, 1 - 1e-6].
double kc_alignment_loss(const Vec& mastery, const Question& question, const KcIndex& kcs,
                         double binary_score, Vec* d_mastery = nullptr,
                         double grad_scale = 1.0);

// Teacher-forced NLL of the response code under the student's current state.
double sft_loss(const GirtModel& model, const StudentResponse& response,
                const Question& question);

double total_loss(const GirtModel& model, const StudentResponse& response,
                  const Question& question, double lambda);

// Collects the girt-group train responses named by the split plan.
std::vector<const StudentResponse*> girt_train_responses(const Corpus& corpus,
                                                         const SplitPlan& plan);

// Joint SFT + KC-alignment fit over the given responses. Every named student
// must have a latent entry. Returns per-epoch mean losses; deterministic given
// config.seed.
std::vector<EpochStats> fit(GirtModel& model, const Corpus& corpus,
                            const std::vector<const StudentResponse*>& responses,
                            const TrainConfig& config);

void save_loss_history(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace gencat
