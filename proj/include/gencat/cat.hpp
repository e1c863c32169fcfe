#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gencat/girt.hpp"
#include "gencat/irt.hpp"
#include "gencat/scorer.hpp"
#include "gencat/selection.hpp"

namespace gencat {

// Supplies the student's actual recorded response to an administered question.
class ResponseOracle {
 public:
  virtual ~ResponseOracle() = default;
  virtual const StudentResponse& response(const std::string& student_id,
                                          const std::string& question_id) const = 0;
};

// Replays recorded responses from a corpus.
class ReplayOracle : public ResponseOracle {
 public:
  explicit ReplayOracle(const Corpus& corpus) : corpus_(corpus) {}
  const StudentResponse& response(const std::string& student_id,
                                  const std::string& question_id) const override;

 private:
  const Corpus& corpus_;
};

enum class Selector { Uncertainty, Diversity, Information, IrtFisher, Random };

Selector selector_from_string(const std::string& name);
std::string to_string(Selector selector);

struct CatConfig {
  Selector selector = Selector::Uncertainty;
  int n_samples = 10;                 // N responses per candidate
  GenerationConfig generation;        // sampling hyperparameters
  double lambda = 0.2;                // loss mix during knowledge updates
  int epochs_per_step = 2;
  int max_update_epochs = 10;
  double update_lr = 0.01;
  double binarize_threshold = 1.0;    // KC loss / proxy outcomes
  bool length_normalize = false;      // information criterion option
  uint64_t seed = 0;

  void validate() const;
};

struct AdministeredItem {
  int t = 0;  // 1-based step index
  std::string question_id;
  std::string code;
  double score = 0.0;
  double selector_score = 0.0;
};

struct CatSession {
  std::string student_id;
  std::vector<std::string> candidates;  // sorted, shrinks as questions are used
  std::vector<AdministeredItem> administered;
  nn::Param z;                          // current latent estimate
  uint64_t seed = 0;
};

// Read-only collaborators; only the ones the chosen selector needs must be set.
struct StepContext {
  const ScoringModel* scorer = nullptr;   // uncertainty
  const CodeEmbedder* embedder = nullptr; // diversity
  const IrtCalibration* irt = nullptr;    // irt-fisher and proxy evaluation
};

// z^(0) = componentwise mean of all trained latent vectors.
CatSession init_session(const std::string& student_id, std::vector<std::string> candidates,
                        const GirtModel& model, uint64_t seed);

// Mean total loss over the administered responses at the session's current z.
double session_loss(const CatSession& session, GirtModel& model, const Corpus& corpus,
                    const CatConfig& config);

// Gradient-descent update of z over all administered responses, running
// min(epochs_per_step * t, max_update_epochs) epochs with step-size backoff
// so the objective never increases beyond tolerance.
void update_latent(CatSession& session, GirtModel& model, const Corpus& corpus,
                   const CatConfig& config);

// One CAT cycle: sample/score candidates, administer the argmax, update z.
void step(CatSession& session, GirtModel& model, const Corpus& corpus,
          const ResponseOracle& oracle, const CatConfig& config, const StepContext& ctx);

struct TrajectoryPoint {
  int t = 0;
  std::string question_id;
  double selector_score = 0.0;
  Vec z;
  std::vector<double> heldout_predictions;  // proxy model, heldout order
};

// Applies `step` t_max times; records proxy-evaluated held-out predictions
// after each step when ctx.irt is available.
std::vector<TrajectoryPoint> run_session(CatSession& session, GirtModel& model,
                                         const Corpus& corpus, const ResponseOracle& oracle,
                                         const CatConfig& config, const StepContext& ctx,
                                         int t_max, const std::vector<IrtItem>& heldout);

void save_trajectory(const std::vector<TrajectoryPoint>& trajectory, const std::string& path);

}  // namespace gencat
