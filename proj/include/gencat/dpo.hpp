#pragma once

#include <string>
#include <vector>

#include "gencat/girt.hpp"

namespace gencat {

struct PreferencePair {
  std::string student_id;        // owner of the preferred response
  std::string question_id;
  std::string other_student_id;  // author of the dispreferred response
  std::string preferred_code;
  std::string dispreferred_code;
  double gap = 0.0;              // likelihood difference, > tau
};

struct DpoConfig {
  double beta = 0.5;   // KL-penalty strength
  int m_pairs = 3;     // dispreferred responses kept per sample
  double tau = 0.1;    // likelihood-gap threshold
  int epochs = 1;
  int batch_size = 4;
  double lr = 1e-3;
  double warmup_fraction = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

// Continuous-Bernoulli likelihood of an observed score under predicted
// correctness: predicted^score * (1-predicted)^(1-score). predicted is
// clamped to (0,1).
double response_likelihood(double score, double predicted);

// Knowledge-conditioned pair construction over the given train partition:
// for each response, co-responders to the same question whose likelihood
// (under the owner's predicted correctness) trails by more than tau become
// dispreferred candidates; the top m_pairs by gap are kept. Output order is
// deterministic: partition order, then gap descending, then student id.
std::vector<PreferencePair> build_pairs(const GirtModel& model, const Corpus& corpus,
                                        const std::vector<const StudentResponse*>& responses,
                                        const DpoConfig& config);

// Single-pair DPO objective −log σ(β[(log π(y⁺) − log π_ref(y⁺)) −
// (log π(y⁻) − log π_ref(y⁻))]) with prompts built from the pair owner's
// frozen knowledge state.
double dpo_pair_loss(const GirtModel& model, const TransformerLm& reference,
                     const PreferencePair& pair, const Corpus& corpus, double beta);

// Fraction of pairs whose policy log-ratio margin beats the reference margin.
double implicit_reward_accuracy(const GirtModel& model, const TransformerLm& reference,
                                const std::vector<PreferencePair>& pairs,
                                const Corpus& corpus);

struct DpoResult {
  std::vector<double> epoch_loss;  // mean pair loss per epoch
  TransformerLm reference;         // post-SFT snapshot used as pi_ref
};

// Preference-alignment stage: only the backbone updates; the latent table and
// projection are left untouched. Empty pair sets are a warning no-op.
DpoResult dpo_fit(GirtModel& model, const std::vector<PreferencePair>& pairs,
                  const Corpus& corpus, const DpoConfig& config);

// JSON-lines audit export/import.
void save_pairs(const std::vector<PreferencePair>& pairs, const std::string& path);
std::vector<PreferencePair> load_pairs(const std::string& path);

}  // namespace gencat
