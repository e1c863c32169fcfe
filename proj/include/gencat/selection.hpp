#pragma once

#include <string>
#include <vector>

#include "gencat/girt.hpp"
#include "gencat/scorer.hpp"

namespace gencat {

struct SampledResponses {
  std::string question_id;
  std::vector<std::string> samples;  // N generated code strings
};

// Fixed-dimension real vectors for code strings; same string, same vector.
class CodeEmbedder {
 public:
  virtual ~CodeEmbedder() = default;
  virtual Vec embed(const std::string& code) const = 0;
  virtual int dim() const = 0;
};

// Deterministic bag-of-subtokens embedding: identifier runs and individual
// symbol characters hash into count buckets. Non-empty code maps to a
// non-zero vector; a pre-trained code encoder is a drop-in replacement.
class HashedBagEmbedder : public CodeEmbedder {
 public:
  explicit HashedBagEmbedder(int dim = 32);
  Vec embed(const std::string& code) const override;
  int dim() const override { return dim_; }

 private:
  int dim_ = 32;
};

double uncertainty_score(const std::vector<double>& sample_scores);
double uncertainty_score(const SampledResponses& samples, const ScoringModel& scorer,
                         const Question& question);

double diversity_score(const SampledResponses& samples, const CodeEmbedder& embedder);

// Gradient of one sample's sequence log-likelihood w.r.t. the latent, with
// backbone and projection treated as constants (their grad buffers are used
// as scratch and zeroed).
Vec loglik_grad_z(GirtModel& model, const Question& question, const Vec& z,
                  const std::string& code);

// Monte-Carlo trace-of-Fisher estimate: mean squared gradient norm over the
// samples. When length_normalize is set, each sample's log-likelihood is
// divided by its token count before differentiation.
double information_score(GirtModel& model, const Question& question, const Vec& z,
                         const SampledResponses& samples, bool length_normalize = false);

// Argmax with ties broken by the lowest question id.
std::string select_next(const std::vector<std::string>& candidates,
                        const std::vector<double>& scores);

}  // namespace gencat
