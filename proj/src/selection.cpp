#include "gencat/selection.hpp"

#include <cctype>
#include <cmath>

namespace gencat {

HashedBagEmbedder::HashedBagEmbedder(int dim) : dim_(dim) {
  if (dim <= 0) throw config_error("embedding dimension must be positive");
}

Vec HashedBagEmbedder::embed(const std::string& code) const {
  Vec counts = Vec::Zero(dim_);
  auto bump = [&](const std::string& token) {
    // FNV-1a over the token, bucketed into the count vector.
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ull;
    }
    counts(static_cast<long>(h % static_cast<uint64_t>(dim_))) += 1.0;
  };
  std::string run;
  for (char c : code) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      run += c;
    } else {
      if (!run.empty()) bump(run);
      run.clear();
      if (!std::isspace(static_cast<unsigned char>(c))) bump(std::string(1, c));
    }
  }
  if (!run.empty()) bump(run);
  return counts;
}

double uncertainty_score(const std::vector<double>& sample_scores) {
  if (sample_scores.empty()) throw validation_error("uncertainty over zero samples");
  double mean = 0.0;
  for (double s : sample_scores) mean += s;
  mean /= static_cast<double>(sample_scores.size());
  return 1.0 - std::abs(mean - 0.5);
}

double uncertainty_score(const SampledResponses& samples, const ScoringModel& scorer,
                         const Question& question) {
  std::vector<double> scores;
  scores.reserve(samples.samples.size());
  for (const auto& code : samples.samples) scores.push_back(scorer.score(question, code));
  return uncertainty_score(scores);
}

double diversity_score(const SampledResponses& samples, const CodeEmbedder& embedder) {
  const size_t n = samples.samples.size();
  if (n < 2) throw validation_error("diversity needs at least two samples");
  std::vector<Vec> h;
  h.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    h.push_back(embedder.embed(samples.samples[i]));
    if (h.back().norm() == 0.0)
      throw numeric_error("zero-norm embedding for sample " + std::to_string(i) + " of " +
                          samples.question_id);
  }
  double sum_cos = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      sum_cos += h[i].dot(h[j]) / (h[i].norm() * h[j].norm());
  return 1.0 - 2.0 * sum_cos / (static_cast<double>(n) * static_cast<double>(n - 1));
}

Vec loglik_grad_z(GirtModel& model, const Question& question, const Vec& z,
                  const std::string& code) {
  KnowledgeProjection::Cache pcache;
  Vec theta = model.projection().project(z, pcache);
  AssembledPrompt prompt = model.prompt_for(question, theta);
  std::vector<int> targets = model.backbone().tokenizer().encode(code);
  targets.push_back(CharTokenizer::kEos);

  Mat d_prompt;
  model.backbone().teacher_forced_nll(prompt.embeddings, targets, 1.0, false, &d_prompt);
  Vec d_theta = Vec::Zero(theta.size());
  accumulate_mastery_grad(d_prompt, prompt, model.embedder(), d_theta);
  Vec dz_nll = model.projection().backward(d_theta, pcache);
  nn::zero_grads(model.projection().params());
  if (!dz_nll.allFinite())
    throw numeric_error("non-finite latent gradient on " + question.id);
  return -dz_nll;  // gradient of log P, not of the NLL
}

double information_score(GirtModel& model, const Question& question, const Vec& z,
                         const SampledResponses& samples, bool length_normalize) {
  if (samples.samples.empty()) throw validation_error("information over zero samples");
  double sum = 0.0;
  for (const auto& code : samples.samples) {
    Vec g = loglik_grad_z(model, question, z, code);
    if (length_normalize) g /= static_cast<double>(code.size() + 1);  // + EOS
    sum += g.squaredNorm();
  }
  return sum / static_cast<double>(samples.samples.size());
}

std::string select_next(const std::vector<std::string>& candidates,
                        const std::vector<double>& scores) {
  if (candidates.empty()) throw validation_error("empty candidate pool");
  if (candidates.size() != scores.size())
    throw validation_error("one score required per candidate");
  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && candidates[i] < candidates[best]))
      best = i;
  }
  return candidates[best];
}

}  // namespace gencat
