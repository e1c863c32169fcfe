#pragma once

#include <map>
#include <string>
#include <vector>

#include "gencat/backbone.hpp"
#include "gencat/dataset.hpp"
#include "gencat/nn.hpp"

namespace gencat {

using nn::Mat;
using nn::Vec;

// Index of a corpus' KC ids into mastery-vector slots (sorted by id).
class KcIndex {
 public:
  KcIndex() = default;
  explicit KcIndex(const Corpus& corpus);
  KcIndex(std::vector<std::string> ids, std::vector<std::string> names);

  int size() const { return static_cast<int>(ids_.size()); }
  int at(const std::string& kc_id) const;
  const std::string& id(int index) const { return ids_.at(static_cast<size_t>(index)); }
  const std::string& name(int index) const { return names_.at(static_cast<size_t>(index)); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// Feed-forward map from latent knowledge z (dim D) to mastery logits (dim M);
// mastery = sigmoid(logits). ReLU hidden layers.
class KnowledgeProjection {
 public:
  KnowledgeProjection() = default;
  KnowledgeProjection(int latent_dim, const std::vector<int>& hidden, int n_kcs, Rng& rng);

  int latent_dim() const { return mlp_.in_dim(); }
  int n_kcs() const { return mlp_.out_dim(); }

  Vec project(const Vec& z) const;

  struct Cache {
    nn::Mlp::Cache mlp;
    Vec theta;
  };
  Vec project(const Vec& z, Cache& cache) const;
  // Accumulates MLP parameter grads; returns d(z).
  Vec backward(const Vec& d_theta, const Cache& cache);

  std::vector<nn::Param*> params() { return mlp_.params(); }
  std::vector<const nn::Param*> params() const { return mlp_.params(); }

  void save(const std::string& path) const;
  static KnowledgeProjection load(const std::string& path);

 private:
  nn::Mlp mlp_;
};

// Convex interpolation between the frozen embeddings of the backbone's
// TRUE/FALSE anchor tokens.
class MasteryEmbedder {
 public:
  MasteryEmbedder() = default;
  MasteryEmbedder(Vec anchor_true, Vec anchor_false);
  static MasteryEmbedder from_backbone(const TransformerLm& backbone);

  int dim() const { return static_cast<int>(anchor_true_.size()); }
  const Vec& anchor_true() const { return anchor_true_; }
  const Vec& anchor_false() const { return anchor_false_; }

  Vec embed(double theta_k) const;
  // d(loss)/d(theta_k) given the gradient on the embedded vector.
  double grad_theta(const Vec& d_embedding) const;

 private:
  Vec anchor_true_, anchor_false_;
};

// Prompt template with a {question} slot and a per-KC block delimited by
// {kc_begin}/{kc_end} lines; inside the block, {kc_index} and {kc_name}
// expand as text while {kc_mastery} becomes one reserved placeholder token.
struct PromptTemplate {
  std::string body;      // contains {question} and {kc_blocks}
  std::string kc_block;  // contains exactly one {kc_mastery}

  static PromptTemplate load(const std::string& path);
  static PromptTemplate parse(const std::string& text);
  static PromptTemplate compact();   // terse desk-scale default
  static PromptTemplate standard();  // full instruction-style default
  void validate() const;
};

struct AssembledPrompt {
  std::vector<int> tokens;           // BOS + template tokens, placeholder at slots
  std::vector<long> slot_positions;  // row per KC, in question kc_ids order
  std::vector<int> kc_slots;         // mastery-vector index per slot
  Mat embeddings;                    // T x H
};

// Builds the knowledge-augmented prompt: ordinary tokens use the backbone's
// embedding table; each {kc_mastery} slot carries the mastery embedding of
// the corresponding KC.
AssembledPrompt assemble_prompt(const Question& question, const Vec& mastery,
                                const KcIndex& kcs, const MasteryEmbedder& embedder,
                                const TransformerLm& backbone, const PromptTemplate& tmpl);

// Routes the prompt-embedding gradient back onto mastery entries: for each
// slot k, d_theta[k] += (e_true - e_false) . d_prompt[row].
void accumulate_mastery_grad(const Mat& d_prompt, const AssembledPrompt& prompt,
                             const MasteryEmbedder& embedder, Vec& d_theta);

}  // namespace gencat
