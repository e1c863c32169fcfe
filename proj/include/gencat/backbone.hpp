#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gencat/nn.hpp"
#include "gencat/tokenizer.hpp"

namespace gencat {

struct BackboneConfig {
  int h = 48;
  int layers = 2;
  int heads = 4;
  int max_seq = 256;
  double init_std = 0.08;
  uint64_t seed = 1234;
};

struct GenerationConfig {
  double temperature = 0.8;
  double top_p = 0.9;
  int top_k = 50;
  int max_new_tokens = 64;
  uint64_t seed = 0;
  bool greedy = false;

  void validate() const {
    if (!(temperature > 0.0)) throw config_error("temperature must be > 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw config_error("top_p must lie in (0,1]");
    if (top_k <= 0) throw config_error("top_k must be positive");
    if (max_new_tokens <= 0) throw config_error("max_new_tokens must be positive");
  }
};

// Small decoder-only transformer (pre-LN, learned positions, ReLU MLP) that
// operates on sequences of input embeddings, so soft-prompt slots can be
// injected upstream of the token layer. Value semantics: copying the model
// yields an independent snapshot.
class TransformerLm {
 public:
  using Mat = nn::Mat;
  using Vec = nn::Vec;

  TransformerLm() = default;
  explicit TransformerLm(const BackboneConfig& config);

  int hidden_dim() const { return config_.h; }
  int vocab_size() const { return vocab_; }
  int max_seq() const { return config_.max_seq; }
  const BackboneConfig& config() const { return config_; }
  const CharTokenizer& tokenizer() const { return tokenizer_; }

  // Row t = embedding of ids[t] (token table only, positions added inside the
  // forward pass).
  Mat embed_tokens(const std::vector<int>& ids) const;
  Vec token_embedding(int id) const;

  struct LogProb {
    double total = 0.0;
    std::vector<double> per_token;
  };
  // Teacher-forced log-likelihood of target ids continuing the prompt.
  LogProb sequence_log_prob(const Mat& prompt_embeddings,
                            const std::vector<int>& targets) const;

  // Forward + backward of grad_scale * NLL(targets | prompt). Parameter
  // gradients accumulate when accumulate_params is set; d_prompt (optional)
  // receives the gradient w.r.t. the prompt embedding rows. Returns the raw
  // NLL (sum over target tokens, unscaled).
  double teacher_forced_nll(const Mat& prompt_embeddings, const std::vector<int>& targets,
                            double grad_scale, bool accumulate_params, Mat* d_prompt);

  // Per-position logits for the full input embedding sequence (no grad).
  Mat logits(const Mat& input_embeddings) const;

  // Generic head: forwards the sequence, lets loss_fn fill d_logits (same
  // shape as the logit matrix) and returns its loss value, then backprops.
  // When input_ids is given, the input-embedding gradient also accumulates
  // into the token table rows. d_input (optional) receives d(input rows).
  double apply_logit_loss(const Mat& input_embeddings,
                          const std::function<double(const Mat& logits, Mat& d_logits)>& loss_fn,
                          bool accumulate_params, const std::vector<int>* input_ids = nullptr,
                          Mat* d_input = nullptr);

  // n truncated-sampling draws that share one prompt prefill. Each draw uses
  // an independent stream derived from (config.seed, draw index). Token ids
  // exclude the terminating EOS.
  std::vector<std::vector<int>> sample_tokens(const Mat& prompt_embeddings,
                                              const GenerationConfig& config, int n) const;
  std::vector<std::string> sample(const Mat& prompt_embeddings, const GenerationConfig& config,
                                  int n) const;

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::string checksum() const { return nn::params_checksum(params()); }

  void save(const std::string& dir) const;
  static TransformerLm load(const std::string& dir);

 private:
  struct Block {
    nn::Param ln1_g, ln1_b;
    nn::Param wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Param ln2_g, ln2_b;
    nn::Param w_up, b_up, w_down, b_down;  // H -> 4H -> H, ReLU
  };

  struct LayerCache;
  struct ForwardCache;

  Mat forward(const Mat& input_embeddings, ForwardCache* cache) const;
  Mat backward(const Mat& d_logits, const ForwardCache& cache, const Mat& input_embeddings,
               bool accumulate_params);

  BackboneConfig config_;
  CharTokenizer tokenizer_;
  int vocab_ = 0;
  nn::Param tok_emb_;  // V x H
  nn::Param pos_emb_;  // max_seq x H
  std::vector<Block> blocks_;
  nn::Param lnf_g_, lnf_b_;
  nn::Param w_out_, b_out_;  // V x H, V x 1
};

}  // namespace gencat
