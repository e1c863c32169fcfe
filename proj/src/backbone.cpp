#include "gencat/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

using Mat = nn::Mat;
using Vec = nn::Vec;

namespace {

struct LnCache {
  Mat xhat;
  Vec invstd;
};

constexpr double kLnEps = 1e-5;

Mat ln_forward(const Mat& x, const nn::Param& g, const nn::Param& b, LnCache* cache) {
  const auto h = static_cast<double>(x.cols());
  Vec mu = x.rowwise().mean();
  Mat centered = x.colwise() - mu;
  Vec var = centered.array().square().matrix().rowwise().mean();
  Vec invstd = (var.array() + kLnEps).rsqrt();
  Mat xhat = centered.array().colwise() * invstd.array();
  Mat out = (xhat.array().rowwise() * g.value.col(0).transpose().array()).matrix();
  out.rowwise() += b.value.col(0).transpose();
  if (cache) {
    cache->xhat = xhat;
    cache->invstd = invstd;
  }
  (void)h;
  return out;
}

Mat ln_backward(const Mat& d_out, const LnCache& cache, nn::Param& g, nn::Param& b,
                bool accumulate_params) {
  const double h = static_cast<double>(d_out.cols());
  if (accumulate_params) {
    g.grad.col(0) += (d_out.array() * cache.xhat.array()).colwise().sum().matrix().transpose();
    b.grad.col(0) += d_out.colwise().sum().transpose();
  }
  Mat dxhat = d_out.array().rowwise() * g.value.col(0).transpose().array();
  Vec sum_dxhat = dxhat.rowwise().sum();
  Vec sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum();
  Mat dx = dxhat;
  dx.array().colwise() -= sum_dxhat.array() / h;
  dx.array() -= cache.xhat.array().colwise() * (sum_dxhat_xhat.array() / h);
  dx.array().colwise() *= cache.invstd.array();
  return dx;
}

Vec ln_forward_vec(const Vec& x, const nn::Param& g, const nn::Param& b) {
  const double h = static_cast<double>(x.size());
  const double mu = x.mean();
  Vec centered = x.array() - mu;
  const double var = centered.array().square().mean();
  const double invstd = 1.0 / std::sqrt(var + kLnEps);
  return ((centered * invstd).array() * g.value.col(0).array() + b.value.col(0).array()).matrix();
  (void)h;
}

void softmax_row_inplace(Eigen::Ref<Eigen::RowVectorXd> row) {
  const double m = row.maxCoeff();
  row = (row.array() - m).exp();
  row /= row.sum();
}

}  // namespace

struct TransformerLm::LayerCache {
  Mat x_in;
  LnCache ln1;
  Mat ln1_out;
  Mat q, k, v;
  std::vector<Mat> probs;  // per head, T x T
  Mat attn_concat;
  Mat x_mid;
  LnCache ln2;
  Mat ln2_out;
  Mat up_pre;
  Mat up_post;
};

struct TransformerLm::ForwardCache {
  std::vector<LayerCache> layers;
  Mat x_last;
  LnCache lnf;
  Mat lnf_out;
};

TransformerLm::TransformerLm(const BackboneConfig& config) : config_(config) {
  if (config.h <= 0 || config.layers <= 0 || config.heads <= 0 || config.max_seq <= 0)
    throw config_error("backbone dimensions must be positive");
  if (config.h % config.heads != 0)
    throw config_error("hidden dim must be divisible by head count");
  vocab_ = CharTokenizer::vocab_size();
  Rng rng(hash_seed(config.seed, std::string("backbone")));
  tok_emb_.init(vocab_, config.h, rng, config.init_std);
  pos_emb_.init(config.max_seq, config.h, rng, 0.02);
  blocks_.resize(static_cast<size_t>(config.layers));
  const double proj_std = config.init_std / std::sqrt(2.0 * config.layers);
  for (auto& blk : blocks_) {
    blk.ln1_g.init_const(config.h, 1, 1.0);
    blk.ln1_b.init_const(config.h, 1, 0.0);
    blk.wq.init(config.h, config.h, rng, config.init_std);
    blk.bq.init_const(config.h, 1, 0.0);
    blk.wk.init(config.h, config.h, rng, config.init_std);
    blk.bk.init_const(config.h, 1, 0.0);
    blk.wv.init(config.h, config.h, rng, config.init_std);
    blk.bv.init_const(config.h, 1, 0.0);
    blk.wo.init(config.h, config.h, rng, proj_std);
    blk.bo.init_const(config.h, 1, 0.0);
    blk.ln2_g.init_const(config.h, 1, 1.0);
    blk.ln2_b.init_const(config.h, 1, 0.0);
    blk.w_up.init(4 * config.h, config.h, rng, config.init_std);
    blk.b_up.init_const(4 * config.h, 1, 0.0);
    blk.w_down.init(config.h, 4 * config.h, rng, proj_std);
    blk.b_down.init_const(config.h, 1, 0.0);
  }
  lnf_g_.init_const(config.h, 1, 1.0);
  lnf_b_.init_const(config.h, 1, 0.0);
  w_out_.init(vocab_, config.h, rng, config.init_std);
  b_out_.init_const(vocab_, 1, 0.0);
}

Mat TransformerLm::embed_tokens(const std::vector<int>& ids) const {
  Mat out(static_cast<long>(ids.size()), config_.h);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_)
      throw validation_error("token id out of range: " + std::to_string(ids[i]));
    out.row(static_cast<long>(i)) = tok_emb_.value.row(ids[i]);
  }
  return out;
}

Vec TransformerLm::token_embedding(int id) const {
  if (id < 0 || id >= vocab_)
    throw validation_error("token id out of range: " + std::to_string(id));
  return tok_emb_.value.row(id).transpose();
}

Mat TransformerLm::forward(const Mat& input_embeddings, ForwardCache* cache) const {
  const long t = input_embeddings.rows();
  if (t == 0) throw validation_error("empty input sequence");
  if (t > config_.max_seq)
    throw validation_error("sequence length " + std::to_string(t) +
                           " exceeds context window " + std::to_string(config_.max_seq));
  const int nh = config_.heads;
  const int hd = config_.h / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Mat x = input_embeddings + pos_emb_.value.topRows(t);
  if (cache) cache->layers.resize(blocks_.size());
  for (size_t l = 0; l < blocks_.size(); ++l) {
    const Block& blk = blocks_[l];
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    LnCache ln1_local;
    if (lc) lc->x_in = x;
    Mat ln1 = ln_forward(x, blk.ln1_g, blk.ln1_b, lc ? &lc->ln1 : &ln1_local);
    Mat q = ln1 * blk.wq.value.transpose();
    q.rowwise() += blk.bq.value.col(0).transpose();
    Mat k = ln1 * blk.wk.value.transpose();
    k.rowwise() += blk.bk.value.col(0).transpose();
    Mat v = ln1 * blk.wv.value.transpose();
    v.rowwise() += blk.bv.value.col(0).transpose();

    Mat attn(t, config_.h);
    std::vector<Mat> probs(static_cast<size_t>(nh));
    for (int h = 0; h < nh; ++h) {
      auto qh = q.middleCols(h * hd, hd);
      auto kh = k.middleCols(h * hd, hd);
      auto vh = v.middleCols(h * hd, hd);
      Mat s = (qh * kh.transpose()) * scale;
      // Causal mask + row softmax.
      Mat p = Mat::Zero(t, t);
      for (long i = 0; i < t; ++i) {
        auto row = s.row(i).head(i + 1);
        const double m = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - m).exp();
        p.row(i).head(i + 1) = e / e.sum();
      }
      attn.middleCols(h * hd, hd) = p * vh;
      probs[static_cast<size_t>(h)] = std::move(p);
    }
    Mat attn_out = attn * blk.wo.value.transpose();
    attn_out.rowwise() += blk.bo.value.col(0).transpose();
    Mat x_mid = x + attn_out;

    LnCache ln2_local;
    Mat ln2 = ln_forward(x_mid, blk.ln2_g, blk.ln2_b, lc ? &lc->ln2 : &ln2_local);
    Mat up_pre = ln2 * blk.w_up.value.transpose();
    up_pre.rowwise() += blk.b_up.value.col(0).transpose();
    Mat up_post = up_pre.cwiseMax(0.0);
    Mat down = up_post * blk.w_down.value.transpose();
    down.rowwise() += blk.b_down.value.col(0).transpose();
    Mat x_out = x_mid + down;

    if (lc) {
      lc->ln1_out = std::move(ln1);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->probs = std::move(probs);
      lc->attn_concat = std::move(attn);
      lc->x_mid = x_mid;
      lc->ln2_out = std::move(ln2);
      lc->up_pre = std::move(up_pre);
      lc->up_post = std::move(up_post);
    }
    x = std::move(x_out);
  }

  LnCache lnf_local;
  if (cache) cache->x_last = x;
  Mat lnf = ln_forward(x, lnf_g_, lnf_b_, cache ? &cache->lnf : &lnf_local);
  Mat logits = lnf * w_out_.value.transpose();
  logits.rowwise() += b_out_.value.col(0).transpose();
  if (cache) cache->lnf_out = std::move(lnf);
  return logits;
}

Mat TransformerLm::backward(const Mat& d_logits, const ForwardCache& cache,
                            const Mat& input_embeddings, bool accumulate_params) {
  const long t = d_logits.rows();
  const int nh = config_.heads;
  const int hd = config_.h / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  if (accumulate_params) {
    w_out_.grad += d_logits.transpose() * cache.lnf_out;
    b_out_.grad.col(0) += d_logits.colwise().sum().transpose();
  }
  Mat d_lnf = d_logits * w_out_.value;
  Mat dx = ln_backward(d_lnf, cache.lnf, lnf_g_, lnf_b_, accumulate_params);

  for (size_t l = blocks_.size(); l-- > 0;) {
    Block& blk = blocks_[l];
    const LayerCache& lc = cache.layers[l];

    // MLP branch.
    Mat d_down = dx;  // residual: gradient flows to both x_mid and the branch
    if (accumulate_params) {
      blk.w_down.grad += d_down.transpose() * lc.up_post;
      blk.b_down.grad.col(0) += d_down.colwise().sum().transpose();
    }
    Mat d_up = d_down * blk.w_down.value;
    d_up = (lc.up_pre.array() > 0.0).cast<double>().matrix().cwiseProduct(d_up);
    if (accumulate_params) {
      blk.w_up.grad += d_up.transpose() * lc.ln2_out;
      blk.b_up.grad.col(0) += d_up.colwise().sum().transpose();
    }
    Mat d_ln2 = d_up * blk.w_up.value;
    Mat d_xmid = dx + ln_backward(d_ln2, lc.ln2, blk.ln2_g, blk.ln2_b, accumulate_params);

    // Attention branch.
    Mat d_attn_out = d_xmid;
    if (accumulate_params) {
      blk.wo.grad += d_attn_out.transpose() * lc.attn_concat;
      blk.bo.grad.col(0) += d_attn_out.colwise().sum().transpose();
    }
    Mat d_concat = d_attn_out * blk.wo.value;
    Mat dq = Mat::Zero(t, config_.h);
    Mat dk = Mat::Zero(t, config_.h);
    Mat dv = Mat::Zero(t, config_.h);
    for (int h = 0; h < nh; ++h) {
      auto d_oh = d_concat.middleCols(h * hd, hd);
      const Mat& p = lc.probs[static_cast<size_t>(h)];
      auto vh = lc.v.middleCols(h * hd, hd);
      auto qh = lc.q.middleCols(h * hd, hd);
      auto kh = lc.k.middleCols(h * hd, hd);
      Mat dp = d_oh * vh.transpose();
      dv.middleCols(h * hd, hd) += p.transpose() * d_oh;
      // Softmax backward row-wise (mask already encoded by zero probs).
      Vec rowdot = (dp.array() * p.array()).rowwise().sum();
      Mat ds = p.array() * (dp.array().colwise() - rowdot.array());
      ds *= scale;
      dq.middleCols(h * hd, hd) += ds * kh;
      dk.middleCols(h * hd, hd) += ds.transpose() * qh;
    }
    if (accumulate_params) {
      blk.wq.grad += dq.transpose() * lc.ln1_out;
      blk.bq.grad.col(0) += dq.colwise().sum().transpose();
      blk.wk.grad += dk.transpose() * lc.ln1_out;
      blk.bk.grad.col(0) += dk.colwise().sum().transpose();
      blk.wv.grad += dv.transpose() * lc.ln1_out;
      blk.bv.grad.col(0) += dv.colwise().sum().transpose();
    }
    Mat d_ln1 = dq * blk.wq.value + dk * blk.wk.value + dv * blk.wv.value;
    dx = d_xmid + ln_backward(d_ln1, lc.ln1, blk.ln1_g, blk.ln1_b, accumulate_params);
  }

  if (accumulate_params) pos_emb_.grad.topRows(t) += dx;
  (void)input_embeddings;
  return dx;
}

TransformerLm::LogProb TransformerLm::sequence_log_prob(const Mat& prompt_embeddings,
                                                        const std::vector<int>& targets) const {
  if (targets.empty()) throw validation_error("target sequence is empty");
  const long p = prompt_embeddings.rows();
  if (p == 0) throw validation_error("prompt is empty");
  Mat input(p + static_cast<long>(targets.size()) - 1, config_.h);
  input.topRows(p) = prompt_embeddings;
  for (size_t i = 0; i + 1 < targets.size(); ++i)
    input.row(p + static_cast<long>(i)) = tok_emb_.value.row(targets[i]);

  Mat lg = forward(input, nullptr);
  LogProb out;
  out.per_token.reserve(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    const long pos = p - 1 + static_cast<long>(i);
    const auto row = lg.row(pos);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    const double lp = row(targets[i]) - lse;
    out.per_token.push_back(lp);
    out.total += lp;
  }
  return out;
}

double TransformerLm::teacher_forced_nll(const Mat& prompt_embeddings,
                                         const std::vector<int>& targets, double grad_scale,
                                         bool accumulate_params, Mat* d_prompt) {
  if (targets.empty()) throw validation_error("target sequence is empty");
  const long p = prompt_embeddings.rows();
  Mat input(p + static_cast<long>(targets.size()) - 1, config_.h);
  input.topRows(p) = prompt_embeddings;
  for (size_t i = 0; i + 1 < targets.size(); ++i)
    input.row(p + static_cast<long>(i)) = tok_emb_.value.row(targets[i]);

  ForwardCache cache;
  Mat lg = forward(input, &cache);

  double nll = 0.0;
  Mat d_logits = Mat::Zero(lg.rows(), lg.cols());
  for (size_t i = 0; i < targets.size(); ++i) {
    const long pos = p - 1 + static_cast<long>(i);
    auto row = lg.row(pos);
    const double m = row.maxCoeff();
    Eigen::RowVectorXd probs = (row.array() - m).exp();
    probs /= probs.sum();
    nll -= std::log(std::max(probs(targets[i]), 1e-300));
    d_logits.row(pos) = grad_scale * probs;
    d_logits(pos, targets[i]) -= grad_scale;
  }

  if (grad_scale != 0.0 && (accumulate_params || d_prompt)) {
    Mat d_input = backward(d_logits, cache, input, accumulate_params);
    if (accumulate_params) {
      // Token embedding grads for teacher-forced target rows.
      for (size_t i = 0; i + 1 < targets.size(); ++i)
        tok_emb_.grad.row(targets[i]) += d_input.row(p + static_cast<long>(i));
    }
    if (d_prompt) *d_prompt = d_input.topRows(p);
  } else if (d_prompt) {
    *d_prompt = Mat::Zero(p, config_.h);
  }
  return nll;
}

Mat TransformerLm::logits(const Mat& input_embeddings) const {
  return forward(input_embeddings, nullptr);
}

double TransformerLm::apply_logit_loss(
    const Mat& input_embeddings,
    const std::function<double(const Mat& logits, Mat& d_logits)>& loss_fn,
    bool accumulate_params, const std::vector<int>* input_ids, Mat* d_input_out) {
  ForwardCache cache;
  Mat lg = forward(input_embeddings, &cache);
  Mat d_logits = Mat::Zero(lg.rows(), lg.cols());
  const double loss = loss_fn(lg, d_logits);
  if (accumulate_params || d_input_out) {
    Mat d_input = backward(d_logits, cache, input_embeddings, accumulate_params);
    if (accumulate_params && input_ids) {
      if (static_cast<long>(input_ids->size()) != input_embeddings.rows())
        throw validation_error("input id list does not match the embedded sequence");
      for (long i = 0; i < d_input.rows(); ++i)
        tok_emb_.grad.row((*input_ids)[static_cast<size_t>(i)]) += d_input.row(i);
    }
    if (d_input_out) *d_input_out = std::move(d_input);
  }
  return loss;
}

namespace {

// Truncated sampling over one logit row. Greedy picks the argmax.
int sample_from_logits(const Eigen::RowVectorXd& logits, const GenerationConfig& config,
                       Rng& rng) {
  const int v = static_cast<int>(logits.size());
  if (config.greedy || config.top_k == 1) {
    int best = 0;
    logits.maxCoeff(&best);
    return best;
  }
  std::vector<int> order(static_cast<size_t>(v));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits(a) > logits(b); });
  const int k = std::min(config.top_k, v);
  std::vector<double> probs(static_cast<size_t>(k));
  const double m = logits(order[0]);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    probs[static_cast<size_t>(i)] = std::exp((logits(order[static_cast<size_t>(i)]) - m) /
                                             config.temperature);
    total += probs[static_cast<size_t>(i)];
  }
  // Nucleus truncation over the top-k renormalized distribution.
  int keep = k;
  if (config.top_p < 1.0) {
    double cum = 0.0;
    for (int i = 0; i < k; ++i) {
      cum += probs[static_cast<size_t>(i)] / total;
      if (cum >= config.top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  double kept_total = 0.0;
  for (int i = 0; i < keep; ++i) kept_total += probs[static_cast<size_t>(i)];
  double r = rng.uniform() * kept_total;
  for (int i = 0; i < keep; ++i) {
    r -= probs[static_cast<size_t>(i)];
    if (r <= 0.0) return order[static_cast<size_t>(i)];
  }
  return order[static_cast<size_t>(keep - 1)];
}

}  // namespace

std::vector<std::vector<int>> TransformerLm::sample_tokens(const Mat& prompt_embeddings,
                                                           const GenerationConfig& config,
                                                           int n) const {
  config.validate();
  if (n < 1) throw config_error("sample count must be >= 1");
  const long tp = prompt_embeddings.rows();
  if (tp + config.max_new_tokens > config_.max_seq)
    throw validation_error("prompt plus max_new_tokens exceeds context window");

  ForwardCache prefill;
  Mat prefill_logits = forward(prompt_embeddings, &prefill);
  const Eigen::RowVectorXd first_logits = prefill_logits.row(tp - 1);

  const int nh = config_.heads;
  const int hd = config_.h / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const long cap = tp + config.max_new_tokens;

  std::vector<std::vector<int>> results;
  results.reserve(static_cast<size_t>(n));
  for (int b = 0; b < n; ++b) {
    Rng rng(hash_seed(config.seed, static_cast<uint64_t>(b)));
    // Per-sample KV cache seeded with the shared prompt prefill.
    std::vector<Mat> kc(blocks_.size()), vc(blocks_.size());
    for (size_t l = 0; l < blocks_.size(); ++l) {
      kc[l].resize(cap, config_.h);
      vc[l].resize(cap, config_.h);
      kc[l].topRows(tp) = prefill.layers[l].k;
      vc[l].topRows(tp) = prefill.layers[l].v;
    }
    long len = tp;
    std::vector<int> tokens;
    int tok = sample_from_logits(first_logits, config, rng);
    while (tok != CharTokenizer::kEos && static_cast<int>(tokens.size()) < config.max_new_tokens) {
      tokens.push_back(tok);
      if (static_cast<int>(tokens.size()) == config.max_new_tokens) break;
      // Incremental forward for the freshly emitted token at position len.
      Vec x = tok_emb_.value.row(tok).transpose() + pos_emb_.value.row(len).transpose();
      for (size_t l = 0; l < blocks_.size(); ++l) {
        const Block& blk = blocks_[l];
        Vec ln1 = ln_forward_vec(x, blk.ln1_g, blk.ln1_b);
        Vec q = blk.wq.value * ln1 + blk.bq.value.col(0);
        Vec kv = blk.wk.value * ln1 + blk.bk.value.col(0);
        Vec vv = blk.wv.value * ln1 + blk.bv.value.col(0);
        kc[l].row(len) = kv.transpose();
        vc[l].row(len) = vv.transpose();
        Vec attn(config_.h);
        for (int h = 0; h < nh; ++h) {
          auto kh = kc[l].middleRows(0, len + 1).middleCols(h * hd, hd);
          auto vh = vc[l].middleRows(0, len + 1).middleCols(h * hd, hd);
          Eigen::RowVectorXd s = (kh * q.segment(h * hd, hd)).transpose() * scale;
          softmax_row_inplace(s);
          attn.segment(h * hd, hd) = (s * vh).transpose();
        }
        Vec attn_out = blk.wo.value * attn + blk.bo.value.col(0);
        Vec x_mid = x + attn_out;
        Vec ln2 = ln_forward_vec(x_mid, blk.ln2_g, blk.ln2_b);
        Vec up = (blk.w_up.value * ln2 + blk.b_up.value.col(0)).cwiseMax(0.0);
        Vec down = blk.w_down.value * up + blk.b_down.value.col(0);
        x = x_mid + down;
      }
      Vec lnf = ln_forward_vec(x, lnf_g_, lnf_b_);
      Eigen::RowVectorXd lg = (w_out_.value * lnf + b_out_.value.col(0)).transpose();
      ++len;
      tok = sample_from_logits(lg, config, rng);
    }
    results.push_back(std::move(tokens));
  }
  return results;
}

std::vector<std::string> TransformerLm::sample(const Mat& prompt_embeddings,
                                               const GenerationConfig& config, int n) const {
  auto token_sets = sample_tokens(prompt_embeddings, config, n);
  std::vector<std::string> out;
  out.reserve(token_sets.size());
  for (const auto& ids : token_sets) out.push_back(tokenizer_.decode(ids));
  return out;
}

std::vector<nn::Param*> TransformerLm::params() {
  std::vector<nn::Param*> out = {&tok_emb_, &pos_emb_};
  for (auto& blk : blocks_) {
    for (auto* p : {&blk.ln1_g, &blk.ln1_b, &blk.wq, &blk.bq, &blk.wk, &blk.bk, &blk.wv,
                    &blk.bv, &blk.wo, &blk.bo, &blk.ln2_g, &blk.ln2_b, &blk.w_up, &blk.b_up,
                    &blk.w_down, &blk.b_down})
      out.push_back(p);
  }
  out.push_back(&lnf_g_);
  out.push_back(&lnf_b_);
  out.push_back(&w_out_);
  out.push_back(&b_out_);
  return out;
}

std::vector<const nn::Param*> TransformerLm::params() const {
  auto mut = const_cast<TransformerLm*>(this)->params();
  return std::vector<const nn::Param*>(mut.begin(), mut.end());
}

void TransformerLm::save(const std::string& dir) const {
  fs::create_directories(dir);
  ordered_json manifest = {{"h", config_.h},       {"layers", config_.layers},
                           {"heads", config_.heads}, {"max_seq", config_.max_seq},
                           {"vocab", vocab_},        {"init_std", config_.init_std},
                           {"seed", config_.seed},   {"version", "1"}};
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw io_error("cannot write backbone manifest in " + dir);
  mf << manifest.dump(2) << "\n";
  std::ofstream tf(fs::path(dir) / "tokenizer.json");
  tf << ordered_json{{"type", "char"}, {"vocab", vocab_}}.dump(2) << "\n";
  std::ofstream pf(fs::path(dir) / "params.bin", std::ios::binary);
  if (!pf) throw io_error("cannot write backbone parameters in " + dir);
  nn::write_params(pf, params());
}

TransformerLm TransformerLm::load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw missing_artifact_error("backbone manifest not found in " + dir);
  json manifest = json::parse(mf);
  BackboneConfig config;
  config.h = manifest.at("h").get<int>();
  config.layers = manifest.at("layers").get<int>();
  config.heads = manifest.at("heads").get<int>();
  config.max_seq = manifest.at("max_seq").get<int>();
  config.init_std = manifest.value("init_std", 0.08);
  config.seed = manifest.value("seed", 0ULL);
  TransformerLm model(config);
  if (manifest.at("vocab").get<int>() != model.vocab_)
    throw validation_error("checkpoint vocabulary does not match tokenizer");
  std::ifstream pf(fs::path(dir) / "params.bin", std::ios::binary);
  if (!pf) throw missing_artifact_error("backbone parameters not found in " + dir);
  nn::read_params(pf, model.params());
  return model;
}

}  // namespace gencat
