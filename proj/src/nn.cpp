#include "gencat/nn.hpp"

#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace gencat::nn {

void AdamW::step(const std::vector<Param*>& params, double lr_scale) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto* p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size())
    throw numeric_error("AdamW parameter list changed between steps");
  ++t_;
  const double lr = config_.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.grad.allFinite()) throw numeric_error("non-finite gradient in AdamW step");
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + config_.eps)).matrix();
    if (config_.weight_decay > 0.0) p.value -= lr * config_.weight_decay * p.value;
  }
}

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng, double init_std) {
  if (sizes.size() < 2) throw config_error("Mlp needs at least input and output sizes");
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    Param w, b;
    w.init(sizes[i + 1], sizes[i], rng, init_std);
    b.init_const(sizes[i + 1], 1, 0.0);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

Mat Mlp::forward(const Mat& input) const {
  Cache scratch;
  return forward(input, scratch);
}

Mat Mlp::forward(const Mat& input, Cache& cache) const {
  if (input.rows() != weights_[0].value.cols())
    throw numeric_error("Mlp input dimension mismatch: got " + std::to_string(input.rows()) +
                        ", want " + std::to_string(weights_[0].value.cols()));
  cache.input = input;
  cache.pre.clear();
  cache.post.clear();
  Mat x = input;
  for (size_t i = 0; i < weights_.size(); ++i) {
    Mat z = weights_[i].value * x;
    z.colwise() += Vec(biases_[i].value.col(0));
    cache.pre.push_back(z);
    if (i + 1 < weights_.size()) z = z.cwiseMax(0.0);
    cache.post.push_back(z);
    x = z;
  }
  return x;
}

Mat Mlp::backward(const Mat& d_output, const Cache& cache) {
  Mat d = d_output;
  for (size_t i = weights_.size(); i-- > 0;) {
    if (i + 1 < weights_.size()) {
      // ReLU mask from the pre-activation.
      d = (cache.pre[i].array() > 0.0).cast<double>().matrix().cwiseProduct(d);
    }
    const Mat& x = i == 0 ? cache.input : cache.post[i - 1];
    weights_[i].grad += d * x.transpose();
    biases_[i].grad += d.rowwise().sum();
    d = weights_[i].value.transpose() * d;
  }
  return d;
}

std::vector<Param*> Mlp::params() {
  std::vector<Param*> out;
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<const Param*> Mlp::params() const {
  std::vector<const Param*> out;
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<int> Mlp::layer_sizes() const {
  std::vector<int> sizes;
  if (weights_.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights_[0].value.cols()));
  for (const auto& w : weights_) sizes.push_back(static_cast<int>(w.value.rows()));
  return sizes;
}

void write_params(std::ostream& out, const std::vector<const Param*>& params) {
  for (const auto* p : params) {
    const auto n = static_cast<size_t>(p->value.size());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw io_error("failed writing parameter blob");
}

void read_params(std::istream& in, const std::vector<Param*>& params) {
  for (auto* p : params) {
    const auto n = static_cast<size_t>(p->value.size());
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw io_error("parameter blob truncated");
  }
}

std::string params_checksum(const std::vector<const Param*>& params) {
  // FNV-1a over the raw bytes; used for freeze contracts, not security.
  uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const size_t n = static_cast<size_t>(p->value.size()) * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace gencat::nn
