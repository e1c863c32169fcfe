#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gencat/common.hpp"
#include "gencat/rng.hpp"

namespace gencat::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A trainable tensor with its gradient accumulator.
struct Param {
  Mat value;
  Mat grad;

  void init(int rows, int cols, Rng& rng, double stddev) {
    value.resize(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) value(r, c) = stddev == 0.0 ? 0.0 : rng.normal(0.0, stddev);
    grad = Mat::Zero(rows, cols);
  }
  void init_const(int rows, int cols, double v) {
    value = Mat::Constant(rows, cols, v);
    grad = Mat::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay Adam over an explicit parameter list. State is
// positional: the same list (same order) must be passed to every step.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  // lr_scale multiplies the base rate (warmup / schedules).
  void step(const std::vector<Param*>& params, double lr_scale = 1.0);
  void reset() { m_.clear(); v_.clear(); t_ = 0; }

 private:
  AdamWConfig config_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (auto* p : params) p->zero_grad();
}

// Fully connected stack with ReLU between layers (none after the last).
// Applies to column batches: forward input is (in_dim x B).
class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}
  Mlp(const std::vector<int>& sizes, Rng& rng, double init_std = 0.1);

  Mat forward(const Mat& input) const;  // (in x B) -> (out x B), no cache

  struct Cache {
    Mat input;
    std::vector<Mat> pre;   // pre-activation per layer
    std::vector<Mat> post;  // post-activation per layer (last = output)
  };
  Mat forward(const Mat& input, Cache& cache) const;
  // Returns d(input); accumulates parameter grads.
  Mat backward(const Mat& d_output, const Cache& cache);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  int in_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_[0].value.cols()); }
  int out_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.back().value.rows()); }

  std::vector<int> layer_sizes() const;

 private:
  std::vector<Param> weights_;  // (out x in)
  std::vector<Param> biases_;   // (out x 1)
};

// Serialization helpers shared by checkpoints: raw little-endian doubles.
void write_params(std::ostream& out, const std::vector<const Param*>& params);
void read_params(std::istream& in, const std::vector<Param*>& params);
std::string params_checksum(const std::vector<const Param*>& params);

}  // namespace gencat::nn
