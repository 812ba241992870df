#pragma once

#include "metaland/common.hpp"
#include "metaland/rng.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace metaland {

enum class NetKind { policy, value };
enum class Layer2 { gru, dense };

struct LayerSizes {
  std::size_t n_h1 = 0;
  std::size_t n_h2 = 0;
  std::size_t n_h3 = 0;
  std::size_t n_out = 0;

  bool operator==(const LayerSizes&) const = default;
};

LayerSizes layer_sizes(std::size_t obs_dim, std::size_t act_dim, NetKind kind);

/// h' = (1 - z) h + z tanh(Wc [x, r*h] + bc),  z, r = sigmoid(W [x, h] + b).
struct GruStep {
  VecX z, r, c, h;
};
GruStep gru_cell(const VecX& x, const VecX& h, const MatX& wz, const VecX& bz, const MatX& wr, const VecX& br,
                 const MatX& wc, const VecX& bc);

/// Per-step activations of a batched forward pass, one column per sequence.
struct StepCache {
  MatX x, a1, h_prev, z, r, rh, c, a2, a3;
};

struct Tape {
  std::vector<StepCache> steps;
};

// Four-layer network: dense tanh, GRU (or dense tanh), dense tanh, linear.
// All parameters live in one flat vector so optimizers and checkpoints see a single array.
class Network {
 public:
  Network() = default;
  Network(std::size_t n_in, LayerSizes sizes, Layer2 layer2);

  std::size_t input_dim() const { return n_in_; }
  std::size_t output_dim() const { return sizes_.n_out; }
  const LayerSizes& sizes() const { return sizes_; }
  Layer2 layer2() const { return layer2_; }
  bool recurrent() const { return layer2_ == Layer2::gru; }
  /// Length of the carried state; zero for the dense variant.
  std::size_t hidden_dim() const { return recurrent() ? sizes_.n_h2 : 0; }

  std::size_t num_params() const { return static_cast<std::size_t>(theta_.size()); }
  const VecX& params() const { return theta_; }
  VecX& params() { return theta_; }
  void set_params(const VecX& theta);

  void init(Rng& rng, double output_scale = 0.01);

  /// Single step; h is ignored (may be empty) for the dense variant.
  VecX forward(const VecX& x, const VecX& h, VecX* h_out) const;

  // Columns are independent sequences advanced in lockstep. Returns outputs per step.
  std::vector<MatX> forward_batch(const std::vector<MatX>& xs, const MatX& h0, Tape* tape) const;

  /// Accumulates d(loss)/d(theta) into grad given d(loss)/d(output) per step.
  /// Gradients stop at h0 (truncated unroll).
  void backward_batch(const Tape& tape, const std::vector<MatX>& dys, VecX& grad) const;

  /// Named parameter blocks in storage order, with their shapes.
  struct Block {
    std::string name;
    std::size_t offset, rows, cols;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  using Map = Eigen::Map<const MatX>;
  using MapMut = Eigen::Map<MatX>;

  Map block(std::size_t k) const;
  MapMut grad_block(VecX& grad, std::size_t k) const;
  std::size_t add_block(const std::string& name, std::size_t rows, std::size_t cols);

  std::size_t n_in_ = 0;
  LayerSizes sizes_{};
  Layer2 layer2_ = Layer2::gru;
  std::vector<Block> blocks_;
  VecX theta_;
  // block indices
  std::size_t w1_ = 0, b1_ = 0, wz_ = 0, bz_ = 0, wr_ = 0, br_ = 0, wc_ = 0, bc_ = 0, w2_ = 0, b2_ = 0, w3_ = 0,
              b3_ = 0, wo_ = 0, bo_ = 0;
};

/// Sum over dimensions of the diagonal-Gaussian log density.
double gaussian_logp(const VecX& mean, const VecX& log_std, const VecX& action);

struct LogpGrad {
  VecX d_mean;     // (a - mu) / sigma^2
  VecX d_log_std;  // (a - mu)^2 / sigma^2 - 1
};
LogpGrad gaussian_logp_grad(const VecX& mean, const VecX& log_std, const VecX& action);

/// mean + exp(log_std) * xi; returns mean when deterministic.
VecX sample_action(const VecX& mean, const VecX& log_std, Rng& rng, bool deterministic = false);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr);

  /// Descent step: theta -= lr * m_hat / (sqrt(v_hat) + eps).
  void step(VecX& theta, const VecX& grad);

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  VecX m, v;
  std::uint64_t t = 0;
};

}  // namespace metaland
