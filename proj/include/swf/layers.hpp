#pragma once

#include <map>
#include <string>
#include <vector>

#include "swf/neurons.hpp"
#include "swf/random.hpp"
#include "swf/tensor.hpp"
#include "swf/wavelet.hpp"

// Training layers. Activations are DenseTensor [N, C, H, W] with the batch
// and time axes folded into N = T * B (timestep-major: n = t * B + b).
// Every layer caches what its backward pass needs from the last forward.

namespace swf {

struct Param {
  std::string name;
  DenseTensor value;
  DenseTensor grad;
  /// Receives decoupled weight decay.
  bool decay = false;

  Param() = default;
  Param(std::string n, Shape shape, bool decay_) : name(std::move(n)), value(shape), grad(shape), decay(decay_) {}
};

/// Input statistics of one synaptic layer, captured during a traced forward.
struct SynapseStat {
  std::string layer;
  std::size_t timesteps = 0;
  std::size_t batch = 0;
  /// Input neurons per sample per timestep.
  std::size_t neurons = 0;
  /// Postsynaptic targets reached by one input event.
  std::size_t fan_out = 0;
  /// Nonzero inputs summed over all timesteps and samples.
  std::size_t nonzero = 0;
  /// Every input value lies in {-1, 0, +1}.
  bool spike_valued = true;
};

struct LayerActivationTrace {
  std::size_t timesteps = 0;
  std::size_t batch = 0;
  /// Feature maps [T, B, C, H, W], keyed by layer name.
  std::map<std::string, DenseTensor> maps;
  std::vector<SynapseStat> synapses;

  /// Stores x ([N, C, H, W] with N = T * B) as [T, B, C, H, W].
  void record_map(const std::string& name, const DenseTensor& x);
  /// `input` is [N, ...] with N = T * B.
  void record_synapse(const std::string& layer, const DenseTensor& input, std::size_t fan_out);
};

/// Grouped 2D convolution without bias. Spike inputs are consumed as events:
/// zero inputs issue no work.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
         std::size_t groups);

  void init(Rng& rng);
  DenseTensor forward(const DenseTensor& x, LayerActivationTrace* trace = nullptr);
  /// Accumulates into weight.grad; returns the input gradient unless
  /// `need_input_grad` is false (then an empty tensor).
  DenseTensor backward(const DenseTensor& grad_out, bool need_input_grad = true);

  std::size_t out_side(std::size_t in_side) const { return (in_side + 2 * pad_ - kernel_) / stride_ + 1; }
  std::size_t fan_out() const;
  std::vector<Param*> params() { return {&weight}; }

  Param weight;  ///< [out, in / groups, K, K]

 private:
  std::string name_;
  std::size_t in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, groups_ = 1, pad_ = 0;
  DenseTensor x_;
};

/// Per-channel batch normalisation over N, H and W.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, std::size_t channels);

  void init(bool zero_gamma);
  DenseTensor forward(const DenseTensor& x, bool training);
  DenseTensor backward(const DenseTensor& grad_out);
  std::vector<Param*> params() { return {&gamma, &beta}; }

  Param gamma, beta;
  DenseTensor running_mean, running_var;
  std::string name;

  static constexpr Real kEps = 1e-5;
  static constexpr Real kMomentum = 0.1;

 private:
  DenseTensor xhat_;
  std::vector<Real> inv_std_;
  bool training_ = false;
};

/// y = x W^T + b for x [B, in].
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out);

  void init(Rng& rng);
  DenseTensor forward(const DenseTensor& x, LayerActivationTrace* trace = nullptr);
  DenseTensor backward(const DenseTensor& grad_out);
  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight, bias;

 private:
  std::string name_;
  DenseTensor x_;
};

/// A population of spiking neurons unrolled over T steps. The input holds
/// currents [T * B, ...]; the output holds s in {-1, 0, +1} (or the clamped
/// ramp for relaxed neurons). Backward runs BPTT with the rectangular
/// surrogate, including the path through the reset.
class SpikeLayer {
 public:
  SpikeLayer() = default;
  SpikeLayer(NeuronConfig cfg, std::size_t timesteps, bool pass_through = false);

  DenseTensor forward(const DenseTensor& current);
  DenseTensor backward(const DenseTensor& grad_spikes) const;

  const NeuronConfig& config() const { return cfg_; }
  bool pass_through() const { return pass_through_; }

 private:
  NeuronConfig cfg_;
  std::size_t T_ = 1;
  bool pass_through_ = false;
  DenseTensor u_, s_;
};

enum class Side { left, right };

/// One Haar matrix product per [S, S] plane: right computes scale * x M^T,
/// left computes scale * M x. `scale` is the value carried by one input
/// spike. Spike inputs are accumulated event by event.
class HaarStage {
 public:
  HaarStage() = default;
  HaarStage(std::string name, DenseTensor m, Side side, Real scale);

  DenseTensor forward(const DenseTensor& x, LayerActivationTrace* trace = nullptr);
  DenseTensor backward(const DenseTensor& grad_out) const;

 private:
  std::string name_;
  DenseTensor m_, mt_;
  Side side_ = Side::left;
  Real scale_ = 1.0;
};

/// Block-diagonal channel mixing at every token position.
/// y[n, l*bd + i, p] = scale * sum_j W[p, l, i, j] x[n, l*bd + j, p].
class BlockDiagLayer {
 public:
  BlockDiagLayer() = default;
  BlockDiagLayer(std::string name, std::size_t dim, std::size_t k, std::size_t height, std::size_t width,
                 Real scale);

  void init(Rng& rng, bool zero);
  DenseTensor forward(const DenseTensor& x, LayerActivationTrace* trace = nullptr);
  DenseTensor backward(const DenseTensor& grad_out);
  std::vector<Param*> params() { return {&weight}; }

  Param weight;  ///< [H*W, k, D/k, D/k]

 private:
  std::string name_;
  std::size_t dim_ = 0, k_ = 1;
  Real scale_ = 1.0;
  DenseTensor x_;
};

/// Max-pool over the flattened token axis, kernel 2, stride 1, the last
/// token padded by itself so the length is kept.
class TokenMaxPool {
 public:
  DenseTensor forward(const DenseTensor& x);
  DenseTensor backward(const DenseTensor& grad_out) const;

 private:
  Shape shape_;
  std::vector<std::size_t> argmax_;
};

/// Replaces every token by the mean over tokens.
DenseTensor token_mean(const DenseTensor& x);
DenseTensor token_mean_backward(const DenseTensor& grad_out);

DenseTensor add(const DenseTensor& a, const DenseTensor& b);
void add_into(DenseTensor& a, const DenseTensor& b);

}  // namespace swf
