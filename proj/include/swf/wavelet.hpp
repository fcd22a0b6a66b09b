#pragma once

#include <variant>

#include "swf/neurons.hpp"
#include "swf/tensor.hpp"

namespace swf {

/// Orthonormal Haar matrix of side 2^(level-1).
struct HaarMatrix {
  int level = 1;
  DenseTensor m;

  std::size_t side() const { return m.extent(0); }
  DenseTensor transposed() const;
};

/// W(1) = [1]; W(n) = 1/sqrt(2) [ W(n-1) (x) [1, 1] ; I_{2^(n-2)} (x) [1, -1] ].
HaarMatrix haar_matrix(int level);
/// Haar matrix whose side equals `side` (a power of two).
HaarMatrix haar_matrix_for_side(std::size_t side);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

enum class TransformMode { exact, spiking_binary, spiking_ternary };
enum class Direction { forward, inverse };

std::string to_string(TransformMode m);

struct TransformResult {
  /// Exact mode: DenseTensor [.., S, S]. Spiking modes: SpikeTensor [T, S, S].
  std::variant<DenseTensor, SpikeTensor> coeffs;
  TransformMode mode = TransformMode::exact;
  std::size_t timesteps = 1;
  /// Spiking modes: value carried by one spike at each coefficient position,
  /// [S, S]. Empty means 1.
  DenseTensor units;

  /// Time-averaged real-valued view, shape [.., S, S].
  DenseTensor decoded() const;
};

/// H_f = W x W^T for x of shape [S, S] (or a stack [.., S, S]).
TransformResult haar2d_forward_exact(const DenseTensor& x, const HaarMatrix& w);
/// x = W^T H_f W.
DenseTensor haar2d_inverse_exact(const DenseTensor& coeffs, const HaarMatrix& w);

/// Two spiking matrix stages: forward Spk(W Spk(x W^T)), inverse
/// Spk(W^T Spk(H W)). `x` holds spikes [T, S, S]; a spike at position p is
/// worth input_units[p]. Every product is an event-driven accumulation over
/// spikes, and each stage re-spikes through integrate-and-fire neurons
/// (beta = 1) whose polarity follows `cfg`.
///
/// Each neuron's spike is worth V_th times the largest magnitude its quantity
/// can take when the spatial signal (the input going forward, the
/// reconstruction going back) lies in [-range, range]. Neurons therefore
/// never saturate for such signals, and the time-averaged output tends to
/// the exact transform as T grows.
TransformResult haar2d_spiking(const SpikeTensor& x, const HaarMatrix& w, const NeuronConfig& cfg,
                               Direction direction, const DenseTensor& input_units, Real range = 1.0);
/// Same, with every input spike worth `input_value`.
TransformResult haar2d_spiking(const SpikeTensor& x, const HaarMatrix& w, const NeuronConfig& cfg,
                               Direction direction, Real input_value = 1.0, Real range = 1.0);

/// Deterministic rate coding: an integrate-and-fire encoder (threshold 1,
/// subtraction reset) driven by the constant image for T steps. Values in
/// [0, 1] give binary spikes; negative values need ternary polarity.
SpikeTensor rate_encode(const DenseTensor& x, std::size_t timesteps, Polarity polarity = Polarity::binary);

/// Rate-code, spiking forward, spiking inverse, time-average.
DenseTensor spiking_round_trip(const DenseTensor& image, std::size_t timesteps, Real v_th, Polarity polarity);

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
Real psnr(const DenseTensor& reference, const DenseTensor& reconstruction, Real peak);

/// Zeroes the (0, 0) coefficient of every [S, S] plane.
TransformResult mask_dc(const TransformResult& coeffs);

/// Zero-pads a [.., H, W] stack symmetrically to the next power-of-two square.
DenseTensor center_pad_pow2(const DenseTensor& x);

}  // namespace swf
