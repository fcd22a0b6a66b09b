#pragma once

#include <cstdint>
#include <span>

#include "swf/tensor.hpp"

namespace swf {

/// Event-driven matrix-vector product: out[j] = sum over nonzero spikes i of
/// sign(spike[i]) * weights[j, i], accumulated in ascending i. Only additions
/// and subtractions are issued, and the result is bit-identical to a dense
/// product with the spikes cast to reals.
DenseTensor spike_matmul(std::span<const std::int8_t> spikes, const DenseTensor& weights);
DenseTensor spike_matmul(const SpikeTensor& spikes, const DenseTensor& weights);

/// Per-position block-diagonal channel weights: k independent
/// (D/k) x (D/k) matrices at every token position (m, n) of an H x W grid.
/// Storage is [H*W, k, D/k, D/k].
class BlockDiagonalWeight {
 public:
  BlockDiagonalWeight(std::size_t dim, std::size_t k, std::size_t height, std::size_t width);
  /// Adopts existing values; `values` must have shape [H*W, k, D/k, D/k].
  BlockDiagonalWeight(std::size_t dim, std::size_t k, std::size_t height, std::size_t width,
                      DenseTensor values);

  std::size_t dim() const { return dim_; }
  std::size_t blocks() const { return k_; }
  std::size_t block_dim() const { return dim_ / k_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  /// Element (i, j) of block `l` at position (m, n).
  Real& operator()(std::size_t m, std::size_t n, std::size_t l, std::size_t i, std::size_t j);
  Real operator()(std::size_t m, std::size_t n, std::size_t l, std::size_t i, std::size_t j) const;

  DenseTensor& values() { return values_; }
  const DenseTensor& values() const { return values_; }

  void set_identity();

 private:
  std::size_t dim_, k_, height_, width_;
  DenseTensor values_;
};

/// y_l = W_l(m, n) x_l for every block l; `x` has shape [k, D/k].
DenseTensor block_diag_apply(const DenseTensor& x, const BlockDiagonalWeight& w, std::size_t m,
                             std::size_t n);
/// Spike-input form; issues only additions and subtractions.
DenseTensor block_diag_apply(const SpikeTensor& x, const BlockDiagonalWeight& w, std::size_t m,
                             std::size_t n);

/// H * W * k * (D/k)^2.
std::size_t param_count(const BlockDiagonalWeight& w);
std::size_t block_diag_param_count(std::size_t dim, std::size_t k, std::size_t height, std::size_t width);

/// [T, D, H, W] -> [k*T, D/k, H, W]; channel block l of timestep t lands at
/// batch index l*T + t.
SpikeTensor reshape_for_blocks(const SpikeTensor& s, std::size_t k);
/// Inverse of reshape_for_blocks.
SpikeTensor restore_from_blocks(const SpikeTensor& s, std::size_t k);

}  // namespace swf
