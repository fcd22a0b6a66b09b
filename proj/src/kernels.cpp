#include "swf/kernels.hpp"

#include "swf/errors.hpp"

namespace swf {

DenseTensor spike_matmul(std::span<const std::int8_t> spikes, const DenseTensor& weights) {
  if (weights.rank() != 2 || weights.extent(1) != spikes.size())
    throw DimensionError("spike_matmul: weights " + shape_string(weights.shape()) +
                         " against spike vector of length " + std::to_string(spikes.size()));
  const std::size_t rows = weights.extent(0);
  const std::size_t cols = weights.extent(1);
  DenseTensor out({rows});
  const Real* w = weights.data().data();
  for (std::size_t j = 0; j < rows; ++j) {
    Real acc = 0.0;
    const Real* row = w + j * cols;
    for (std::size_t i = 0; i < cols; ++i) {
      if (spikes[i] > 0) acc += row[i];
      else if (spikes[i] < 0) acc -= row[i];
    }
    out[j] = acc;
  }
  return out;
}

DenseTensor spike_matmul(const SpikeTensor& spikes, const DenseTensor& weights) {
  return spike_matmul(spikes.values(), weights);
}

BlockDiagonalWeight::BlockDiagonalWeight(std::size_t dim, std::size_t k, std::size_t height,
                                         std::size_t width)
    : dim_(dim), k_(k), height_(height), width_(width) {
  if (k == 0 || dim % k != 0)
    throw ConfigError("embedding dim " + std::to_string(dim) + " is not divisible by k=" + std::to_string(k));
  values_ = DenseTensor({height * width, k, dim / k, dim / k});
}

BlockDiagonalWeight::BlockDiagonalWeight(std::size_t dim, std::size_t k, std::size_t height,
                                         std::size_t width, DenseTensor values)
    : BlockDiagonalWeight(dim, k, height, width) {
  if (values.shape() != values_.shape())
    throw DimensionError("block-diagonal values " + shape_string(values.shape()) + ", expected " +
                         shape_string(values_.shape()));
  values_ = std::move(values);
}

Real& BlockDiagonalWeight::operator()(std::size_t m, std::size_t n, std::size_t l, std::size_t i,
                                      std::size_t j) {
  const std::size_t bd = block_dim();
  return values_[(((m * width_ + n) * k_ + l) * bd + i) * bd + j];
}

Real BlockDiagonalWeight::operator()(std::size_t m, std::size_t n, std::size_t l, std::size_t i,
                                     std::size_t j) const {
  const std::size_t bd = block_dim();
  return values_[(((m * width_ + n) * k_ + l) * bd + i) * bd + j];
}

void BlockDiagonalWeight::set_identity() {
  values_.fill(0.0);
  for (std::size_t m = 0; m < height_; ++m)
    for (std::size_t n = 0; n < width_; ++n)
      for (std::size_t l = 0; l < k_; ++l)
        for (std::size_t i = 0; i < block_dim(); ++i) (*this)(m, n, l, i, i) = 1.0;
}

namespace {
void check_block_input(const Shape& shape, const BlockDiagonalWeight& w, std::size_t m, std::size_t n) {
  if (shape.size() != 2 || shape[0] != w.blocks() || shape[1] != w.block_dim())
    throw ConfigError("block layout " + shape_string(shape) + " does not match k=" +
                      std::to_string(w.blocks()) + ", block_dim=" + std::to_string(w.block_dim()));
  if (m >= w.height() || n >= w.width()) throw DimensionError("token position outside the weight grid");
}
}  // namespace

DenseTensor block_diag_apply(const DenseTensor& x, const BlockDiagonalWeight& w, std::size_t m,
                             std::size_t n) {
  check_block_input(x.shape(), w, m, n);
  const std::size_t bd = w.block_dim();
  DenseTensor y(x.shape());
  for (std::size_t l = 0; l < w.blocks(); ++l)
    for (std::size_t i = 0; i < bd; ++i) {
      Real acc = 0.0;
      for (std::size_t j = 0; j < bd; ++j) acc += w(m, n, l, i, j) * x[l * bd + j];
      y[l * bd + i] = acc;
    }
  return y;
}

DenseTensor block_diag_apply(const SpikeTensor& x, const BlockDiagonalWeight& w, std::size_t m,
                             std::size_t n) {
  check_block_input(x.shape(), w, m, n);
  const std::size_t bd = w.block_dim();
  DenseTensor y(x.shape());
  for (std::size_t l = 0; l < w.blocks(); ++l)
    for (std::size_t i = 0; i < bd; ++i) {
      Real acc = 0.0;
      for (std::size_t j = 0; j < bd; ++j) {
        const auto s = x[l * bd + j];
        if (s > 0) acc += w(m, n, l, i, j);
        else if (s < 0) acc -= w(m, n, l, i, j);
      }
      y[l * bd + i] = acc;
    }
  return y;
}

std::size_t block_diag_param_count(std::size_t dim, std::size_t k, std::size_t height, std::size_t width) {
  if (k == 0 || dim % k != 0) throw ConfigError("embedding dim not divisible by k");
  const std::size_t bd = dim / k;
  return height * width * k * bd * bd;
}

std::size_t param_count(const BlockDiagonalWeight& w) {
  return block_diag_param_count(w.dim(), w.blocks(), w.height(), w.width());
}

namespace {
void check_blocks(const SpikeTensor& s, std::size_t k, const char* what) {
  if (s.shape().size() != 4) throw DimensionError(std::string(what) + ": expected a rank-4 spike tensor");
  if (k == 0 || s.shape()[1] % k != 0)
    throw ConfigError(std::string(what) + ": channel count " + std::to_string(s.shape()[1]) +
                      " is not divisible by k=" + std::to_string(k));
}
}  // namespace

SpikeTensor reshape_for_blocks(const SpikeTensor& s, std::size_t k) {
  check_blocks(s, k, "reshape_for_blocks");
  const auto& sh = s.shape();
  const std::size_t T = sh[0], D = sh[1], plane = sh[2] * sh[3], bd = D / k;
  std::vector<std::int8_t> out(s.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t c = 0; c < bd; ++c)
        for (std::size_t p = 0; p < plane; ++p)
          out[((l * T + t) * bd + c) * plane + p] = s[(t * D + l * bd + c) * plane + p];
  return SpikeTensor({T * k, bd, sh[2], sh[3]}, std::move(out), s.polarity());
}

SpikeTensor restore_from_blocks(const SpikeTensor& s, std::size_t k) {
  if (s.shape().size() != 4 || k == 0 || s.shape()[0] % k != 0)
    throw ConfigError("restore_from_blocks: leading axis not divisible by k");
  const auto& sh = s.shape();
  const std::size_t T = sh[0] / k, bd = sh[1], D = bd * k, plane = sh[2] * sh[3];
  std::vector<std::int8_t> out(s.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t c = 0; c < bd; ++c)
        for (std::size_t p = 0; p < plane; ++p)
          out[(t * D + l * bd + c) * plane + p] = s[((l * T + t) * bd + c) * plane + p];
  return SpikeTensor({T, D, sh[2], sh[3]}, std::move(out), s.polarity());
}

}  // namespace swf
