#include "doctest.h"
#include "swf/errors.hpp"
#include "swf/kernels.hpp"
#include "swf/random.hpp"

using namespace swf;

namespace {

SpikeTensor random_spikes(Rng& rng, Shape shape, Polarity p) {
  SpikeTensor s(shape, p);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = rng.uniform();
    if (u < 0.3) s.set(i, 1);
    else if (p == Polarity::ternary && u < 0.6) s.set(i, -1);
  }
  return s;
}

DenseTensor random_dense(Rng& rng, Shape shape) {
  DenseTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2.0, 2.0);
  return t;
}

// out[j] = sum_i w[j, i] * s[i], ascending i, with the spike cast to a real.
std::vector<double> dense_oracle(const SpikeTensor& s, const DenseTensor& w) {
  std::vector<double> out(w.extent(0), 0.0);
  for (std::size_t j = 0; j < w.extent(0); ++j)
    for (std::size_t i = 0; i < w.extent(1); ++i)
      if (s[i] != 0) out[j] += static_cast<double>(s[i]) * w[j * w.extent(1) + i];
  return out;
}

}  // namespace

TEST_CASE("spike_matmul hand examples") {
  const DenseTensor w({2, 2}, {2, 5, 1, 1});
  const SpikeTensor s({2}, {1, -1}, Polarity::ternary);
  const DenseTensor y = spike_matmul(s, w);
  CHECK(y[0] == -3.0);
  CHECK(y[1] == 0.0);

  const SpikeTensor zero({2}, Polarity::binary);
  const DenseTensor z = spike_matmul(zero, w);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);

  const SpikeTensor ones({2}, {1, 1}, Polarity::binary);
  const DenseTensor r = spike_matmul(ones, w);
  CHECK(r[0] == 7.0);
  CHECK(r[1] == 2.0);
}

TEST_CASE("spike_matmul matches the dense oracle bit for bit") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t in = 1 + rng.below(64), out = 1 + rng.below(64);
    const SpikeTensor s = random_spikes(rng, {in}, trial % 2 ? Polarity::ternary : Polarity::binary);
    const DenseTensor w = random_dense(rng, {out, in});
    const DenseTensor y = spike_matmul(s, w);
    const auto ref = dense_oracle(s, w);
    for (std::size_t j = 0; j < out; ++j) REQUIRE(y[j] == ref[j]);
  }
}

TEST_CASE("spike_matmul rejects mismatched weights") {
  const SpikeTensor s({3}, Polarity::binary);
  CHECK_THROWS_AS(spike_matmul(s, DenseTensor({2, 4})), DimensionError);
}

TEST_CASE("block_diag_apply examples") {
  SUBCASE("identity blocks") {
    BlockDiagonalWeight w(6, 3, 2, 2);
    w.set_identity();
    const DenseTensor x({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(block_diag_apply(x, w, 1, 0) == x);
  }
  SUBCASE("permutation in the second block") {
    BlockDiagonalWeight w(4, 2, 1, 1);
    w(0, 0, 0, 0, 0) = 1;
    w(0, 0, 0, 1, 1) = 1;
    w(0, 0, 1, 0, 1) = 1;
    w(0, 0, 1, 1, 0) = 1;
    const DenseTensor x({2, 2}, {1.5, 2.5, 3.5, 4.5});
    const DenseTensor y = block_diag_apply(x, w, 0, 0);
    CHECK(y == DenseTensor({2, 2}, {1.5, 2.5, 4.5, 3.5}));
  }
  SUBCASE("k = 1 is one dense product") {
    Rng rng(3);
    BlockDiagonalWeight w(4, 1, 1, 1, random_dense(rng, {1, 1, 4, 4}));
    const DenseTensor x = random_dense(rng, {1, 4});
    const DenseTensor y = block_diag_apply(x, w, 0, 0);
    for (std::size_t i = 0; i < 4; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 4; ++j) acc += w(0, 0, 0, i, j) * x[j];
      CHECK(y[i] == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("block_diag_apply matches the assembled block-diagonal matrix") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = std::size_t{1} << rng.below(3);
    const std::size_t bd = 1 + rng.below(8);
    const std::size_t D = k * bd, H = 1 + rng.below(3), W = 1 + rng.below(3);
    BlockDiagonalWeight w(D, k, H, W, random_dense(rng, {H * W, k, bd, bd}));
    const std::size_t m = rng.below(H), n = rng.below(W);
    // Full D x D matrix with the blocks on the diagonal.
    std::vector<double> full(D * D, 0.0);
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t i = 0; i < bd; ++i)
        for (std::size_t j = 0; j < bd; ++j) full[(l * bd + i) * D + l * bd + j] = w(m, n, l, i, j);

    const DenseTensor x = random_dense(rng, {k, bd});
    const DenseTensor y = block_diag_apply(x, w, m, n);
    for (std::size_t r = 0; r < D; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < D; ++c) acc += full[r * D + c] * x[c];
      REQUIRE(std::abs(y[r] - acc) <= 1e-12);
    }

    const SpikeTensor s = random_spikes(rng, {k, bd}, Polarity::ternary);
    const DenseTensor ys = block_diag_apply(s, w, m, n);
    const DenseTensor yd = block_diag_apply(s.to_dense(), w, m, n);
    for (std::size_t r = 0; r < D; ++r) REQUIRE(std::abs(ys[r] - yd[r]) <= 1e-12);
  }
}

TEST_CASE("block_diag_apply checks its layout") {
  BlockDiagonalWeight w(4, 2, 2, 2);
  CHECK_THROWS_AS(block_diag_apply(DenseTensor({4, 1}), w, 0, 0), ConfigError);
  CHECK_THROWS_AS(block_diag_apply(DenseTensor({2, 2}), w, 2, 0), DimensionError);
  CHECK_THROWS_AS(BlockDiagonalWeight(6, 4, 1, 1), ConfigError);
}

TEST_CASE("block-diagonal parameter count") {
  CHECK(block_diag_param_count(8, 2, 1, 1) == 32);
  CHECK(block_diag_param_count(8, 4, 1, 1) == 16);
  CHECK(block_diag_param_count(512, 4, 8, 8) == 4194304);
  CHECK(param_count(BlockDiagonalWeight(32, 2, 4, 4)) == 2 * param_count(BlockDiagonalWeight(32, 4, 4, 4)));
}

TEST_CASE("reshape_for_blocks index mapping") {
  Rng rng(9);
  const std::size_t T = 4, D = 8, H = 3, W = 2, k = 2, bd = D / k;
  const SpikeTensor s = random_spikes(rng, {T, D, H, W}, Polarity::ternary);
  const SpikeTensor r = reshape_for_blocks(s, k);
  REQUIRE(r.shape() == Shape{k * T, bd, H, W});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < D; ++c)
      for (std::size_t p = 0; p < H * W; ++p) {
        const std::size_t l = c / bd;
        REQUIRE(r[((l * T + t) * bd + c % bd) * H * W + p] == s[(t * D + c) * H * W + p]);
      }
  CHECK(restore_from_blocks(r, k) == s);
  CHECK(reshape_for_blocks(s, 1) == s);
  CHECK_THROWS_AS(reshape_for_blocks(s, 3), ConfigError);
}
