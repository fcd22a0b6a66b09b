#include <cmath>

#include "doctest.h"
#include "swf/data.hpp"
#include "swf/errors.hpp"
#include "swf/random.hpp"
#include "swf/wavelet.hpp"

using namespace swf;

namespace {

DenseTensor random_image(Rng& rng, std::size_t side) {
  DenseTensor x({side, side});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  return x;
}

// Plain triple loop W x W^T.
DenseTensor sandwich_oracle(const DenseTensor& x, const DenseTensor& w) {
  const std::size_t n = w.extent(0);
  DenseTensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) acc += w[i * n + k] * x[k * n + l] * w[j * n + l];
      out[i * n + j] = acc;
    }
  return out;
}

double mse(const DenseTensor& a, const DenseTensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("haar matrix small cases") {
  CHECK(haar_matrix(1).m == DenseTensor({1, 1}, {1.0}));
  const double r = 1.0 / std::sqrt(2.0);
  const HaarMatrix w2 = haar_matrix(2);
  CHECK(w2.m[0] == doctest::Approx(r));
  CHECK(w2.m[1] == doctest::Approx(r));
  CHECK(w2.m[2] == doctest::Approx(r));
  CHECK(w2.m[3] == doctest::Approx(-r));
  CHECK(haar_matrix(4).side() == 8);
  CHECK_THROWS_AS(haar_matrix(0), DomainError);
  CHECK_THROWS_AS(haar_matrix_for_side(12), DomainError);
}

TEST_CASE("haar matrices are orthonormal") {
  for (int n = 1; n <= 8; ++n) {
    const HaarMatrix w = haar_matrix(n);
    const std::size_t s = w.side();
    REQUIRE(s == (std::size_t{1} << (n - 1)));
    double worst = 0.0;
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s; ++k) acc += w.m[i * s + k] * w.m[j * s + k];
        worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
      }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("exact transform examples") {
  SUBCASE("constant image has only DC") {
    const HaarMatrix w = haar_matrix_for_side(8);
    DenseTensor x({8, 8});
    x.fill(0.3);
    const DenseTensor h = haar2d_forward_exact(x, w).decoded();
    CHECK(h[0] == doctest::Approx(0.3 * 8));
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(std::abs(h[i]) < 1e-12);
  }
  SUBCASE("delta at the origin for S = 2") {
    const DenseTensor h = haar2d_forward_exact(DenseTensor({2, 2}, {1, 0, 0, 0}), haar_matrix(2)).decoded();
    for (std::size_t i = 0; i < 4; ++i) CHECK(h[i] == doctest::Approx(0.5));
  }
  SUBCASE("matches the triple-loop oracle and round-trips") {
    Rng rng(8);
    for (std::size_t side : {2, 4, 8, 16, 32}) {
      const HaarMatrix w = haar_matrix_for_side(side);
      for (int trial = 0; trial < 10; ++trial) {
        const DenseTensor x = random_image(rng, side);
        const DenseTensor h = haar2d_forward_exact(x, w).decoded();
        const DenseTensor ref = sandwich_oracle(x, w.m);
        for (std::size_t i = 0; i < h.size(); ++i) REQUIRE(std::abs(h[i] - ref[i]) < 1e-12);
        const DenseTensor back = haar2d_inverse_exact(h, w);
        for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(back[i] - x[i]) < 1e-10);
      }
    }
  }
  SUBCASE("plane checks") {
    CHECK_THROWS_AS(haar2d_forward_exact(DenseTensor({4, 2}), haar_matrix(2)), DimensionError);
    CHECK_THROWS_AS(haar2d_forward_exact(DenseTensor({4, 4}), haar_matrix(2)), DimensionError);
  }
}

TEST_CASE("rate coding") {
  const DenseTensor x({3}, {0.0, 0.37, 1.0});
  for (std::size_t T : {1, 4, 16}) {
    const SpikeTensor s = rate_encode(x, T);
    for (std::size_t i = 0; i < 3; ++i) {
      double count = 0;
      for (std::size_t t = 0; t < T; ++t) count += s[t * 3 + i];
      CHECK(std::abs(count / static_cast<double>(T) - x[i]) <= 1.0 / static_cast<double>(T));
    }
  }
  const SpikeTensor neg = rate_encode(DenseTensor({1}, {-1.0}), 3, Polarity::ternary);
  CHECK(neg[0] == -1);
}

TEST_CASE("spiking transform of silence is silent") {
  const HaarMatrix w = haar_matrix_for_side(8);
  const SpikeTensor zero({4, 8, 8}, Polarity::ternary);
  for (auto dir : {Direction::forward, Direction::inverse}) {
    const auto r = haar2d_spiking(zero, w, NeuronConfig::integrate_and_fire(0.5, Polarity::ternary), dir);
    CHECK(std::get<SpikeTensor>(r.coeffs).count_nonzero() == 0);
  }
  CHECK_THROWS_AS(haar2d_spiking(zero, w, NeuronConfig::lif(), Direction::forward), ConfigError);
}

TEST_CASE("spiking transform tends to the exact transform") {
  Rng rng(17);
  const std::size_t side = 8;
  const HaarMatrix w = haar_matrix_for_side(side);
  const DenseTensor x = random_image(rng, side);
  const auto cfg = NeuronConfig::integrate_and_fire(1.0, Polarity::ternary);
  const DenseTensor exact = haar2d_forward_exact(x, w).decoded();
  const DenseTensor coarse = haar2d_spiking(rate_encode(x, 32, Polarity::ternary), w, cfg, Direction::forward).decoded();
  const DenseTensor fine = haar2d_spiking(rate_encode(x, 1024, Polarity::ternary), w, cfg, Direction::forward).decoded();
  CHECK(mse(fine, exact) < mse(coarse, exact));
  CHECK(mse(fine, exact) < 1e-3);
  CHECK(psnr(x, spiking_round_trip(x, 1024, 1.0, Polarity::ternary), 1.0) > 25.0);
}

namespace {

// Decoded spiking DC minus the exact DC of the rate-decoded input.
double dc_error(std::size_t side, double value, std::size_t T) {
  DenseTensor x({side, side});
  x.fill(value);
  const HaarMatrix w = haar_matrix_for_side(side);
  const auto cfg = NeuronConfig::integrate_and_fire(1.0, Polarity::ternary);
  const SpikeTensor code = rate_encode(x, T, Polarity::ternary);
  const double dc = haar2d_spiking(code, w, cfg, Direction::forward).decoded()[0];
  const DenseTensor rates = TransformResult{code, TransformMode::spiking_ternary, T, {}}.decoded();
  return dc - haar2d_forward_exact(rates, w).decoded()[0];
}

}  // namespace

TEST_CASE("ternary spiking DC of a constant image within 1/T at T = 4") {
  for (std::size_t side : {2, 4, 8, 32})
    for (double value : {0.1, 0.25, 0.5, 0.75, 1.0}) CHECK(std::abs(dc_error(side, value, 4)) <= 0.25);
}

TEST_CASE("ternary spiking DC within 1/T at T = 4 on a 16 x 16 image" * doctest::should_fail()) {
  // The second stage has not fired by T = 4 for mid-range values: the
  // decoded DC is 0 where the exact one is 8.
  for (double value : {0.25, 0.5}) CHECK(std::abs(dc_error(16, value, 4)) <= 0.25);
}

TEST_CASE("binary round trip loses negative detail that ternary keeps") {
  // T = 64 is past the start-up latency of the five chained quantisers.
  const auto suite = fidelity_suite(16);
  for (const DenseTensor& x : suite) {
    const double binary = mse(x, spiking_round_trip(x, 64, 1.0, Polarity::binary));
    const double ternary = mse(x, spiking_round_trip(x, 64, 1.0, Polarity::ternary));
    CHECK(binary > ternary);
  }
}

TEST_CASE("psnr examples") {
  DenseTensor a({2, 2}, {0.1, 0.2, 0.3, 0.4});
  CHECK(std::isinf(psnr(a, a, 1.0)));
  DenseTensor b = a;
  for (std::size_t i = 0; i < 4; ++i) b[i] += 0.1;
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0));
  DenseTensor a3 = a, b3 = b;
  for (std::size_t i = 0; i < 4; ++i) {
    a3[i] *= 3;
    b3[i] *= 3;
  }
  CHECK(psnr(a3, b3, 3.0) == doctest::Approx(psnr(a, b, 1.0)));
  CHECK_THROWS_AS(psnr(a, b, 0.0), DomainError);
  CHECK_THROWS_AS(psnr(a, DenseTensor({4}), 1.0), DimensionError);
}

TEST_CASE("mask_dc examples") {
  const HaarMatrix w = haar_matrix_for_side(8);
  DenseTensor c({8, 8});
  c.fill(0.7);
  const DenseTensor masked = mask_dc(haar2d_forward_exact(c, w)).decoded();
  for (std::size_t i = 0; i < masked.size(); ++i) CHECK(std::abs(masked[i]) < 1e-12);

  Rng rng(4);
  DenseTensor x = random_image(rng, 8);
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += x[i] / 64.0;
  const DenseTensor back = haar2d_inverse_exact(mask_dc(haar2d_forward_exact(x, w)).decoded(), w);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i] - mean).epsilon(1e-12));

  DenseTensor zero_mean = x;
  for (std::size_t i = 0; i < x.size(); ++i) zero_mean[i] -= mean;
  const DenseTensor h = haar2d_forward_exact(zero_mean, w).decoded();
  const DenseTensor hm = mask_dc(haar2d_forward_exact(zero_mean, w)).decoded();
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(h[i] - hm[i]) < 1e-12);
}

TEST_CASE("center padding to a power of two") {
  CHECK(is_power_of_two(1));
  CHECK(!is_power_of_two(0));
  CHECK(!is_power_of_two(12));
  CHECK(next_power_of_two(28) == 32);
  DenseTensor x({1, 3, 2});
  x.fill(1.0);
  const DenseTensor p = center_pad_pow2(x);
  REQUIRE(p.shape() == Shape{1, 4, 4});
  double sum = 0.0;
  for (Real v : p.data()) sum += v;
  CHECK(sum == 6.0);
}
