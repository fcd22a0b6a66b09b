#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "swf/container.hpp"
#include "swf/errors.hpp"
#include "swf/tensor.hpp"

using namespace swf;

TEST_CASE("dense tensor construction is checked") {
  CHECK_THROWS_AS(DenseTensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(DenseTensor({1}, std::vector<double>{std::numeric_limits<double>::quiet_NaN()}), DomainError);
  DenseTensor t({2, 3});
  t.at({1, 2}) = 4.0;
  CHECK(t[5] == 4.0);
  CHECK_THROWS_AS(t.at({2, 0}), DimensionError);
  CHECK_THROWS_AS(t.reshaped({4}), DimensionError);
}

TEST_CASE("spike tensors hold only their alphabet") {
  CHECK_THROWS_AS(SpikeTensor({2}, {1, -1}, Polarity::binary), DomainError);
  CHECK_THROWS_AS(SpikeTensor({1}, {2}, Polarity::ternary), DomainError);
  CHECK_THROWS_AS(SpikeTensor::from_dense(DenseTensor({1}, {0.5}), Polarity::ternary), DomainError);
  const SpikeTensor s = SpikeTensor::from_dense(DenseTensor({2, 2}, {1, 0, -1, 1}), Polarity::ternary);
  CHECK(s.count_nonzero() == 3);
  CHECK(s.step(1)[0] == -1);
}

TEST_CASE("container round trip") {
  TensorContainer c;
  const DenseTensor w({2, 2}, {0.1, -2.5, 1.0 / 3.0, 7.0});
  c.add("w64", w, DType::f64);
  c.add("w32", w, DType::f32);
  c.add("s", SpikeTensor({3}, {1, 0, -1}, Polarity::ternary));
  const TensorContainer back = TensorContainer::from_bytes(c.to_bytes());
  CHECK(back.dense("w64") == w);
  CHECK(back.dense("w32")[2] == static_cast<double>(static_cast<float>(1.0 / 3.0)));
  CHECK(back.spikes("s") == SpikeTensor({3}, {1, 0, -1}, Polarity::ternary));
  CHECK(back.to_bytes() == c.to_bytes());
  CHECK_THROWS_AS(back.dense("missing"), PreconditionError);
}

TEST_CASE("container rejects damaged bytes") {
  TensorContainer c;
  c.add("w", DenseTensor({4}, {1, 2, 3, 4}), DType::f64);
  auto bytes = c.to_bytes();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(TensorContainer::from_bytes(bad_magic), FormatError);
  bytes.resize(bytes.size() - 8);
  CHECK_THROWS_AS(TensorContainer::from_bytes(bytes), FormatError);
  CHECK_THROWS_AS(TensorContainer::read("/nonexistent/file.swft"), FormatError);
}
