#include "swf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "swf/errors.hpp"

namespace swf {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

DenseTensor::DenseTensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

DenseTensor::DenseTensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != data_.size())
    throw DimensionError("tensor of shape " + shape_string(shape_) + " given " +
                         std::to_string(data_.size()) + " values");
  if (!all_finite()) throw DomainError("tensor values must be finite");
}

std::size_t DenseTensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size())
    throw DimensionError("index rank " + std::to_string(index.size()) + " for tensor " +
                         shape_string(shape_));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw DimensionError("index out of range on axis " + std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Real& DenseTensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
Real DenseTensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

DenseTensor DenseTensor::reshaped(Shape shape) const {
  DenseTensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void DenseTensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

void DenseTensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

std::string to_string(Polarity p) { return p == Polarity::binary ? "binary" : "ternary"; }

Polarity polarity_from_string(const std::string& s) {
  if (s == "binary") return Polarity::binary;
  if (s == "ternary") return Polarity::ternary;
  throw ConfigError("unknown polarity '" + s + "'");
}

namespace {
void check_spike(std::int8_t v, Polarity p) {
  if (v < -1 || v > 1) throw DomainError("spike value " + std::to_string(int(v)) + " outside {-1, 0, +1}");
  if (v == -1 && p == Polarity::binary) throw DomainError("binary spike tensor cannot hold -1");
}
}  // namespace

SpikeTensor::SpikeTensor(Shape shape, Polarity polarity)
    : shape_(std::move(shape)), values_(shape_size(shape_), 0), polarity_(polarity) {}

SpikeTensor::SpikeTensor(Shape shape, std::vector<std::int8_t> values, Polarity polarity)
    : shape_(std::move(shape)), values_(std::move(values)), polarity_(polarity) {
  if (shape_size(shape_) != values_.size())
    throw DimensionError("spike tensor of shape " + shape_string(shape_) + " given " +
                         std::to_string(values_.size()) + " values");
  for (auto v : values_) check_spike(v, polarity_);
}

SpikeTensor SpikeTensor::from_dense(const DenseTensor& t, Polarity polarity) {
  std::vector<std::int8_t> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Real x = t[i];
    if (x == 1.0) v[i] = 1;
    else if (x == 0.0) v[i] = 0;
    else if (x == -1.0) v[i] = -1;
    else throw DomainError("value " + std::to_string(x) + " is not a spike");
  }
  return SpikeTensor(t.shape(), std::move(v), polarity);
}

void SpikeTensor::set(std::size_t i, std::int8_t v) {
  check_spike(v, polarity_);
  values_.at(i) = v;
}

std::size_t SpikeTensor::step_size() const { return shape_.empty() ? 0 : values_.size() / shape_[0]; }

std::span<const std::int8_t> SpikeTensor::step(std::size_t t) const {
  const std::size_t n = step_size();
  return std::span<const std::int8_t>(values_).subspan(t * n, n);
}

std::size_t SpikeTensor::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](auto v) { return v != 0; }));
}

DenseTensor SpikeTensor::to_dense() const {
  DenseTensor out(shape_);
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i];
  return out;
}

SpikeTensor SpikeTensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  SpikeTensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

}  // namespace swf
