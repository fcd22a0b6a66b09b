#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace swf {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major real tensor. Holds membrane potentials, currents and weights.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, Real fill = 0.0);
  /// Throws DimensionError when the value count disagrees with the shape and
  /// DomainError on NaN/Inf.
  DenseTensor(Shape shape, std::vector<Real> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::initializer_list<std::size_t> index);
  Real at(std::initializer_list<std::size_t> index) const;

  /// Same data, new shape with the same element count.
  DenseTensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  void fill(Real value);
  bool all_finite() const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<Real> data_;
};

enum class Polarity { binary, ternary };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

/// Spike-valued tensor, leading axis is time by convention. Entries are
/// restricted to {-1, 0, +1}; binary tensors additionally exclude -1.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  SpikeTensor(Shape shape, Polarity polarity);
  /// Validates every entry against the polarity's alphabet.
  SpikeTensor(Shape shape, std::vector<std::int8_t> values, Polarity polarity);

  /// Exact conversion; throws DomainError for any value outside the alphabet.
  static SpikeTensor from_dense(const DenseTensor& t, Polarity polarity);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  Polarity polarity() const { return polarity_; }
  std::span<const std::int8_t> values() const { return values_; }

  std::int8_t operator[](std::size_t i) const { return values_[i]; }
  /// Checked write.
  void set(std::size_t i, std::int8_t v);

  /// Contiguous slice of the leading axis.
  std::span<const std::int8_t> step(std::size_t t) const;
  std::size_t step_size() const;

  std::size_t count_nonzero() const;
  DenseTensor to_dense() const;
  SpikeTensor reshaped(Shape shape) const;

  friend bool operator==(const SpikeTensor&, const SpikeTensor&) = default;

 private:
  Shape shape_;
  std::vector<std::int8_t> values_;
  Polarity polarity_ = Polarity::binary;
};

}  // namespace swf
