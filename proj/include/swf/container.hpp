#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "swf/tensor.hpp"

namespace swf {

enum class DType { f32, f64, i8 };

std::string to_string(DType d);

/// Named tensors stored as one file:
///
///   "SWFT" | u32 version | u64 header_bytes | JSON header | value blob
///
/// All integers and values are little-endian. The header lists, per tensor,
/// name, shape, dtype ("f32", "f64" or "i8"), polarity (spike tensors only),
/// and the byte offset/length of its values within the blob. Spike tensors
/// are always stored as i8.
class TensorContainer {
 public:
  void add(const std::string& name, const DenseTensor& t, DType dtype = DType::f32);
  void add(const std::string& name, const SpikeTensor& t);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::vector<std::string> names() const;
  DType dtype(const std::string& name) const;

  /// Dense view; spike entries are converted to reals.
  DenseTensor dense(const std::string& name) const;
  SpikeTensor spikes(const std::string& name) const;

  std::vector<std::uint8_t> to_bytes() const;
  static TensorContainer from_bytes(const std::vector<std::uint8_t>& bytes);

  void write(const std::filesystem::path& path) const;
  static TensorContainer read(const std::filesystem::path& path);

 private:
  struct Entry {
    DType dtype;
    std::variant<DenseTensor, SpikeTensor> tensor;
  };
  const Entry& entry(const std::string& name) const;

  // Ordered by name so serialization is deterministic.
  std::map<std::string, Entry> entries_;
};

}  // namespace swf
