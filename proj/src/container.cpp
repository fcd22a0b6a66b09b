#include "swf/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "swf/errors.hpp"

namespace swf {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'W', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::vector<std::uint8_t>& in, std::size_t at) {
  if (at + sizeof(U) > in.size())
    throw FormatError("tensor container truncated at offset " + std::to_string(at));
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[at + i]) << (8 * i);
  return v;
}

DType dtype_from_string(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  if (s == "i8") return DType::i8;
  throw FormatError("unknown dtype '" + s + "'");
}

std::size_t dtype_bytes(DType d) { return d == DType::f32 ? 4 : d == DType::f64 ? 8 : 1; }

}  // namespace

std::string to_string(DType d) { return d == DType::f32 ? "f32" : d == DType::f64 ? "f64" : "i8"; }

void TensorContainer::add(const std::string& name, const DenseTensor& t, DType dtype) {
  if (dtype == DType::i8) throw ConfigError("dense tensors are stored as f32 or f64");
  if (!t.all_finite()) throw DomainError("tensor '" + name + "' holds non-finite values");
  entries_.insert_or_assign(name, Entry{dtype, t});
}

void TensorContainer::add(const std::string& name, const SpikeTensor& t) {
  entries_.insert_or_assign(name, Entry{DType::i8, t});
}

std::vector<std::string> TensorContainer::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

const TensorContainer::Entry& TensorContainer::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw PreconditionError("no tensor named '" + name + "' in container");
  return it->second;
}

DType TensorContainer::dtype(const std::string& name) const { return entry(name).dtype; }

DenseTensor TensorContainer::dense(const std::string& name) const {
  const auto& e = entry(name);
  if (auto* s = std::get_if<SpikeTensor>(&e.tensor)) return s->to_dense();
  return std::get<DenseTensor>(e.tensor);
}

SpikeTensor TensorContainer::spikes(const std::string& name) const {
  const auto& e = entry(name);
  if (auto* s = std::get_if<SpikeTensor>(&e.tensor)) return *s;
  throw PreconditionError("tensor '" + name + "' is not a spike tensor");
}

std::vector<std::uint8_t> TensorContainer::to_bytes() const {
  json header;
  header["tensors"] = json::array();
  std::vector<std::uint8_t> blob;
  for (const auto& [name, e] : entries_) {
    json item;
    item["name"] = name;
    item["dtype"] = to_string(e.dtype);
    const std::size_t offset = blob.size();
    if (const auto* s = std::get_if<SpikeTensor>(&e.tensor)) {
      item["shape"] = s->shape();
      item["polarity"] = to_string(s->polarity());
      for (auto v : s->values()) blob.push_back(static_cast<std::uint8_t>(v));
    } else {
      const auto& d = std::get<DenseTensor>(e.tensor);
      item["shape"] = d.shape();
      item["polarity"] = nullptr;
      for (Real v : d.data()) {
        if (e.dtype == DType::f32) put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else put_le(blob, std::bit_cast<std::uint64_t>(v));
      }
    }
    item["offset"] = offset;
    item["nbytes"] = blob.size() - offset;
    header["tensors"].push_back(item);
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

TensorContainer TensorContainer::from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a tensor container (bad magic at offset 0)");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kVersion) throw FormatError("unsupported container version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (16 + header_len > bytes.size()) throw FormatError("container header truncated at offset 16");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("container header is not valid JSON: ") + e.what());
  }
  const std::size_t blob_at = 16 + header_len;
  TensorContainer c;
  for (const auto& item : header.at("tensors")) {
    const std::string name = item.at("name");
    const DType dtype = dtype_from_string(item.at("dtype"));
    const Shape shape = item.at("shape").get<Shape>();
    const std::size_t offset = item.at("offset");
    const std::size_t nbytes = item.at("nbytes");
    const std::size_t count = shape_size(shape);
    if (count * dtype_bytes(dtype) != nbytes)
      throw FormatError("tensor '" + name + "' byte length disagrees with its shape");
    if (blob_at + offset + nbytes > bytes.size())
      throw FormatError("tensor '" + name + "' truncated at offset " + std::to_string(blob_at + offset));
    const std::size_t base = blob_at + offset;
    if (dtype == DType::i8) {
      std::vector<std::int8_t> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<std::int8_t>(bytes[base + i]);
      const auto& pol = item.at("polarity");
      c.add(name, SpikeTensor(shape, std::move(v), polarity_from_string(pol.get<std::string>())));
    } else {
      std::vector<Real> v(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (dtype == DType::f32)
          v[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, base + 4 * i));
        else
          v[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, base + 8 * i));
      }
      c.add(name, DenseTensor(shape, std::move(v)), dtype);
    }
  }
  return c;
}

void TensorContainer::write(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

TensorContainer TensorContainer::read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

}  // namespace swf
