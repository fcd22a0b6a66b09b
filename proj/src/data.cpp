#include "swf/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "swf/errors.hpp"
#include "swf/wavelet.hpp"

namespace swf {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const std::filesystem::path& path) {
  if (at + 4 > b.size()) throw FormatError(path.string() + ": truncated header at offset " + std::to_string(at));
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

}  // namespace

void Split::push(DenseTensor x, int label) {
  inputs.push_back(std::move(x));
  labels.push_back(label);
}

void Split::truncate(std::size_t n) {
  if (n >= inputs.size()) return;
  inputs.resize(n);
  labels.resize(n);
}

void Dataset::validate() const {
  for (const Split* s : {&train, &val, &test}) {
    if (s->inputs.size() != s->labels.size()) throw FormatError(name + ": inputs and labels differ in count");
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (s->labels[i] < 0 || static_cast<std::size_t>(s->labels[i]) >= num_classes)
        throw FormatError(name + ": label " + std::to_string(s->labels[i]) + " at index " + std::to_string(i) +
                          " is outside [0, " + std::to_string(num_classes) + ")");
      if (s->inputs[i].shape() != s->inputs[0].shape()) throw FormatError(name + ": inconsistent input shapes");
    }
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_bytes(images);
  const auto lb = read_bytes(labels);
  if (be32(ib, 0, images) != 0x00000803)
    throw FormatError(images.string() + ": bad magic at offset 0 (expected 0x00000803 for u8 images)");
  if (be32(lb, 0, labels) != 0x00000801)
    throw FormatError(labels.string() + ": bad magic at offset 0 (expected 0x00000801 for u8 labels)");
  const std::size_t n = be32(ib, 4, images), rows = be32(ib, 8, images), cols = be32(ib, 12, images);
  const std::size_t nl = be32(lb, 4, labels);
  if (n != nl)
    throw FormatError(images.string() + " holds " + std::to_string(n) + " images but " + labels.string() + " holds " +
                      std::to_string(nl) + " labels");
  const std::size_t plane = rows * cols;
  if (ib.size() < 16 + n * plane)
    throw FormatError(images.string() + ": truncated at offset " + std::to_string(ib.size()) + ", expected " +
                      std::to_string(16 + n * plane) + " bytes");
  if (lb.size() < 8 + n)
    throw FormatError(labels.string() + ": truncated at offset " + std::to_string(lb.size()) + ", expected " +
                      std::to_string(8 + n) + " bytes");
  Dataset d;
  d.name = images.filename().string();
  for (std::size_t i = 0; i < n; ++i) {
    DenseTensor x({1, rows, cols});
    for (std::size_t p = 0; p < plane; ++p) x[p] = ib[16 + i * plane + p] / 255.0;
    d.train.push(std::move(x), lb[8 + i]);
  }
  int max_label = 9;
  for (int l : d.train.labels) max_label = std::max(max_label, l);
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

Dataset load_cifar_binary(const std::filesystem::path& path) {
  constexpr std::size_t kRecord = 3073;
  const auto b = read_bytes(path);
  if (b.size() % kRecord != 0)
    throw FormatError(path.string() + ": size " + std::to_string(b.size()) + " is not a multiple of 3073 (record " +
                      std::to_string(b.size() / kRecord) + " truncated at offset " +
                      std::to_string(b.size() / kRecord * kRecord) + ")");
  Dataset d;
  d.name = path.filename().string();
  d.num_classes = 10;
  for (std::size_t r = 0; r < b.size() / kRecord; ++r) {
    const std::size_t at = r * kRecord;
    if (b[at] >= 10)
      throw FormatError(path.string() + ": label " + std::to_string(b[at]) + " out of range at offset " +
                        std::to_string(at));
    DenseTensor x({3, 32, 32});
    for (std::size_t p = 0; p < 3072; ++p) x[p] = b[at + 1 + p] / 255.0;
    d.train.push(std::move(x), b[at]);
  }
  return d;
}

DenseTensor replicate_static(const DenseTensor& image, std::size_t timesteps) {
  if (timesteps == 0) throw DomainError("replicate_static needs T >= 1");
  Shape shape{timesteps};
  shape.insert(shape.end(), image.shape().begin(), image.shape().end());
  DenseTensor out(shape);
  for (std::size_t t = 0; t < timesteps; ++t)
    std::copy(image.data().begin(), image.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(t * image.size()));
  return out;
}

EventFrameClip bin_events(const std::vector<Event>& events, std::size_t timesteps, std::size_t height,
                          std::size_t width, std::uint64_t window_us) {
  if (timesteps == 0 || window_us == 0) throw DomainError("bin_events needs T >= 1 and a positive window");
  EventFrameClip clip{SpikeTensor({timesteps, 2, height, width}, Polarity::binary), 0};
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const std::string where = "event " + std::to_string(i) + " (t=" + std::to_string(e.t_us) +
                              ", x=" + std::to_string(e.x) + ", y=" + std::to_string(e.y) +
                              ", p=" + std::to_string(e.polarity) + ")";
    if (e.x < 0 || e.y < 0 || static_cast<std::size_t>(e.x) >= width || static_cast<std::size_t>(e.y) >= height)
      throw FormatError(where + " lies outside the " + std::to_string(height) + "x" + std::to_string(width) + " sensor");
    if (e.polarity != 1 && e.polarity != -1) throw FormatError(where + " has polarity other than +1/-1");
    if (e.t_us < last) throw FormatError(where + " has a decreasing timestamp");
    last = e.t_us;
    const std::uint64_t w = e.t_us / window_us;
    if (w >= timesteps) continue;
    const std::size_t ch = e.polarity > 0 ? 0 : 1;
    clip.frames.set(((w * 2 + ch) * height + static_cast<std::size_t>(e.y)) * width + static_cast<std::size_t>(e.x), 1);
  }
  return clip;
}

std::vector<Event> read_events_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line)) return {};
  if (line.rfind("t_us,x,y,polarity", 0) != 0)
    throw FormatError(path.string() + ": header must be 't_us,x,y,polarity', got '" + line + "'");
  std::vector<Event> out;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream s(line);
    Event e;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(s >> e.t_us >> c1 >> e.x >> c2 >> e.y >> c3 >> e.polarity) || c1 != ',' || c2 != ',' || c3 != ',')
      throw FormatError(path.string() + ": malformed row " + std::to_string(row) + ": '" + line + "'");
    out.push_back(e);
  }
  return out;
}

EventFrameClip synth_moving_edge(std::size_t timesteps, std::size_t height, std::size_t width, double velocity,
                                 std::size_t start, bool leftward) {
  if (velocity < 0.0) throw DomainError("velocity must be >= 0");
  if (width < 3) throw DomainError("moving edge needs width >= 3");
  EventFrameClip clip{SpikeTensor({timesteps, 2, height, width}, Polarity::binary), 0};
  auto column = [&](std::size_t t) {
    const auto shift = static_cast<std::int64_t>(std::floor(velocity * static_cast<double>(t)));
    const std::int64_t w = static_cast<std::int64_t>(width);
    const std::int64_t c = static_cast<std::int64_t>(start) + (leftward ? -shift : shift);
    return static_cast<std::size_t>(((c % w) + w) % w);
  };
  for (std::size_t t = 0; t < timesteps; ++t) {
    const std::size_t left = column(t);
    if (t > 0 && left == column(t - 1)) continue;
    // Bar covers columns left, left+1. Moving right, the leading column is
    // left+1 and the vacated one is left-1; mirrored when moving left.
    const std::size_t lead = leftward ? left : (left + 1) % width;
    const std::size_t trail = leftward ? (left + 2) % width : (left + width - 1) % width;
    for (std::size_t y = 0; y < height; ++y) {
      clip.frames.set(((t * 2 + 0) * height + y) * width + lead, 1);
      clip.frames.set(((t * 2 + 1) * height + y) * width + trail, 1);
    }
  }
  return clip;
}

DenseTensor prepare_image(const DenseTensor& image, std::size_t side) {
  if (image.rank() != 3) throw DimensionError("prepare_image expects [C, H, W]");
  DenseTensor padded = center_pad_pow2(image);
  const std::size_t C = padded.extent(0), S = padded.extent(1);
  if (side == 0 || side == S) return padded;
  if (side > S || S % side != 0)
    throw ConfigError("image side " + std::to_string(side) + " does not divide the padded side " + std::to_string(S));
  const std::size_t f = S / side;
  DenseTensor out({C, side, side});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) {
        Real acc = 0.0;
        for (std::size_t a = 0; a < f; ++a)
          for (std::size_t b = 0; b < f; ++b) acc += padded[(c * S + i * f + a) * S + j * f + b];
        out[(c * side + i) * side + j] = acc / static_cast<Real>(f * f);
      }
  return out;
}

DenseTensor augment(const DenseTensor& image, Rng& rng, bool crop, bool flip) {
  const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);
  std::ptrdiff_t dy = 0, dx = 0;
  if (crop) {
    dy = static_cast<std::ptrdiff_t>(rng.below(5)) - 2;
    dx = static_cast<std::ptrdiff_t>(rng.below(5)) - 2;
  }
  const bool mirror = flip && rng.below(2) == 1;
  DenseTensor out(image.shape());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + dy;
        std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j) + dx;
        if (mirror) sj = static_cast<std::ptrdiff_t>(W) - 1 - sj;
        if (si < 0 || sj < 0 || si >= static_cast<std::ptrdiff_t>(H) || sj >= static_cast<std::ptrdiff_t>(W)) continue;
        out[(c * H + i) * W + j] = image[(c * H + static_cast<std::size_t>(si)) * W + static_cast<std::size_t>(sj)];
      }
  return out;
}

std::vector<DenseTensor> fidelity_suite(std::size_t side) {
  if (!is_power_of_two(side) || side < 4) throw DomainError("fidelity suite side must be a power of two >= 4");
  Rng rng(20240601);
  const HaarMatrix w = haar_matrix_for_side(side);
  std::vector<DenseTensor> out;
  while (out.size() < 20) {
    const std::size_t kind = out.size() % 5;
    const Real hi = rng.uniform(0.6, 1.0), lo = rng.uniform(0.0, 0.25);
    const bool swap = rng.below(2) == 1;
    const Real a = swap ? lo : hi, b = swap ? hi : lo;
    const std::size_t cut = 1 + rng.below(side - 1);
    const std::size_t block = std::size_t{1} << (1 + rng.below(3));
    const bool vertical = rng.below(2) == 1;
    DenseTensor img({side, side});
    std::vector<Real> levels(16);
    for (Real& l : levels) l = rng.uniform();
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) {
        const std::size_t u = vertical ? j : i;
        Real v = 0.0;
        switch (kind) {
          case 0: v = u < cut ? a : b; break;
          case 1: v = ((i / block) + (j / block)) % 2 ? a : b; break;
          case 2: v = a + (b - a) * static_cast<Real>(u) / static_cast<Real>(side - 1); break;
          case 3: v = (u / std::max<std::size_t>(1, block / 2)) % 2 ? a : b; break;
          default: v = levels[(i * 4 / side) * 4 + (j * 4 / side)]; break;
        }
        img[i * side + j] = v;
      }
    const auto coeffs = std::get<DenseTensor>(haar2d_forward_exact(img, w).coeffs);
    bool negative = false;
    for (std::size_t i = 1; i < coeffs.size(); ++i) negative = negative || coeffs[i] < -1e-9;
    if (negative) out.push_back(std::move(img));
  }
  return out;
}

namespace {

void hold_out(Dataset& d, Real fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || d.train.size() < 2) return;
  std::vector<std::size_t> order(d.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed ^ 0x5eed'0f'7a11ULL);
  rng.shuffle(order);
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<Real>(order.size())));
  Split train, val;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? val : train).push(std::move(d.train.inputs[order[i]]), d.train.labels[order[i]]);
  d.train = std::move(train);
  d.val = std::move(val);
}

void prepare_split(Split& s, std::size_t side) {
  for (auto& x : s.inputs) x = prepare_image(x, side);
}

Split moving_edge_split(std::size_t count, std::size_t T, std::size_t side, Rng& rng) {
  // Four classes: rightward slow, rightward fast, leftward slow, leftward fast.
  Split s;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 4);
    const bool leftward = label >= 2;
    const double velocity = label % 2 == 0 ? 1.0 : 2.0;
    auto clip = synth_moving_edge(T, side, side, velocity, rng.below(side), leftward);
    DenseTensor frames = clip.frames.to_dense();
    // Sparse background noise keeps the task from being a lookup.
    for (Real& v : frames.data())
      if (rng.uniform() < 0.01) v = 1.0;
    s.push(std::move(frames), label);
  }
  return s;
}

}  // namespace

Dataset load_dataset(const DataConfig& cfg, std::size_t timesteps, std::uint64_t seed) {
  Dataset d;
  if (cfg.kind == "idx") {
    d = load_idx(cfg.train_images, cfg.train_labels);
    Dataset test = load_idx(cfg.test_images, cfg.test_labels);
    d.test = std::move(test.train);
    d.num_classes = std::max(d.num_classes, test.num_classes);
  } else if (cfg.kind == "cifar") {
    d.name = "cifar10";
    for (const auto& f : cfg.train_files) {
      Dataset part = load_cifar_binary(f);
      for (std::size_t i = 0; i < part.train.size(); ++i) d.train.push(std::move(part.train.inputs[i]), part.train.labels[i]);
    }
    d.test = load_cifar_binary(cfg.test_file).train;
  } else if (cfg.kind == "moving_edge") {
    d.name = "moving_edge";
    d.kind = InputKind::event_frames;
    d.num_classes = 4;
    const std::size_t side = cfg.image_side == 0 ? 16 : cfg.image_side;
    Rng rng(seed ^ 0xed9e'0000ULL);
    d.train = moving_edge_split(cfg.synthetic_count, timesteps, side, rng);
    d.test = moving_edge_split(std::max<std::size_t>(4, cfg.synthetic_count / 4), timesteps, side, rng);
  } else if (cfg.kind == "events_csv") {
    // Index rows `path,label,split` with split in {train, test}.
    d.name = "events";
    d.kind = InputKind::event_frames;
    std::ifstream f(cfg.events_index);
    if (!f) throw FormatError("cannot open events index " + cfg.events_index);
    std::string line;
    std::getline(f, line);
    int max_label = 0;
    const auto base = std::filesystem::path(cfg.events_index).parent_path();
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::istringstream s(line);
      std::string path, label, split;
      if (!std::getline(s, path, ',') || !std::getline(s, label, ',') || !std::getline(s, split))
        throw FormatError(cfg.events_index + ": malformed row '" + line + "'");
      const auto events = read_events_csv(base / path);
      const std::size_t side = cfg.image_side == 0 ? 16 : cfg.image_side;
      EventFrameClip clip = bin_events(events, timesteps, side, side, cfg.window_us);
      const int l = std::stoi(label);
      max_label = std::max(max_label, l);
      (split == "test" ? d.test : d.train).push(clip.frames.to_dense(), l);
    }
    d.num_classes = static_cast<std::size_t>(max_label) + 1;
  } else {
    throw ConfigError("unknown data kind '" + cfg.kind + "' (expected idx, cifar, moving_edge or events_csv)");
  }
  if (cfg.train_limit > 0) d.train.truncate(cfg.train_limit);
  if (cfg.test_limit > 0) d.test.truncate(cfg.test_limit);
  if (d.kind == InputKind::static_image) {
    prepare_split(d.train, cfg.image_side);
    prepare_split(d.test, cfg.image_side);
  }
  hold_out(d, cfg.val_fraction, seed);
  d.validate();
  return d;
}

}  // namespace swf
