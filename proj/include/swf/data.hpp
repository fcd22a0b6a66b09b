#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swf/config.hpp"
#include "swf/random.hpp"
#include "swf/tensor.hpp"

namespace swf {

enum class InputKind { static_image, event_frames };

/// Inputs are [C, H, W] static images in [0, 1] or [T, 2, H, W] event
/// frames in {0, 1}.
struct Split {
  std::vector<DenseTensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  void push(DenseTensor x, int label);
  /// Keeps the first n examples.
  void truncate(std::size_t n);
};

struct Dataset {
  std::string name;
  InputKind kind = InputKind::static_image;
  std::size_t num_classes = 10;
  Split train, val, test;

  /// Throws FormatError on labels outside [0, num_classes) or inconsistent
  /// input shapes.
  void validate() const;
};

struct EventFrameClip {
  SpikeTensor frames;  ///< [T, 2, H, W], channel 0 = ON, channel 1 = OFF
  int label = 0;
};

struct Event {
  std::uint64_t t_us = 0;
  std::int64_t x = 0, y = 0;
  int polarity = 1;  ///< +1 or -1
};

/// MNIST-style IDX pair (u8 images, u8 labels). Items land in the train
/// split; pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
/// CIFAR-10 binary batch: 1 label byte + 3072 pixel bytes per record.
Dataset load_cifar_binary(const std::filesystem::path& path);

/// [C, H, W] -> [T, C, H, W], identical copies along time.
DenseTensor replicate_static(const DenseTensor& image, std::size_t timesteps);

/// Events fall into window floor(t_us / window_us); windows at or beyond T
/// are dropped. Presence per pixel and polarity is clipped to 1.
EventFrameClip bin_events(const std::vector<Event>& events, std::size_t timesteps, std::size_t height,
                          std::size_t width, std::uint64_t window_us);
/// Reads a `t_us,x,y,polarity` CSV with a header row.
std::vector<Event> read_events_csv(const std::filesystem::path& path);

/// A bright bar two pixels wide whose left column starts at `start` and moves
/// by floor(velocity * t) columns (leftwards when `leftward`), wrapping
/// around. Frame 0 and every frame where the bar moved hold ON events on the
/// leading column and OFF events on the trailing column (2 * H events).
EventFrameClip synth_moving_edge(std::size_t timesteps, std::size_t height, std::size_t width, double velocity,
                                 std::size_t start = 0, bool leftward = false);

/// Center-pads [C, H, W] to a power-of-two square, then average-pools to
/// `side` (side must divide the padded size). side == 0 only pads.
DenseTensor prepare_image(const DenseTensor& image, std::size_t side);

/// Pad-2 random crop and optional horizontal flip of [C, H, W].
DenseTensor augment(const DenseTensor& image, Rng& rng, bool crop, bool flip);

/// 20 deterministic side x side images in [0, 1] (edges, checkerboards,
/// ramps, stripes, random blocks), each with negative detail coefficients.
std::vector<DenseTensor> fidelity_suite(std::size_t side = 16);

/// Builds train/val/test per the data config. `timesteps` sizes event clips.
Dataset load_dataset(const DataConfig& cfg, std::size_t timesteps, std::uint64_t seed);

}  // namespace swf
