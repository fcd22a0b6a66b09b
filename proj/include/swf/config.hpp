#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "swf/model.hpp"

namespace swf {

enum class OptimizerKind { sgd_momentum, adamw };
enum class Schedule { cosine, constant };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  Real learning_rate = 1e-3;
  Real weight_decay = 1e-2;
  OptimizerKind optimizer = OptimizerKind::adamw;
  Real momentum = 0.9;
  Schedule schedule = Schedule::cosine;
  std::uint64_t seed = 0;
  /// Pad-2 random crop and horizontal flip, static images only.
  bool augment_crop = false;
  bool augment_flip = false;
};

/// Where examples come from. Kinds: "idx" (MNIST-style file pairs), "cifar"
/// (CIFAR-10 binary batches), "moving_edge" (synthetic event clips) and
/// "events_csv" (one `t_us,x,y,polarity` file per clip, listed in an index).
struct DataConfig {
  std::string kind = "idx";
  std::string train_images, train_labels, test_images, test_labels;
  std::vector<std::string> train_files;
  std::string test_file;
  std::string events_index;
  /// Keep at most this many examples per split (0 keeps all).
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  /// Fraction of the training split held out for validation.
  Real val_fraction = 0.0;
  /// Static images are center-padded to a power of two and average-pooled
  /// down to this side (0 keeps the native size).
  std::size_t image_side = 0;
  /// Synthetic/event clips.
  std::size_t synthetic_count = 200;
  std::uint64_t window_us = 1000;
};

struct AnalysisConfig {
  Real e_mac_pj = 4.6;
  Real e_ac_pj = 0.9;
  Real band_lo = 0.5;
  Real band_hi = 1.0;
  std::size_t samples = 64;
  std::string layer;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  AnalysisConfig analysis;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies `key=value`. `key` is either "section.field" or a bare field name
/// that occurs in exactly one section. Values are parsed as JSON when
/// possible and otherwise taken as strings; the type must match the field.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace swf
