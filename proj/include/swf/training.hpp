#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swf/config.hpp"
#include "swf/data.hpp"
#include "swf/model.hpp"

namespace swf {

struct EpochRow {
  std::size_t epoch = 0;
  std::string split;  ///< train, val or test
  Real loss = 0.0;
  Real accuracy = 0.0;
};

struct RunRecord {
  std::vector<EpochRow> rows;
  Real test_accuracy = 0.0;
  Real test_loss = 0.0;
  nlohmann::json config;
  /// Wall-clock seconds; kept out of the CSV/JSON exports so that seeded
  /// runs produce identical records.
  double wall_seconds = 0.0;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  /// Writes record.csv, record.json and timing.json.
  void write(const std::filesystem::path& dir) const;
};

struct EvalResult {
  Real loss = 0.0;
  Real accuracy = 0.0;
};

/// Called after every epoch with that epoch's training row; return false to
/// stop early.
using EpochCallback = std::function<bool(const EpochRow&, SWformer&)>;
using LogFn = std::function<void(const std::string&)>;

struct TrainResult {
  SWformer model;
  RunRecord record;
};

/// Mean cross-entropy of logits [B, K]; writes d loss / d logits to `grad`
/// when given.
Real cross_entropy(const DenseTensor& logits, const std::vector<int>& labels, DenseTensor* grad = nullptr);

/// Stacks the indexed split items into model input
/// [T, B, C, H, W]. Static images are replicated over time.
DenseTensor make_batch(const Split& split, const std::vector<std::size_t>& indices, std::size_t timesteps);

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data,
                  const EpochCallback& on_epoch = {}, const LogFn& log = {});

/// Top-1 accuracy and mean loss with batch-norm running statistics. Does not
/// modify parameters or running statistics.
EvalResult evaluate(SWformer& model, const Split& split, std::size_t batch_size = 64);

struct AblationRow {
  std::string label;  ///< "base" or the flag name
  RunRecord record;
};

/// One run for the base configuration and one per flag.
std::vector<AblationRow> run_ablation_suite(const ModelConfig& base, const std::vector<std::string>& flags,
                                            const TrainConfig& train_cfg, const Dataset& data,
                                            const LogFn& log = {});
/// label,test_accuracy,test_loss,final_train_loss,final_train_acc
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace swf
