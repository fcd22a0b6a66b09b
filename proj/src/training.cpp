#include "swf/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "swf/errors.hpp"

namespace swf {

using nlohmann::json;

namespace {

std::string fmt(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::vector<Param*> params) : cfg_(cfg), params_(std::move(params)) {
    for (Param* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step(Real lr) {
    ++t_;
    const Real b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const Real c1 = 1.0 - std::pow(b1, static_cast<Real>(t_));
    const Real c2 = 1.0 - std::pow(b2, static_cast<Real>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param& p = *params_[k];
      const Real decay = p.decay ? lr * cfg_.weight_decay : 0.0;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const Real g = p.grad[i];
        if (decay != 0.0) p.value[i] -= decay * p.value[i];
        if (cfg_.optimizer == OptimizerKind::adamw) {
          m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g;
          v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g * g;
          p.value[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps);
        } else {
          m_[k][i] = cfg_.momentum * m_[k][i] + g;
          p.value[i] -= lr * m_[k][i];
        }
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Param*> params_;
  std::vector<DenseTensor> m_, v_;
  std::size_t t_ = 0;
};

std::size_t argmax_row(const DenseTensor& logits, std::size_t b) {
  const std::size_t K = logits.extent(1);
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (logits[b * K + k] > logits[b * K + best]) best = k;
  return best;
}

}  // namespace

Real cross_entropy(const DenseTensor& logits, const std::vector<int>& labels, DenseTensor* grad) {
  const std::size_t B = logits.extent(0), K = logits.extent(1);
  if (labels.size() != B) throw DimensionError("cross_entropy: label count differs from batch size");
  if (grad) *grad = DenseTensor(logits.shape());
  Real loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    Real mx = logits[b * K];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits[b * K + k]);
    Real z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[b * K + k] - mx);
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= K)
      throw DomainError("cross_entropy: label " + std::to_string(labels[b]) + " outside [0, " + std::to_string(K) + ")");
    const auto y = static_cast<std::size_t>(labels[b]);
    loss += std::log(z) + mx - logits[b * K + y];
    if (grad)
      for (std::size_t k = 0; k < K; ++k)
        (*grad)[b * K + k] = (std::exp(logits[b * K + k] - mx) / z - (k == y ? 1.0 : 0.0)) / static_cast<Real>(B);
  }
  return loss / static_cast<Real>(B);
}

DenseTensor make_batch(const Split& split, const std::vector<std::size_t>& indices, std::size_t timesteps) {
  if (indices.empty()) throw DimensionError("empty batch");
  const DenseTensor& first = split.inputs.at(indices[0]);
  const bool clip = first.rank() == 4;
  const std::size_t B = indices.size();
  if (clip && first.extent(0) != timesteps)
    throw DimensionError("event clip has " + std::to_string(first.extent(0)) + " frames, model expects T=" +
                         std::to_string(timesteps));
  const Shape item(first.shape().begin() + (clip ? 1 : 0), first.shape().end());
  const std::size_t n = shape_size(item);
  DenseTensor out({timesteps, B, item[0], item[1], item[2]});
  for (std::size_t b = 0; b < B; ++b) {
    const DenseTensor& x = split.inputs.at(indices[b]);
    if (x.shape() != first.shape()) throw DimensionError("inconsistent input shapes in batch");
    for (std::size_t t = 0; t < timesteps; ++t)
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(clip ? t * n : 0), n,
                  out.data().begin() + static_cast<std::ptrdiff_t>((t * B + b) * n));
  }
  return out;
}

EvalResult evaluate(SWformer& model, const Split& split, std::size_t batch_size) {
  EvalResult r;
  if (split.size() == 0) return r;
  std::size_t correct = 0;
  Real loss = 0.0;
  for (std::size_t at = 0; at < split.size(); at += batch_size) {
    std::vector<std::size_t> idx;
    std::vector<int> labels;
    for (std::size_t i = at; i < std::min(split.size(), at + batch_size); ++i) {
      idx.push_back(i);
      labels.push_back(split.labels[i]);
    }
    const DenseTensor logits = model.forward(make_batch(split, idx, model.config().timesteps), false);
    loss += cross_entropy(logits, labels) * static_cast<Real>(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b)
      if (argmax_row(logits, b) == static_cast<std::size_t>(labels[b])) ++correct;
  }
  r.loss = loss / static_cast<Real>(split.size());
  r.accuracy = static_cast<Real>(correct) / static_cast<Real>(split.size());
  return r;
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& data,
                  const EpochCallback& on_epoch, const LogFn& log) {
  const auto started = std::chrono::steady_clock::now();
  if (data.num_classes != model_cfg.num_classes)
    throw ConfigError("dataset has " + std::to_string(data.num_classes) + " classes, model.num_classes is " +
                      std::to_string(model_cfg.num_classes));
  TrainResult result{SWformer(model_cfg, cfg.seed), {}};
  SWformer& model = result.model;
  RunRecord& rec = result.record;
  rec.config = {{"model", model_config_to_json(model_cfg)}};

  Optimizer opt(cfg, model.params());
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
  const std::size_t n = data.train.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = std::max<std::size_t>(1, steps_per_epoch * cfg.epochs);
  std::size_t step = 0;
  const bool augmenting = data.kind == InputKind::static_image && (cfg.augment_crop || cfg.augment_flip);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && n > 0; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Real loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < n; at += cfg.batch_size) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(at),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, at + cfg.batch_size)));
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(data.train.labels[i]);
      DenseTensor batch;
      if (augmenting) {
        Split aug;
        for (std::size_t i : idx) aug.push(augment(data.train.inputs[i], rng, cfg.augment_crop, cfg.augment_flip), 0);
        std::vector<std::size_t> local(idx.size());
        for (std::size_t i = 0; i < local.size(); ++i) local[i] = i;
        batch = make_batch(aug, local, model_cfg.timesteps);
      } else {
        batch = make_batch(data.train, idx, model_cfg.timesteps);
      }
      model.zero_grad();
      const DenseTensor logits = model.forward(batch, true);
      DenseTensor grad;
      const Real loss = cross_entropy(logits, labels, &grad);
      if (!std::isfinite(loss))
        throw DivergenceError("loss became " + fmt(loss) + " at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + " (try a lower learning rate)");
      model.backward(grad);
      const Real lr = cfg.schedule == Schedule::cosine
                          ? 0.5 * cfg.learning_rate *
                                (1.0 + std::cos(std::numbers::pi * static_cast<Real>(step) / static_cast<Real>(total_steps)))
                          : cfg.learning_rate;
      opt.step(lr);
      ++step;
      loss_sum += loss * static_cast<Real>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b)
        if (argmax_row(logits, b) == static_cast<std::size_t>(labels[b])) ++correct;
    }
    EpochRow row{epoch, "train", loss_sum / static_cast<Real>(n), static_cast<Real>(correct) / static_cast<Real>(n)};
    rec.rows.push_back(row);
    std::string line = "epoch " + std::to_string(epoch) + " train loss " + fmt(row.loss) + " acc " + fmt(row.accuracy);
    if (data.val.size() > 0) {
      const EvalResult v = evaluate(model, data.val);
      rec.rows.push_back({epoch, "val", v.loss, v.accuracy});
      line += " | val loss " + fmt(v.loss) + " acc " + fmt(v.accuracy);
    }
    if (log) log(line);
    if (on_epoch && !on_epoch(row, model)) break;
  }
  if (data.test.size() > 0) {
    const EvalResult t = evaluate(model, data.test);
    rec.test_accuracy = t.accuracy;
    rec.test_loss = t.loss;
    const std::size_t last = rec.rows.empty() ? 0 : rec.rows.back().epoch;
    rec.rows.push_back({last, "test", t.loss, t.accuracy});
    if (log) log("test loss " + fmt(t.loss) + " acc " + fmt(t.accuracy));
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string RunRecord::to_csv() const {
  std::string out = "epoch,split,loss,acc\n";
  for (const auto& r : rows) out += std::to_string(r.epoch) + "," + r.split + "," + fmt(r.loss) + "," + fmt(r.accuracy) + "\n";
  return out;
}

json RunRecord::to_json() const {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back({{"epoch", r.epoch}, {"split", r.split}, {"loss", r.loss}, {"acc", r.accuracy}});
  j["test_accuracy"] = test_accuracy;
  j["test_loss"] = test_loss;
  j["config"] = config;
  return j;
}

void RunRecord::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << text;
  };
  put("record.csv", to_csv());
  put("record.json", to_json().dump(2) + "\n");
  put("timing.json", json{{"wall_seconds", wall_seconds}}.dump(2) + "\n");
}

std::vector<AblationRow> run_ablation_suite(const ModelConfig& base, const std::vector<std::string>& flags,
                                            const TrainConfig& train_cfg, const Dataset& data, const LogFn& log) {
  std::vector<AblationRow> out;
  if (log) log("ablation run: base");
  out.push_back({"base", train(base, train_cfg, data, {}, log).record});
  for (const auto& flag : flags) {
    if (log) log("ablation run: " + flag);
    out.push_back({flag, train(with_flag(base, flag), train_cfg, data, {}, log).record});
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "label,test_accuracy,test_loss,final_train_loss,final_train_acc\n";
  for (const auto& r : rows) {
    Real tl = 0.0, ta = 0.0;
    for (const auto& e : r.record.rows)
      if (e.split == "train") {
        tl = e.loss;
        ta = e.accuracy;
      }
    out += r.label + "," + fmt(r.record.test_accuracy) + "," + fmt(r.record.test_loss) + "," + fmt(tl) + "," + fmt(ta) + "\n";
  }
  return out;
}

}  // namespace swf
