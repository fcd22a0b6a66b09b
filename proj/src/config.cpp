#include "swf/config.hpp"

#include <fstream>

#include "swf/errors.hpp"

namespace swf {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const json& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

std::string to_string(OptimizerKind o) { return o == OptimizerKind::adamw ? "adamw" : "sgd_momentum"; }
std::string to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adamw") return OptimizerKind::adamw;
  if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + s + "' (expected adamw or sgd_momentum)");
}

Schedule schedule_from_string(const std::string& s) {
  if (s == "cosine") return Schedule::cosine;
  if (s == "constant") return Schedule::constant;
  throw ConfigError("unknown lr schedule '" + s + "' (expected cosine or constant)");
}

json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"optimizer", to_string(c.optimizer)},
          {"momentum", c.momentum},
          {"lr_schedule", to_string(c.schedule)},
          {"seed", c.seed},
          {"augment_crop", c.augment_crop},
          {"augment_flip", c.augment_flip}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  reject_unknown(j, train_to_json(c), "train");
  read(j, "epochs", c.epochs, "train");
  read(j, "batch_size", c.batch_size, "train");
  read(j, "learning_rate", c.learning_rate, "train");
  read(j, "weight_decay", c.weight_decay, "train");
  read(j, "momentum", c.momentum, "train");
  read(j, "seed", c.seed, "train");
  read(j, "augment_crop", c.augment_crop, "train");
  read(j, "augment_flip", c.augment_flip, "train");
  std::string s;
  if (j.contains("optimizer")) {
    read(j, "optimizer", s, "train");
    c.optimizer = optimizer_from_string(s);
  }
  if (j.contains("lr_schedule")) {
    read(j, "lr_schedule", s, "train");
    c.schedule = schedule_from_string(s);
  }
  if (c.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (c.learning_rate < 0.0) throw ConfigError("train.learning_rate must be >= 0");
  return c;
}

json data_to_json(const DataConfig& c) {
  return {{"kind", c.kind},
          {"train_images", c.train_images},
          {"train_labels", c.train_labels},
          {"test_images", c.test_images},
          {"test_labels", c.test_labels},
          {"train_files", c.train_files},
          {"test_file", c.test_file},
          {"events_index", c.events_index},
          {"train_limit", c.train_limit},
          {"test_limit", c.test_limit},
          {"val_fraction", c.val_fraction},
          {"image_side", c.image_side},
          {"synthetic_count", c.synthetic_count},
          {"window_us", c.window_us}};
}

DataConfig data_from_json(const json& j) {
  DataConfig c;
  reject_unknown(j, data_to_json(c), "data");
  read(j, "kind", c.kind, "data");
  read(j, "train_images", c.train_images, "data");
  read(j, "train_labels", c.train_labels, "data");
  read(j, "test_images", c.test_images, "data");
  read(j, "test_labels", c.test_labels, "data");
  read(j, "train_files", c.train_files, "data");
  read(j, "test_file", c.test_file, "data");
  read(j, "events_index", c.events_index, "data");
  read(j, "train_limit", c.train_limit, "data");
  read(j, "test_limit", c.test_limit, "data");
  read(j, "val_fraction", c.val_fraction, "data");
  read(j, "image_side", c.image_side, "data");
  read(j, "synthetic_count", c.synthetic_count, "data");
  read(j, "window_us", c.window_us, "data");
  if (c.kind != "idx" && c.kind != "cifar" && c.kind != "moving_edge" && c.kind != "events_csv")
    throw ConfigError("unknown data.kind '" + c.kind + "' (expected idx, cifar, moving_edge or events_csv)");
  if (c.val_fraction < 0.0 || c.val_fraction >= 1.0) throw ConfigError("data.val_fraction must lie in [0, 1)");
  return c;
}

json analysis_to_json(const AnalysisConfig& c) {
  return {{"e_mac_pj", c.e_mac_pj}, {"e_ac_pj", c.e_ac_pj}, {"band_lo", c.band_lo},
          {"band_hi", c.band_hi},   {"samples", c.samples}, {"layer", c.layer}};
}

AnalysisConfig analysis_from_json(const json& j) {
  AnalysisConfig c;
  reject_unknown(j, analysis_to_json(c), "analysis");
  read(j, "e_mac_pj", c.e_mac_pj, "analysis");
  read(j, "e_ac_pj", c.e_ac_pj, "analysis");
  read(j, "band_lo", c.band_lo, "analysis");
  read(j, "band_hi", c.band_hi, "analysis");
  read(j, "samples", c.samples, "analysis");
  read(j, "layer", c.layer, "analysis");
  if (!(c.band_lo >= 0.0 && c.band_lo <= c.band_hi && c.band_hi <= 1.0))
    throw ConfigError("analysis band must satisfy 0 <= band_lo <= band_hi <= 1");
  return c;
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  json ablations = json::array();
  for (Ablation a : c.ablations) ablations.push_back(to_string(a));
  return {{"depth", c.depth},
          {"embed_dim", c.embed_dim},
          {"blocks_k", c.blocks_k},
          {"timesteps", c.timesteps},
          {"in_channels", c.in_channels},
          {"input_height", c.input_height},
          {"input_width", c.input_width},
          {"num_classes", c.num_classes},
          {"v_th", c.neuron.v_th},
          {"v_reset", c.neuron.v_reset},
          {"beta", c.neuron.beta},
          {"surrogate_width", c.neuron.surrogate_width},
          {"wavelet_vth", c.wavelet_vth},
          {"wavelet_mode", to_string(c.wavelet_mode)},
          {"variant", to_string(c.variant)},
          {"mixer", to_string(c.mixer)},
          {"mask_dc", c.mask_dc},
          {"ablations", ablations},
          {"use_rpe", c.use_rpe},
          {"membrane_shortcut", c.membrane_shortcut},
          {"zero_init_branches", c.zero_init_branches},
          {"relaxed", c.relaxed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const std::string sec = "model";
  reject_unknown(j, model_config_to_json(c), sec);
  read(j, "depth", c.depth, sec);
  read(j, "embed_dim", c.embed_dim, sec);
  read(j, "blocks_k", c.blocks_k, sec);
  read(j, "timesteps", c.timesteps, sec);
  read(j, "in_channels", c.in_channels, sec);
  read(j, "input_height", c.input_height, sec);
  read(j, "input_width", c.input_width, sec);
  read(j, "num_classes", c.num_classes, sec);
  read(j, "v_th", c.neuron.v_th, sec);
  read(j, "v_reset", c.neuron.v_reset, sec);
  read(j, "beta", c.neuron.beta, sec);
  read(j, "surrogate_width", c.neuron.surrogate_width, sec);
  read(j, "wavelet_vth", c.wavelet_vth, sec);
  read(j, "mask_dc", c.mask_dc, sec);
  read(j, "use_rpe", c.use_rpe, sec);
  read(j, "membrane_shortcut", c.membrane_shortcut, sec);
  read(j, "zero_init_branches", c.zero_init_branches, sec);
  read(j, "relaxed", c.relaxed, sec);
  std::string s;
  if (j.contains("wavelet_mode")) {
    read(j, "wavelet_mode", s, sec);
    c.wavelet_mode = wavelet_mode_from_string(s);
  }
  if (j.contains("variant")) {
    read(j, "variant", s, sec);
    c.variant = variant_from_string(s);
  }
  if (j.contains("mixer")) {
    read(j, "mixer", s, sec);
    c.mixer = mixer_from_string(s);
  }
  if (j.contains("ablations")) {
    std::vector<std::string> flags;
    read(j, "ablations", flags, sec);
    for (const auto& f : flags) c.ablations.insert(ablation_from_string(f));
  }
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"model", model_config_to_json(c.model)},
          {"train", train_to_json(c.train)},
          {"data", data_to_json(c.data)},
          {"analysis", analysis_to_json(c.analysis)}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "model" && it.key() != "train" && it.key() != "data" && it.key() != "analysis")
      throw ConfigError("unknown config section '" + it.key() + "'");
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("analysis")) c.analysis = analysis_from_json(j.at("analysis"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  try {
    return run_config_from_json(json::parse(f));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  std::string section, field;
  if (const auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    field = key.substr(dot + 1);
    if (!config.contains(section) || !config[section].contains(field))
      throw ConfigError("unknown override key '" + key + "'");
  } else {
    for (auto it = config.begin(); it != config.end(); ++it)
      if (it.value().is_object() && it.value().contains(key)) {
        if (!section.empty())
          throw ConfigError("override key '" + key + "' is ambiguous (" + section + "." + key + " and " + it.key() +
                            "." + key + ")");
        section = it.key();
      }
    if (section.empty()) throw ConfigError("unknown override key '" + key + "'");
    field = key;
  }

  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json& slot = config[section][field];
  const bool number_ok = slot.is_number() && value.is_number();
  if (slot.type() != value.type() && !number_ok) {
    if (slot.is_string()) value = text;
    else throw ConfigError("override '" + key + "' expects a " + std::string(slot.type_name()) + ", got '" + text + "'");
  }
  if (slot.is_number_unsigned() && !value.is_number_unsigned())
    throw ConfigError("override '" + key + "' expects a non-negative integer, got '" + text + "'");
  if (slot.is_number_integer() && value.is_number_float())
    throw ConfigError("override '" + key + "' expects an integer, got '" + text + "'");
  slot = value;
}

}  // namespace swf
