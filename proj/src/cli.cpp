#include "swf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "swf/analysis.hpp"
#include "swf/data.hpp"
#include "swf/errors.hpp"
#include "swf/training.hpp"
#include "swf/wavelet.hpp"

namespace swf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Failures caused by the invocation rather than by the program.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UserError("--out: cannot write " + path.string());
  f << text;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UserError("--out: cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".swf_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw UserError("--out: output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

std::string num(Real v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "swf_out";
  std::int64_t seed = -1;
  bool trace = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "JSON config file");
  if (config_required) opt->required();
  cmd->add_option("--set", c.sets, "Override KEY=VALUE (repeatable)")->take_all();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed (overrides train.seed)");
  cmd->add_flag("--trace", c.trace, "Capture activations and write spectrum/energy reports");
}

RunConfig load_config(const Common& c, json& resolved) {
  std::vector<std::string> sets = c.sets;
  if (c.seed >= 0) sets.push_back("train.seed=" + std::to_string(c.seed));
  try {
    resolved = resolve_config(c.config, sets);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    const bool from_set = what.find("override") != std::string::npos;
    throw UserError((from_set ? "--set: " : "--config: ") + what);
  }
  return run_config_from_json(resolved);
}

// Test split when present, else validation, else training examples.
const Split& analysis_split(const Dataset& d) {
  if (d.test.size() > 0) return d.test;
  if (d.val.size() > 0) return d.val;
  return d.train;
}

LayerActivationTrace capture(SWformer& model, const Split& split, std::size_t samples) {
  const std::size_t n = std::min(samples, split.size());
  if (n == 0) throw UserError("no examples available for tracing");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  LayerActivationTrace trace;
  model.forward(make_batch(split, idx, model.config().timesteps), false, &trace);
  return trace;
}

std::string default_layer(const ModelConfig& cfg) { return "block" + std::to_string(cfg.depth) + ".membrane"; }

void write_trace_reports(SWformer& model, const RunConfig& cfg, const Dataset& data, const fs::path& out,
                         std::ostream& log) {
  LayerActivationTrace trace = capture(model, analysis_split(data), cfg.analysis.samples);
  const EnergyReport report =
      count_sops(trace, model.config(), {cfg.analysis.e_mac_pj, cfg.analysis.e_ac_pj});
  write_text(out / "energy.json", report.to_json().dump(2) + "\n");
  std::vector<SpectrumProfile> profiles;
  for (const auto& [name, map] : trace.maps) {
    try {
      profiles.push_back(spectrum_of(map, name));
    } catch (const DomainError& e) {
      log << "spectrum: skipping " << name << ": " << e.what() << "\n";
    }
  }
  write_text(out / "spectrum.csv", spectrum_csv(profiles));
  write_text(out / "spectrum.dat", spectrum_gnuplot(profiles));
  log << "trace: total SOPs " << num(report.total_sops) << ", energy " << num(report.total_energy_mj) << " mJ\n";
}

void snapshot(const fs::path& out, const json& config) { write_text(out / "config.json", config.dump(2) + "\n"); }

int cmd_train(const Common& c, std::ostream& out) {
  json resolved;
  const RunConfig cfg = load_config(c, resolved);
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, resolved);
  const Dataset data = load_dataset(cfg.data, cfg.model.timesteps, cfg.train.seed);
  auto log = [&](const std::string& s) { out << s << "\n" << std::flush; };
  TrainResult r = train(cfg.model, cfg.train, data, {}, log);
  r.record.config = resolved;
  r.record.write(dir);
  r.model.save(dir / "checkpoint");
  if (c.trace) write_trace_reports(r.model, cfg, data, dir, out);
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

// Loads a checkpoint; the config defaults to the run directory's snapshot.
struct Loaded {
  json resolved;
  RunConfig cfg;
  SWformer model;
};

Loaded load_checkpoint(Common c, const std::string& checkpoint, const std::string& flag) {
  if (!fs::exists(fs::path(checkpoint) / "manifest.json"))
    throw UserError(flag + ": no checkpoint at '" + checkpoint + "'");
  if (c.config.empty()) {
    const fs::path guess = fs::path(checkpoint).parent_path() / "config.json";
    if (!fs::exists(guess)) throw UserError("--config: required (no config.json next to " + checkpoint + ")");
    c.config = guess.string();
  }
  json resolved;
  RunConfig cfg = load_config(c, resolved);
  SWformer model = SWformer::load(checkpoint);
  cfg.model = model.config();
  resolved["model"] = model_config_to_json(cfg.model);
  return {resolved, cfg, std::move(model)};
}

int cmd_eval(const Common& c, const std::string& checkpoint, std::ostream& out) {
  Loaded l = load_checkpoint(c, checkpoint, "--checkpoint");
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, l.resolved);
  const Dataset data = load_dataset(l.cfg.data, l.cfg.model.timesteps, l.cfg.train.seed);
  const EvalResult r = evaluate(l.model, analysis_split(data));
  write_text(dir / "eval.json", json{{"loss", r.loss}, {"accuracy", r.accuracy}}.dump(2) + "\n");
  if (c.trace) write_trace_reports(l.model, l.cfg, data, dir, out);
  out << "eval loss " << num(r.loss) << " acc " << num(r.accuracy) << "\n";
  return kExitOk;
}

int cmd_haar_bench(const Common& c, std::size_t size, std::size_t T, const std::vector<double>& vths, std::ostream& out) {
  if (!is_power_of_two(size) || size < 2) throw UserError("--size: must be a power of two >= 2");
  if (T == 0) throw UserError("--T: must be >= 1");
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, json{{"haar_bench", {{"size", size}, {"T", T}, {"v_th", vths}}}});
  const auto images = fidelity_suite(size);
  const HaarMatrix w = haar_matrix_for_side(size);
  std::string csv = "image,mode,T,v_th,psnr_db\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const DenseTensor exact = haar2d_inverse_exact(haar2d_forward_exact(images[i], w).decoded(), w);
    csv += std::to_string(i) + ",exact," + std::to_string(T) + ",," + num(psnr(images[i], exact, 1.0)) + "\n";
    for (double v : vths)
      for (auto [mode, pol] : {std::pair{"binary", Polarity::binary}, std::pair{"ternary", Polarity::ternary}})
        csv += std::to_string(i) + "," + mode + "," + std::to_string(T) + "," + num(v) + "," +
               num(psnr(images[i], spiking_round_trip(images[i], T, v, pol), 1.0)) + "\n";
  }
  write_text(dir / "haar_bench.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_spectrum(const Common& c, const std::string& checkpoint, const std::string& control, std::string layer,
                 std::ostream& out) {
  Loaded l = load_checkpoint(c, checkpoint, "--checkpoint");
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, l.resolved);
  const Dataset data = load_dataset(l.cfg.data, l.cfg.model.timesteps, l.cfg.train.seed);
  if (layer.empty()) layer = l.cfg.analysis.layer.empty() ? default_layer(l.cfg.model) : l.cfg.analysis.layer;
  const LayerActivationTrace trace = capture(l.model, analysis_split(data), l.cfg.analysis.samples);
  if (!trace.maps.count(layer)) {
    std::string known;
    for (const auto& [name, map] : trace.maps) known += (known.empty() ? "" : ", ") + name;
    throw UserError("--layer: '" + layer + "' is not a traced map (known: " + known + ")");
  }
  std::vector<SpectrumProfile> profiles{spectrum(trace, layer)};
  profiles[0].layer = "model:" + layer;
  if (!control.empty()) {
    if (!fs::exists(fs::path(control) / "manifest.json")) throw UserError("--control: no checkpoint at '" + control + "'");
    SWformer ctrl = SWformer::load(control);
    const LayerActivationTrace ct = capture(ctrl, analysis_split(data), l.cfg.analysis.samples);
    profiles.push_back(spectrum(ct, layer));
    profiles[1].layer = "control:" + layer;
    const HighFreqComparison cmp =
        compare_highfreq(profiles[0], profiles[1], l.cfg.analysis.band_lo, l.cfg.analysis.band_hi);
    json j{{"layer", layer},
           {"band", {l.cfg.analysis.band_lo, l.cfg.analysis.band_hi}},
           {"kind", cmp.kind == HighFreqComparison::Kind::finite ? "finite" : cmp.to_string()}};
    if (cmp.kind == HighFreqComparison::Kind::finite) j["value"] = cmp.value;
    write_text(dir / "comparison.json", j.dump(2) + "\n");
    out << "compare_highfreq(model, control) = " << cmp.to_string() << "\n";
  }
  write_text(dir / "spectrum.csv", spectrum_csv(profiles));
  write_text(dir / "spectrum.dat", spectrum_gnuplot(profiles));
  out << spectrum_csv(profiles);
  return kExitOk;
}

int cmd_energy(const Common& c, const std::string& checkpoint, std::ostream& out) {
  Loaded l = load_checkpoint(c, checkpoint, "--checkpoint");
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, l.resolved);
  const Dataset data = load_dataset(l.cfg.data, l.cfg.model.timesteps, l.cfg.train.seed);
  const LayerActivationTrace trace = capture(l.model, analysis_split(data), l.cfg.analysis.samples);
  const EnergyReport r = count_sops(trace, l.cfg.model, {l.cfg.analysis.e_mac_pj, l.cfg.analysis.e_ac_pj});
  const std::string text = r.to_json().dump(2) + "\n";
  write_text(dir / "energy.json", text);
  out << text;
  return kExitOk;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& flags, std::size_t seeds, std::ostream& out) {
  json resolved;
  RunConfig cfg = load_config(c, resolved);
  for (const auto& f : flags) {
    try {
      (void)with_flag(cfg.model, f);
    } catch (const ConfigError& e) {
      throw UserError(std::string("--flags: ") + e.what());
    }
  }
  if (seeds == 0) throw UserError("--seeds: must be >= 1");
  const fs::path dir = prepare_out(c.out);
  snapshot(dir, resolved);
  auto log = [&](const std::string& s) { out << s << "\n" << std::flush; };
  std::string csv;
  for (std::size_t k = 0; k < seeds; ++k) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + k;
    const Dataset data = load_dataset(cfg.data, cfg.model.timesteps, tc.seed);
    const auto rows = run_ablation_suite(cfg.model, flags, tc, data, log);
    std::string part = ablation_csv(rows);
    if (k == 0) {
      csv = "seed," + part.substr(0, part.find('\n') + 1);
    }
    std::istringstream lines(part.substr(part.find('\n') + 1));
    for (std::string line; std::getline(lines, line);) csv += std::to_string(tc.seed) + "," + line + "\n";
    for (const auto& r : rows) r.record.write(dir / (r.label + "_seed" + std::to_string(tc.seed)));
  }
  write_text(dir / "ablation.csv", csv);
  out << csv;
  return kExitOk;
}

}  // namespace

json resolve_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (path.empty()) throw ConfigError("no config file given");
  json j = run_config_to_json(load_run_config(path));
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig cfg = run_config_from_json(j);
  const fs::path base = fs::absolute(path).parent_path();
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  DataConfig& d = cfg.data;
  for (std::string* p : {&d.train_images, &d.train_labels, &d.test_images, &d.test_labels, &d.test_file, &d.events_index})
    fix(*p);
  for (auto& p : d.train_files) fix(p);
  return run_config_to_json(cfg);
}

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking wavelet transformer toolkit", "swf"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, control, layer;
  std::size_t size = 16, T = 4, seeds = 1;
  std::vector<double> vths{0.5, 1.0};
  std::vector<std::string> flags{"no_haar", "no_neg"};

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run record and checkpoint");
  add_common(train_cmd, common, true);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  auto* bench_cmd = app.add_subcommand("haar-bench", "PSNR of exact and spiking Haar round trips");
  bench_cmd->add_option("--out", common.out, "Output directory")->capture_default_str();
  bench_cmd->add_option("--size", size, "Image side (power of two)")->capture_default_str();
  bench_cmd->add_option("--T", T, "Timesteps")->capture_default_str();
  bench_cmd->add_option("--vth", vths, "Thresholds")->capture_default_str();
  auto* spec_cmd = app.add_subcommand("spectrum", "Radial Fourier profile of a traced layer");
  add_common(spec_cmd, common, false);
  spec_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  spec_cmd->add_option("--control", control, "Control checkpoint to compare against");
  spec_cmd->add_option("--layer", layer, "Trace map name (default: last block membrane)");
  auto* energy_cmd = app.add_subcommand("energy", "Synaptic-operation and energy report");
  add_common(energy_cmd, common, false);
  energy_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  auto* ablate_cmd = app.add_subcommand("ablate", "Train the base model and one model per ablation flag");
  add_common(ablate_cmd, common, true);
  ablate_cmd->add_option("--flags", flags, "Ablation flags")->capture_default_str();
  ablate_cmd->add_option("--seeds", seeds, "Seeds per configuration (train.seed, train.seed + 1, ...)")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (args.size() <= 1) {
      err << app.help();
    } else {
      err << "error: " << e.what() << "\n";
      err << "run 'swf --help' for usage\n";
    }
    return kExitUser;
  }

  try {
    if (*train_cmd) return cmd_train(common, out);
    if (*eval_cmd) return cmd_eval(common, checkpoint, out);
    if (*bench_cmd) return cmd_haar_bench(common, size, T, vths, out);
    if (*spec_cmd) return cmd_spectrum(common, checkpoint, control, layer, out);
    if (*energy_cmd) return cmd_energy(common, checkpoint, out);
    if (*ablate_cmd) return cmd_ablate(common, flags, seeds, out);
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitUser;
  } catch (const FormatError& e) {
    err << "error: input data: " << e.what() << "\n";
    return kExitUser;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  err << app.help();
  return kExitUser;
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return parse_and_dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace swf
