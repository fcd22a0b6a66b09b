#include "swf/model.hpp"

#include <fstream>

#include "json.hpp"
#include "swf/config.hpp"
#include "swf/container.hpp"
#include "swf/errors.hpp"

namespace swf {

using nlohmann::json;

std::string to_string(Variant v) { return v == Variant::standard ? "standard" : "dvs"; }
std::string to_string(Mixer m) { return m == Mixer::fatm ? "fatm" : "global_avg"; }
std::string to_string(WaveletMode m) { return m == WaveletMode::spiking ? "spiking" : "exact"; }

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::no_haar: return "no_haar";
    case Ablation::no_inverse: return "no_inverse";
    case Ablation::no_neg: return "no_neg";
    case Ablation::no_pool: return "no_pool";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "standard") return Variant::standard;
  if (s == "dvs") return Variant::dvs;
  throw ConfigError("unknown variant '" + s + "' (expected standard or dvs)");
}

Mixer mixer_from_string(const std::string& s) {
  if (s == "fatm") return Mixer::fatm;
  if (s == "global_avg") return Mixer::global_avg;
  throw ConfigError("unknown mixer '" + s + "' (expected fatm or global_avg)");
}

WaveletMode wavelet_mode_from_string(const std::string& s) {
  if (s == "spiking") return WaveletMode::spiking;
  if (s == "exact") return WaveletMode::exact;
  throw ConfigError("unknown wavelet mode '" + s + "' (expected spiking or exact)");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "no_haar") return Ablation::no_haar;
  if (s == "no_inverse") return Ablation::no_inverse;
  if (s == "no_neg") return Ablation::no_neg;
  if (s == "no_pool") return Ablation::no_pool;
  throw ConfigError("unknown ablation '" + s + "'");
}

void ModelConfig::validate() const {
  neuron.validate();
  if (depth == 0) throw ConfigError("depth must be >= 1");
  if (timesteps == 0) throw ConfigError("timesteps must be >= 1");
  if (num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
  if (embed_dim == 0 || embed_dim % 8 != 0)
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " must be a positive multiple of 8");
  if (blocks_k == 0 || embed_dim % blocks_k != 0)
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by blocks_k " +
                      std::to_string(blocks_k));
  if (input_height % 4 != 0 || input_width % 4 != 0)
    throw ConfigError("input size " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " is not divisible by the patching factor 4");
  if (input_height != input_width) throw ConfigError("the token grid must be square for the Haar transform");
  if (!is_power_of_two(token_side()))
    throw ConfigError("token grid side " + std::to_string(token_side()) + " is not a power of two");
  if (!(wavelet_vth > 0.0)) throw ConfigError("wavelet_vth must be positive");
}

ModelConfig with_flag(ModelConfig cfg, const std::string& flag) {
  if (flag == "mask_dc") cfg.mask_dc = true;
  else cfg.ablations.insert(ablation_from_string(flag));
  return cfg;
}

namespace {

NeuronConfig lif_config(const ModelConfig& cfg) {
  NeuronConfig n = cfg.neuron;
  n.relaxed = cfg.relaxed;
  return n;
}

DenseTensor zeros_like(const DenseTensor& x) { return DenseTensor(x.shape()); }

}  // namespace

// --------------------------------------------------------- FrequencyLayer

FrequencyLayer::FrequencyLayer(const std::string& name, const ModelConfig& cfg)
    : name_(name), mask_dc_(cfg.mask_dc), inverse_(!cfg.has(Ablation::no_inverse)) {
  const std::size_t side = cfg.token_side();
  const bool spiking = cfg.wavelet_mode == WaveletMode::spiking;
  const Real value = spiking ? cfg.wavelet_vth : 1.0;
  const HaarMatrix w = haar_matrix_for_side(side);
  const DenseTensor wt = w.transposed();
  fwd_rows_ = HaarStage(name + ".haar_fwd_rows", w.m, Side::right, 1.0);
  fwd_cols_ = HaarStage(name + ".haar_fwd_cols", w.m, Side::left, value);
  weights = BlockDiagLayer(name + ".blockdiag", cfg.embed_dim, cfg.blocks_k, side, side, value);
  inv_rows_ = HaarStage(name + ".haar_inv_rows", wt, Side::right, value);
  inv_cols_ = HaarStage(name + ".haar_inv_cols", wt, Side::left, value);

  NeuronConfig n = NeuronConfig::integrate_and_fire(
      cfg.wavelet_vth, cfg.has(Ablation::no_neg) ? Polarity::binary : Polarity::ternary);
  n.surrogate_width = cfg.neuron.surrogate_width;
  n.relaxed = cfg.relaxed;
  if1_ = SpikeLayer(n, cfg.timesteps, !spiking);
  if2_ = SpikeLayer(n, cfg.timesteps, !spiking);
  if3_ = SpikeLayer(n, cfg.timesteps, !spiking);
  if4_ = SpikeLayer(n, cfg.timesteps, !spiking);
}

void FrequencyLayer::init(Rng& rng, bool zero) { weights.init(rng, zero); }

DenseTensor FrequencyLayer::forward(const DenseTensor& spikes, LayerActivationTrace* trace) {
  DenseTensor h = if2_.forward(fwd_cols_.forward(if1_.forward(fwd_rows_.forward(spikes, trace)), trace));
  if (mask_dc_) {
    const std::size_t plane = h.extent(2) * h.extent(3);
    for (std::size_t p = 0; p < h.size() / plane; ++p) h[p * plane] = 0.0;
  }
  DenseTensor y = weights.forward(h, trace);
  if (!inverse_) return y;
  return inv_cols_.forward(if4_.forward(inv_rows_.forward(if3_.forward(y), trace)), trace);
}

DenseTensor FrequencyLayer::backward(const DenseTensor& grad) {
  DenseTensor g = grad;
  if (inverse_) g = if3_.backward(inv_rows_.backward(if4_.backward(inv_cols_.backward(g))));
  g = weights.backward(g);
  if (mask_dc_) {
    const std::size_t plane = g.extent(2) * g.extent(3);
    for (std::size_t p = 0; p < g.size() / plane; ++p) g[p * plane] = 0.0;
  }
  return fwd_rows_.backward(if1_.backward(fwd_cols_.backward(if2_.backward(g))));
}

// ------------------------------------------------------------- TokenMixer

TokenMixer::TokenMixer(const std::string& name, const ModelConfig& cfg) : name_(name), cfg_(cfg) {
  const std::size_t D = cfg.embed_dim, k = cfg.blocks_k;
  has_fl_ = cfg.mixer == Mixer::fatm && !cfg.has(Ablation::no_haar);
  pool_ = cfg.variant == Variant::dvs && !cfg.has(Ablation::no_pool);
  if (has_fl_) fl_ = std::make_unique<FrequencyLayer>(name + ".fl", cfg);
  if (cfg.mixer == Mixer::fatm) {
    sl_conv_ = Conv2d(name + ".sl.conv", D, D, 3, 1, k);
    sl_bn_ = BatchNorm2d(name + ".sl.bn", D);
    cm_conv_ = Conv2d(name + ".cm.conv", D, D, 1, 1, k);
    cm_bn_ = BatchNorm2d(name + ".cm.bn", D);
    respike_ = SpikeLayer(lif_config(cfg), cfg.timesteps);
  } else {
    mix_conv_ = Conv2d(name + ".mix.conv", D, D, 1, 1, 1);
    mix_bn_ = BatchNorm2d(name + ".mix.bn", D);
  }
}

void TokenMixer::init(Rng& rng, bool zero) {
  if (cfg_.mixer == Mixer::fatm) {
    if (fl_) fl_->init(rng, zero);
    sl_conv_.init(rng);
    sl_bn_.init(zero);
    cm_conv_.init(rng);
    cm_bn_.init(zero);
  } else {
    mix_conv_.init(rng);
    mix_bn_.init(zero);
  }
}

std::vector<Param*> TokenMixer::params() {
  std::vector<Param*> out;
  auto append = [&](std::vector<Param*> p) { out.insert(out.end(), p.begin(), p.end()); };
  if (cfg_.mixer == Mixer::fatm) {
    if (fl_) append(fl_->params());
    append(sl_conv_.params());
    append(sl_bn_.params());
    append(cm_conv_.params());
    append(cm_bn_.params());
  } else {
    append(mix_conv_.params());
    append(mix_bn_.params());
  }
  return out;
}

std::vector<BatchNorm2d*> TokenMixer::norms() {
  if (cfg_.mixer == Mixer::fatm) return {&sl_bn_, &cm_bn_};
  return {&mix_bn_};
}

DenseTensor TokenMixer::forward(const DenseTensor& spikes, bool training, LayerActivationTrace* trace) {
  if (cfg_.mixer == Mixer::global_avg) {
    DenseTensor out = mix_bn_.forward(mix_conv_.forward(token_mean(spikes), trace), training);
    if (trace) trace->record_map(name_ + ".mixer", out);
    return out;
  }
  DenseTensor x = pool_ ? maxpool_.forward(spikes) : spikes;
  DenseTensor fl;
  if (has_fl_) {
    fl = fl_->forward(x, trace);
    if (trace) trace->record_map(name_ + ".fl", fl);
  }
  // The dvs variant filters with FL first; SL and CM see its re-spiked output.
  const bool chained = cfg_.variant == Variant::dvs && has_fl_;
  const DenseTensor branch_in = chained ? respike_.forward(fl) : x;
  DenseTensor out = add(sl_bn_.forward(sl_conv_.forward(branch_in, trace), training),
                        cm_bn_.forward(cm_conv_.forward(branch_in, trace), training));
  if (has_fl_) add_into(out, fl);
  return out;
}

DenseTensor TokenMixer::backward(const DenseTensor& grad) {
  if (cfg_.mixer == Mixer::global_avg) return token_mean_backward(mix_conv_.backward(mix_bn_.backward(grad)));
  DenseTensor g_branch = add(sl_conv_.backward(sl_bn_.backward(grad)), cm_conv_.backward(cm_bn_.backward(grad)));
  const bool chained = cfg_.variant == Variant::dvs && has_fl_;
  DenseTensor gx;
  if (chained) {
    DenseTensor g_fl = add(grad, respike_.backward(g_branch));
    gx = fl_->backward(g_fl);
  } else {
    gx = std::move(g_branch);
    if (has_fl_) add_into(gx, fl_->backward(grad));
  }
  return pool_ ? maxpool_.backward(gx) : gx;
}

// ----------------------------------------------------------- EncoderBlock

EncoderBlock::EncoderBlock(std::size_t index, const ModelConfig& cfg)
    : name_("block" + std::to_string(index)), cfg_(cfg), mixer_(name_, cfg) {
  const std::size_t D = cfg.embed_dim;
  const NeuronConfig n = lif_config(cfg);
  lif_in_ = SpikeLayer(n, cfg.timesteps);
  lif_hidden_ = SpikeLayer(n, cfg.timesteps);
  lif_out_ = SpikeLayer(n, cfg.timesteps);
  fc1_ = Conv2d(name_ + ".mlp.fc1", D, 4 * D, 1, 1, 1);
  bn1_ = BatchNorm2d(name_ + ".mlp.bn1", 4 * D);
  fc2_ = Conv2d(name_ + ".mlp.fc2", 4 * D, D, 1, 1, 1);
  bn2_ = BatchNorm2d(name_ + ".mlp.bn2", D);
}

void EncoderBlock::init(Rng& rng, bool zero) {
  mixer_.init(rng, zero);
  fc1_.init(rng);
  bn1_.init(false);
  fc2_.init(rng);
  bn2_.init(zero);
}

std::vector<Param*> EncoderBlock::params() {
  std::vector<Param*> out = mixer_.params();
  for (Param* p : {&fc1_.weight, &bn1_.gamma, &bn1_.beta, &fc2_.weight, &bn2_.gamma, &bn2_.beta}) out.push_back(p);
  return out;
}

std::vector<BatchNorm2d*> EncoderBlock::norms() {
  auto out = mixer_.norms();
  out.push_back(&bn1_);
  out.push_back(&bn2_);
  return out;
}

void EncoderBlock::forward(const DenseTensor& u_prev, const DenseTensor& s_prev, bool training,
                           LayerActivationTrace* trace, DenseTensor& u_out, DenseTensor& s_out) {
  DenseTensor u = mixer_.forward(s_prev, training, trace);
  if (trace) trace->record_map(name_ + ".fatm", u);
  if (cfg_.membrane_shortcut) add_into(u, u_prev);
  const DenseTensor a = lif_in_.forward(u);
  const DenseTensor h = lif_hidden_.forward(bn1_.forward(fc1_.forward(a, trace), training));
  DenseTensor m = bn2_.forward(fc2_.forward(h, trace), training);
  add_into(m, u);
  s_out = lif_out_.forward(m);
  u_out = std::move(u);
  if (trace) {
    trace->record_map(name_ + ".membrane", u_out);
    trace->record_map(name_ + ".spikes", s_out);
  }
}

std::pair<DenseTensor, DenseTensor> EncoderBlock::backward(const DenseTensor& grad_u, const DenseTensor& grad_s) {
  const DenseTensor g_pre = lif_out_.backward(grad_s);
  DenseTensor gu = add(g_pre, grad_u);
  const DenseTensor gh = fc2_.backward(bn2_.backward(g_pre));
  const DenseTensor ga = fc1_.backward(bn1_.backward(lif_hidden_.backward(gh)));
  add_into(gu, lif_in_.backward(ga));
  DenseTensor gs_prev = mixer_.backward(gu);
  DenseTensor gu_prev = cfg_.membrane_shortcut ? std::move(gu) : zeros_like(gu);
  return {std::move(gu_prev), std::move(gs_prev)};
}

// ---------------------------------------------------------------- SWformer

SWformer::SWformer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t D = cfg.embed_dim;
  const std::size_t widths[5] = {cfg.in_channels, D / 8, D / 4, D / 2, D};
  const std::size_t strides[4] = {1, 2, 1, 2};
  const NeuronConfig n = lif_config(cfg);
  for (int i = 0; i < 4; ++i) {
    const std::string idx = std::to_string(i + 1);
    conv_[i] = Conv2d("sps.conv" + idx, widths[i], widths[i + 1], 3, strides[i], 1);
    bn_[i] = BatchNorm2d("sps.bn" + idx, widths[i + 1]);
    if (i < 3) sps_lif_[i] = SpikeLayer(n, cfg.timesteps);
  }
  rpe_conv_ = Conv2d("sps.rpe.conv", D, D, 3, 1, 1);
  rpe_bn_ = BatchNorm2d("sps.rpe.bn", D);
  rpe_lif_ = SpikeLayer(n, cfg.timesteps);
  lif0_ = SpikeLayer(n, cfg.timesteps);
  for (std::size_t l = 1; l <= cfg.depth; ++l) blocks_.push_back(std::make_unique<EncoderBlock>(l, cfg));
  head_ = Linear("head", D, cfg.num_classes);
  side_ = cfg.token_side();

  Rng rng(seed);
  for (int i = 0; i < 4; ++i) {
    conv_[i].init(rng);
    bn_[i].init(false);
  }
  rpe_conv_.init(rng);
  rpe_bn_.init(false);
  for (auto& b : blocks_) b->init(rng, cfg.zero_init_branches);
  head_.init(rng);
}

std::vector<Param*> SWformer::params() {
  std::vector<Param*> out;
  for (int i = 0; i < 4; ++i)
    for (Param* p : {&conv_[i].weight, &bn_[i].gamma, &bn_[i].beta}) out.push_back(p);
  for (Param* p : {&rpe_conv_.weight, &rpe_bn_.gamma, &rpe_bn_.beta}) out.push_back(p);
  for (auto& b : blocks_)
    for (Param* p : b->params()) out.push_back(p);
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<std::pair<std::string, DenseTensor*>> SWformer::buffers() {
  std::vector<BatchNorm2d*> norms = {&bn_[0], &bn_[1], &bn_[2], &bn_[3], &rpe_bn_};
  for (auto& b : blocks_)
    for (BatchNorm2d* n : b->norms()) norms.push_back(n);
  std::vector<std::pair<std::string, DenseTensor*>> out;
  for (BatchNorm2d* n : norms) {
    out.emplace_back(n->name + ".running_mean", &n->running_mean);
    out.emplace_back(n->name + ".running_var", &n->running_var);
  }
  return out;
}

void SWformer::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0);
}

std::size_t SWformer::param_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

std::size_t SWformer::fl_param_count() {
  std::size_t n = 0;
  for (Param* p : params())
    if (p->name.find(".fl.") != std::string::npos) n += p->value.size();
  return n;
}

DenseTensor SWformer::sps_forward(const DenseTensor& images, bool training, LayerActivationTrace* trace) {
  if (images.rank() != 5)
    throw DimensionError("images must be [T, B, C, H, W], got " + shape_string(images.shape()));
  const std::size_t T = images.extent(0), B = images.extent(1);
  if (T != cfg_.timesteps || images.extent(2) != cfg_.in_channels || images.extent(3) != cfg_.input_height ||
      images.extent(4) != cfg_.input_width)
    throw DimensionError("images " + shape_string(images.shape()) + " do not match the model configuration");
  batch_ = B;
  if (trace) {
    trace->timesteps = T;
    trace->batch = B;
  }
  DenseTensor h = images.reshaped({T * B, cfg_.in_channels, cfg_.input_height, cfg_.input_width});
  for (int i = 0; i < 3; ++i) h = sps_lif_[i].forward(bn_[i].forward(conv_[i].forward(h, trace), training));
  DenseTensor u = bn_[3].forward(conv_[3].forward(h, trace), training);
  if (cfg_.use_rpe) add_into(u, rpe_bn_.forward(rpe_conv_.forward(rpe_lif_.forward(u), trace), training));
  if (trace) trace->record_map("sps.U0", u);
  return u;
}

DenseTensor SWformer::sps_backward(const DenseTensor& grad_u0) {
  DenseTensor g = grad_u0;
  if (cfg_.use_rpe) add_into(g, rpe_lif_.backward(rpe_conv_.backward(rpe_bn_.backward(grad_u0))));
  g = conv_[3].backward(bn_[3].backward(g));
  for (int i = 2; i >= 0; --i) g = conv_[i].backward(bn_[i].backward(sps_lif_[i].backward(g)), i > 0);
  return g;
}

DenseTensor SWformer::forward(const DenseTensor& images, bool training, LayerActivationTrace* trace) {
  DenseTensor u = sps_forward(images, training, trace);
  DenseTensor s = lif0_.forward(u);
  for (auto& b : blocks_) {
    DenseTensor u_next, s_next;
    b->forward(u, s, training, trace, u_next, s_next);
    u = std::move(u_next);
    s = std::move(s_next);
  }
  const std::size_t T = cfg_.timesteps, B = batch_, D = cfg_.embed_dim, P = s.extent(2) * s.extent(3);
  DenseTensor pooled({B, D});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < D; ++c) {
        Real acc = 0.0;
        for (std::size_t p = 0; p < P; ++p) acc += s[((t * B + b) * D + c) * P + p];
        pooled[b * D + c] += acc;
      }
  for (Real& v : pooled.data()) v /= static_cast<Real>(T * P);
  return head_.forward(pooled, trace);
}

void SWformer::backward(const DenseTensor& grad_logits) {
  const std::size_t T = cfg_.timesteps, B = batch_, D = cfg_.embed_dim, P = side_ * side_;
  const DenseTensor g_pooled = head_.backward(grad_logits);
  DenseTensor gs({T * B, D, side_, side_});
  const Real scale = 1.0 / static_cast<Real>(T * P);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < D; ++c)
        for (std::size_t p = 0; p < P; ++p) gs[((t * B + b) * D + c) * P + p] = g_pooled[b * D + c] * scale;
  DenseTensor gu(gs.shape());
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    auto [gu_prev, gs_prev] = blocks_[l]->backward(gu, gs);
    gu = std::move(gu_prev);
    gs = std::move(gs_prev);
  }
  add_into(gu, lif0_.backward(gs));
  sps_backward(gu);
}

void SWformer::save(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  TensorContainer c;
  json manifest;
  manifest["format"] = "swformer-checkpoint";
  manifest["version"] = 1;
  manifest["config"] = model_config_to_json(cfg_);
  manifest["tensors"] = "params.swft";
  manifest["parameters"] = json::array();
  for (Param* p : params()) {
    c.add(p->name, p->value, DType::f64);
    manifest["parameters"].push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  manifest["buffers"] = json::array();
  for (auto& [name, t] : buffers()) {
    c.add(name, *t, DType::f64);
    manifest["buffers"].push_back({{"name", name}, {"shape", t->shape()}});
  }
  c.write(dir / "params.swft");
  std::ofstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << "\n";
}

SWformer SWformer::load(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw FormatError("missing " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  if (manifest.value("format", "") != "swformer-checkpoint") throw FormatError("manifest.json: not a checkpoint");
  SWformer model(model_config_from_json(manifest.at("config")), 0);
  const TensorContainer c = TensorContainer::read(dir / manifest.value("tensors", "params.swft"));
  auto assign = [&](const std::string& name, DenseTensor& dst) {
    DenseTensor v = c.dense(name);
    if (v.shape() != dst.shape())
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(v.shape()) + ", expected " +
                        shape_string(dst.shape()));
    dst = std::move(v);
  };
  for (Param* p : model.params()) assign(p->name, p->value);
  for (auto& [name, t] : model.buffers()) assign(name, *t);
  return model;
}

void SWformer::copy_state_from(SWformer& other) {
  auto src_params = other.params();
  auto dst_params = params();
  auto src_bufs = other.buffers();
  auto dst_bufs = buffers();
  if (src_params.size() != dst_params.size() || src_bufs.size() != dst_bufs.size())
    throw DimensionError("copy_state_from: models have different structure");
  for (std::size_t i = 0; i < dst_params.size(); ++i) {
    if (src_params[i]->name != dst_params[i]->name || src_params[i]->value.shape() != dst_params[i]->value.shape())
      throw DimensionError("copy_state_from: parameter '" + dst_params[i]->name + "' does not match");
    dst_params[i]->value = src_params[i]->value;
  }
  for (std::size_t i = 0; i < dst_bufs.size(); ++i) {
    if (src_bufs[i].first != dst_bufs[i].first || src_bufs[i].second->shape() != dst_bufs[i].second->shape())
      throw DimensionError("copy_state_from: buffer '" + dst_bufs[i].first + "' does not match");
    *dst_bufs[i].second = *src_bufs[i].second;
  }
}

}  // namespace swf
