#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "swf/layers.hpp"

namespace swf {

enum class Variant { standard, dvs };
enum class Mixer { fatm, global_avg };
enum class WaveletMode { spiking, exact };
enum class Ablation { no_haar, no_inverse, no_neg, no_pool };

std::string to_string(Variant v);
std::string to_string(Mixer m);
std::string to_string(WaveletMode m);
std::string to_string(Ablation a);
Variant variant_from_string(const std::string& s);
Mixer mixer_from_string(const std::string& s);
WaveletMode wavelet_mode_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

struct ModelConfig {
  std::size_t depth = 2;        ///< encoder blocks M
  std::size_t embed_dim = 32;   ///< D
  std::size_t blocks_k = 2;     ///< weight-splitting blocks
  std::size_t timesteps = 4;    ///< T
  std::size_t in_channels = 1;
  std::size_t input_height = 16;
  std::size_t input_width = 16;
  std::size_t num_classes = 10;
  /// LIF layers outside the wavelet path.
  NeuronConfig neuron = NeuronConfig::lif(1.0, 0.5);
  /// Threshold of the integrate-and-fire layers inside the frequency layer.
  Real wavelet_vth = 0.5;
  WaveletMode wavelet_mode = WaveletMode::spiking;
  Variant variant = Variant::standard;
  /// fatm: FL + SL + CM. global_avg: the token-mean control mixer.
  Mixer mixer = Mixer::fatm;
  bool mask_dc = false;
  std::set<Ablation> ablations;
  bool use_rpe = true;
  /// Carry U_{l-1} into U_l.
  bool membrane_shortcut = true;
  /// Zero the last BN scale of every branch and the block-diagonal weights,
  /// making each encoder block an identity on membrane potentials.
  bool zero_init_branches = false;
  /// Every neuron uses the relaxed (clamped-ramp) forward.
  bool relaxed = false;

  bool has(Ablation a) const { return ablations.count(a) != 0; }
  std::size_t token_side() const { return input_height / 4; }
  std::size_t tokens() const { return token_side() * token_side(); }
  /// Throws ConfigError on inconsistent structure.
  void validate() const;
};

/// Applies a named ablation flag ("no_haar", "no_inverse", "no_neg",
/// "no_pool" or "mask_dc") to a copy of `cfg`.
ModelConfig with_flag(ModelConfig cfg, const std::string& flag);

/// Frequency layer: spiking Haar forward, optional DC mask, block-diagonal
/// weighting, re-spike, spiking Haar inverse. Emits membrane potentials.
class FrequencyLayer {
 public:
  FrequencyLayer() = default;
  FrequencyLayer(const std::string& name, const ModelConfig& cfg);

  void init(Rng& rng, bool zero);
  DenseTensor forward(const DenseTensor& spikes, LayerActivationTrace* trace);
  DenseTensor backward(const DenseTensor& grad);
  std::vector<Param*> params() { return weights.params(); }

  BlockDiagLayer weights;

 private:
  std::string name_;
  bool mask_dc_ = false, inverse_ = true;
  HaarStage fwd_rows_, fwd_cols_, inv_rows_, inv_cols_;
  SpikeLayer if1_, if2_, if3_, if4_;
};

/// Token mixer: FL + SL + CM (standard), FL then SL + CM on re-spiked FL
/// output (dvs), or the token-mean control.
class TokenMixer {
 public:
  TokenMixer() = default;
  TokenMixer(const std::string& name, const ModelConfig& cfg);

  void init(Rng& rng, bool zero);
  DenseTensor forward(const DenseTensor& spikes, bool training, LayerActivationTrace* trace);
  DenseTensor backward(const DenseTensor& grad);
  std::vector<Param*> params();
  std::vector<BatchNorm2d*> norms();

 private:
  std::string name_;
  ModelConfig cfg_;
  bool has_fl_ = false, pool_ = false;
  std::unique_ptr<FrequencyLayer> fl_;
  TokenMaxPool maxpool_;
  SpikeLayer respike_;
  Conv2d sl_conv_, cm_conv_, mix_conv_;
  BatchNorm2d sl_bn_, cm_bn_, mix_bn_;
};

class EncoderBlock {
 public:
  EncoderBlock(std::size_t index, const ModelConfig& cfg);

  void init(Rng& rng, bool zero);
  /// U_l = mixer(S_{l-1}) + U_{l-1}; S_l = Spk(MLP(Spk(U_l)) + U_l).
  void forward(const DenseTensor& u_prev, const DenseTensor& s_prev, bool training, LayerActivationTrace* trace,
               DenseTensor& u_out, DenseTensor& s_out);
  /// Returns the gradients with respect to (U_{l-1}, S_{l-1}).
  std::pair<DenseTensor, DenseTensor> backward(const DenseTensor& grad_u, const DenseTensor& grad_s);
  std::vector<Param*> params();
  std::vector<BatchNorm2d*> norms();

 private:
  std::string name_;
  ModelConfig cfg_;
  TokenMixer mixer_;
  SpikeLayer lif_in_, lif_hidden_, lif_out_;
  Conv2d fc1_, fc2_;
  BatchNorm2d bn1_, bn2_;
};

class SWformer {
 public:
  SWformer(const ModelConfig& cfg, std::uint64_t seed);
  SWformer(SWformer&&) = default;
  SWformer& operator=(SWformer&&) = default;
  SWformer(const SWformer&) = delete;
  SWformer& operator=(const SWformer&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// images [T, B, C, H, W] -> logits [B, num_classes] from the GAP over
  /// timesteps and tokens of the last block's spikes.
  DenseTensor forward(const DenseTensor& images, bool training, LayerActivationTrace* trace = nullptr);
  /// Backpropagates d loss / d logits, accumulating parameter gradients.
  void backward(const DenseTensor& grad_logits);

  std::vector<Param*> params();
  /// Non-trainable state (batch-norm running statistics), by name.
  std::vector<std::pair<std::string, DenseTensor*>> buffers();
  void zero_grad();
  std::size_t param_count();
  /// Parameters of the frequency layers only.
  std::size_t fl_param_count();

  /// Writes manifest.json and params.swft into `dir`.
  void save(const std::filesystem::path& dir);
  static SWformer load(const std::filesystem::path& dir);
  /// Copies parameters and running statistics by name. Throws DimensionError
  /// when the two models differ in structure.
  void copy_state_from(SWformer& other);

  /// U0 of the patch-splitting stage for images [T, B, C, H, W].
  DenseTensor sps_forward(const DenseTensor& images, bool training, LayerActivationTrace* trace = nullptr);

 private:
  DenseTensor sps_backward(const DenseTensor& grad_u0);

  ModelConfig cfg_;
  std::size_t batch_ = 0;
  Conv2d conv_[4], rpe_conv_;
  BatchNorm2d bn_[4], rpe_bn_;
  SpikeLayer sps_lif_[3], rpe_lif_, lif0_;
  std::vector<std::unique_ptr<EncoderBlock>> blocks_;
  Linear head_;
  std::size_t side_ = 0;
};

}  // namespace swf
