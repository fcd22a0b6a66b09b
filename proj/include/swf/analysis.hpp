#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swf/layers.hpp"
#include "swf/model.hpp"

namespace swf {

/// Radial Fourier profile of one traced feature map. Amplitudes are averaged
/// over samples and channels before taking logs (natural log).
struct SpectrumProfile {
  std::string layer;
  std::size_t side = 0;
  /// Channel-mean Fourier amplitude of the time-averaged map, DC at
  /// [side / 2, side / 2].
  std::vector<Real> magnitude;
  /// Bin b covers radii rounding to b; frequency b / (side / 2) in [0, 1].
  std::vector<Real> frequency;
  /// log A(f) - log A(0). std::nullopt marks -infinity (no energy in the bin).
  std::vector<std::optional<Real>> delta;

  Real log_magnitude(std::size_t row, std::size_t col) const;
};

/// Time-averaged, centered 2D DFT of trace.maps[layer] with its radial
/// profile. Throws PreconditionError for an unknown layer, DimensionError for
/// a non-square map and DomainError when the map (or its DC term) is zero.
SpectrumProfile spectrum(const LayerActivationTrace& trace, const std::string& layer);
/// Same, for a map laid out as [T, B, C, H, W].
SpectrumProfile spectrum_of(const DenseTensor& map, const std::string& layer = "map");

struct HighFreqComparison {
  enum class Kind { finite, plus_inf, minus_inf, undefined };
  Real value = 0.0;  ///< meaningful only for Kind::finite
  Kind kind = Kind::finite;

  std::string to_string() const;
};

/// Mean delta over the band for `a` minus that for `b`. Positive means `a`
/// keeps more high-frequency amplitude. Throws DimensionError on mismatched
/// grids and DomainError when no bin falls inside the band.
HighFreqComparison compare_highfreq(const SpectrumProfile& a, const SpectrumProfile& b, Real band_lo = 0.5,
                                    Real band_hi = 1.0);

/// layer,f_normalized,delta_log_amp rows; -infinity is written as "-inf".
std::string spectrum_csv(const std::vector<SpectrumProfile>& profiles);
/// Whitespace-separated blocks per layer for gnuplot ("?" marks -inf).
std::string spectrum_gnuplot(const std::vector<SpectrumProfile>& profiles);

struct EnergyConstants {
  Real e_mac_pj = 4.6;
  Real e_ac_pj = 0.9;
};

/// Per-sample counts for one synaptic layer.
struct LayerEnergy {
  std::string layer;
  std::size_t timesteps = 0;
  std::size_t neurons = 0;
  std::size_t fan_out = 0;
  /// Fraction of nonzero inputs over timesteps, samples and neurons.
  Real firing_rate = 0.0;
  bool spike_driven = true;
  /// Accumulates triggered by input events (spike-driven layers).
  Real sops = 0.0;
  /// Dense multiply-accumulates (real-valued inputs).
  Real macs = 0.0;
  /// MACs of the same layer in a non-spiking network (one timestep).
  Real ann_macs = 0.0;
  Real energy_mj = 0.0;
};

struct EnergyReport {
  EnergyConstants constants;
  std::vector<LayerEnergy> layers;
  Real total_sops = 0.0;
  Real total_macs = 0.0;
  Real total_ann_macs = 0.0;
  Real total_energy_mj = 0.0;
  Real ann_energy_mj = 0.0;

  nlohmann::json to_json() const;
};

/// Counts per sample from a traced forward. Layers whose inputs are all in
/// {-1, 0, +1} cost E_AC per SOP; any other layer costs E_MAC per MAC over
/// all its timesteps. Throws PreconditionError on an empty trace or a
/// timestep mismatch with `cfg`.
EnergyReport count_sops(const LayerActivationTrace& trace, const ModelConfig& cfg, const EnergyConstants& k = {});

}  // namespace swf
