#include "swf/analysis.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>

#include "swf/errors.hpp"

namespace swf {

namespace {

using Complex = std::complex<Real>;

// Unnormalized 2D DFT magnitude of an S x S real image, DC at index 0.
// Amplitudes below 1e-12 of the image's L1 norm (an upper bound on every
// coefficient) are round-off and come back as exact zeros.
std::vector<Real> dft2_magnitude(const std::vector<Real>& img, std::size_t S) {
  Real l1 = 0.0;
  for (Real v : img) l1 += std::abs(v);
  const Real floor = 1e-12 * l1;
  std::vector<Complex> twiddle(S);
  for (std::size_t k = 0; k < S; ++k)
    twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<Real>(k) / static_cast<Real>(S));
  std::vector<Complex> rows(S * S);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t v = 0; v < S; ++v) {
      Complex acc = 0.0;
      for (std::size_t x = 0; x < S; ++x) acc += img[y * S + x] * twiddle[(v * x) % S];
      rows[y * S + v] = acc;
    }
  std::vector<Real> mag(S * S);
  for (std::size_t u = 0; u < S; ++u)
    for (std::size_t v = 0; v < S; ++v) {
      Complex acc = 0.0;
      for (std::size_t y = 0; y < S; ++y) acc += rows[y * S + v] * twiddle[(u * y) % S];
      const Real a = std::abs(acc);
      mag[u * S + v] = a > floor ? a : 0.0;
    }
  return mag;
}

std::string num(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Real SpectrumProfile::log_magnitude(std::size_t row, std::size_t col) const {
  return std::log(magnitude.at(row * side + col));
}

SpectrumProfile spectrum_of(const DenseTensor& map, const std::string& layer) {
  if (map.rank() != 5) throw DimensionError("spectrum: map '" + layer + "' must be [T, B, C, H, W]");
  const std::size_t T = map.extent(0), B = map.extent(1), C = map.extent(2), S = map.extent(3);
  if (map.extent(4) != S) throw DimensionError("spectrum: map '" + layer + "' is not square");
  if (S < 2) throw DimensionError("spectrum: map '" + layer + "' needs a side of at least 2");
  bool any = false;
  for (Real v : map.data())
    if (v != 0.0) {
      any = true;
      break;
    }
  if (!any) throw DomainError("spectrum: map '" + layer + "' is all zero, relative profile undefined");

  const std::size_t plane = S * S;
  std::vector<Real> mean_mag(plane, 0.0);
  std::vector<Real> img(plane);
  const Real* d = map.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      std::fill(img.begin(), img.end(), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        const Real* src = d + ((t * B + b) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) img[i] += src[i];
      }
      for (Real& v : img) v /= static_cast<Real>(T);
      const auto mag = dft2_magnitude(img, S);
      for (std::size_t i = 0; i < plane; ++i) mean_mag[i] += mag[i];
    }
  for (Real& v : mean_mag) v /= static_cast<Real>(B * C);

  SpectrumProfile p;
  p.layer = layer;
  p.side = S;
  p.magnitude.assign(plane, 0.0);
  const std::size_t half = S / 2;
  std::vector<Real> bin_sum(half + 1, 0.0);
  std::vector<std::size_t> bin_count(half + 1, 0);
  for (std::size_t u = 0; u < S; ++u)
    for (std::size_t v = 0; v < S; ++v) {
      p.magnitude[((u + half) % S) * S + (v + half) % S] = mean_mag[u * S + v];
      const Real fu = static_cast<Real>(std::min(u, S - u)), fv = static_cast<Real>(std::min(v, S - v));
      const auto bin = static_cast<std::size_t>(std::lround(std::sqrt(fu * fu + fv * fv)));
      if (bin > half) continue;
      bin_sum[bin] += mean_mag[u * S + v];
      ++bin_count[bin];
    }
  if (bin_sum[0] == 0.0)
    throw DomainError("spectrum: map '" + layer + "' has zero DC amplitude, relative profile undefined");
  const Real log_dc = std::log(bin_sum[0] / static_cast<Real>(bin_count[0]));
  for (std::size_t b = 0; b <= half; ++b) {
    p.frequency.push_back(static_cast<Real>(b) / static_cast<Real>(half));
    const Real a = bin_sum[b] / static_cast<Real>(bin_count[b]);
    if (a > 0.0)
      p.delta.emplace_back(std::log(a) - log_dc);
    else
      p.delta.emplace_back(std::nullopt);
  }
  p.delta[0] = 0.0;
  return p;
}

SpectrumProfile spectrum(const LayerActivationTrace& trace, const std::string& layer) {
  const auto it = trace.maps.find(layer);
  if (it == trace.maps.end()) throw PreconditionError("spectrum: layer '" + layer + "' is not in the trace");
  return spectrum_of(it->second, layer);
}

std::string HighFreqComparison::to_string() const {
  switch (kind) {
    case Kind::finite: return num(value);
    case Kind::plus_inf: return "+inf";
    case Kind::minus_inf: return "-inf";
    case Kind::undefined: return "undefined";
  }
  return "undefined";
}

HighFreqComparison compare_highfreq(const SpectrumProfile& a, const SpectrumProfile& b, Real band_lo, Real band_hi) {
  if (a.frequency != b.frequency)
    throw DimensionError("compare_highfreq: frequency grids differ (" + std::to_string(a.frequency.size()) + " vs " +
                         std::to_string(b.frequency.size()) + " bins)");
  // Mean over the band; nullopt when any bin is -inf.
  auto band_mean = [&](const SpectrumProfile& p) -> std::optional<Real> {
    Real sum = 0.0;
    std::size_t n = 0;
    bool neg_inf = false;
    for (std::size_t i = 0; i < p.frequency.size(); ++i) {
      if (p.frequency[i] < band_lo || p.frequency[i] > band_hi) continue;
      ++n;
      if (p.delta[i])
        sum += *p.delta[i];
      else
        neg_inf = true;
    }
    if (n == 0) throw DomainError("compare_highfreq: no frequency bin inside [" + num(band_lo) + ", " + num(band_hi) + "]");
    if (neg_inf) return std::nullopt;
    return sum / static_cast<Real>(n);
  };
  const auto ma = band_mean(a), mb = band_mean(b);
  HighFreqComparison r;
  using K = HighFreqComparison::Kind;
  if (ma && mb) {
    r.value = *ma - *mb;
  } else if (ma) {
    r.kind = K::plus_inf;
  } else if (mb) {
    r.kind = K::minus_inf;
  } else {
    r.kind = K::undefined;
  }
  return r;
}

std::string spectrum_csv(const std::vector<SpectrumProfile>& profiles) {
  std::string out = "layer,f_normalized,delta_log_amp\n";
  for (const auto& p : profiles)
    for (std::size_t i = 0; i < p.frequency.size(); ++i)
      out += p.layer + "," + num(p.frequency[i]) + "," + (p.delta[i] ? num(*p.delta[i]) : "-inf") + "\n";
  return out;
}

std::string spectrum_gnuplot(const std::vector<SpectrumProfile>& profiles) {
  std::string out;
  for (const auto& p : profiles) {
    out += "# " + p.layer + "\n# f_normalized delta_log_amp\n";
    for (std::size_t i = 0; i < p.frequency.size(); ++i)
      out += num(p.frequency[i]) + " " + (p.delta[i] ? num(*p.delta[i]) : "?") + "\n";
    out += "\n\n";
  }
  return out;
}

EnergyReport count_sops(const LayerActivationTrace& trace, const ModelConfig& cfg, const EnergyConstants& k) {
  if (trace.synapses.empty() || trace.batch == 0)
    throw PreconditionError("count_sops: trace holds no synapse statistics (run a traced forward first)");
  if (trace.timesteps != cfg.timesteps)
    throw PreconditionError("count_sops: trace has T=" + std::to_string(trace.timesteps) + ", model has T=" +
                            std::to_string(cfg.timesteps));
  EnergyReport r;
  r.constants = k;
  const auto B = static_cast<Real>(trace.batch);
  for (const SynapseStat& s : trace.synapses) {
    LayerEnergy e;
    e.layer = s.layer;
    e.timesteps = s.timesteps;
    e.neurons = s.neurons;
    e.fan_out = s.fan_out;
    e.spike_driven = s.spike_valued;
    const auto slots = static_cast<Real>(s.timesteps) * B * static_cast<Real>(s.neurons);
    e.firing_rate = slots > 0 ? static_cast<Real>(s.nonzero) / slots : 0.0;
    const Real dense = static_cast<Real>(s.neurons) * static_cast<Real>(s.fan_out);
    e.ann_macs = dense;
    if (e.spike_driven) {
      e.sops = static_cast<Real>(s.nonzero) * static_cast<Real>(s.fan_out) / B;
      e.energy_mj = e.sops * k.e_ac_pj * 1e-9;
    } else {
      e.macs = static_cast<Real>(s.timesteps) * dense;
      e.energy_mj = e.macs * k.e_mac_pj * 1e-9;
    }
    r.layers.push_back(e);
  }
  for (const auto& e : r.layers) {
    r.total_sops += e.sops;
    r.total_macs += e.macs;
    r.total_ann_macs += e.ann_macs;
    r.total_energy_mj += e.energy_mj;
  }
  r.ann_energy_mj = r.total_ann_macs * k.e_mac_pj * 1e-9;
  return r;
}

nlohmann::json EnergyReport::to_json() const {
  nlohmann::json j;
  j["constants"] = {{"e_mac_pj", constants.e_mac_pj}, {"e_ac_pj", constants.e_ac_pj}};
  j["units"] = {{"counts", "per sample"}, {"energy", "mJ"}};
  j["layers"] = nlohmann::json::array();
  for (const auto& e : layers)
    j["layers"].push_back({{"layer", e.layer},
                           {"timesteps", e.timesteps},
                           {"neurons", e.neurons},
                           {"fan_out", e.fan_out},
                           {"firing_rate", e.firing_rate},
                           {"spike_driven", e.spike_driven},
                           {"sops", e.sops},
                           {"macs", e.macs},
                           {"ann_macs", e.ann_macs},
                           {"energy_mj", e.energy_mj}});
  j["totals"] = {{"sops", total_sops},
                 {"macs", total_macs},
                 {"ann_macs", total_ann_macs},
                 {"energy_mj", total_energy_mj},
                 {"ann_energy_mj", ann_energy_mj}};
  return j;
}

}  // namespace swf
