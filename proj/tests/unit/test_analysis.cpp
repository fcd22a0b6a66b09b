#include <cmath>

#include "doctest.h"
#include "swf/analysis.hpp"
#include "swf/errors.hpp"

using namespace swf;

namespace {

DenseTensor noise_maps(Rng& rng, std::size_t B, std::size_t side) {
  DenseTensor m({1, B, 1, side, side});
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-1.0, 1.0);
  return m;
}

SpectrumProfile with_deltas(std::vector<std::optional<Real>> d) {
  SpectrumProfile p;
  p.side = 2 * (d.size() - 1);
  for (std::size_t b = 0; b < d.size(); ++b) p.frequency.push_back(static_cast<Real>(b) / static_cast<Real>(d.size() - 1));
  p.delta = std::move(d);
  return p;
}

}  // namespace

TEST_CASE("spectrum of a constant map has only DC") {
  DenseTensor m({2, 1, 3, 8, 8});
  m.fill(0.4);
  const SpectrumProfile p = spectrum_of(m);
  REQUIRE(p.delta.size() == 5);
  CHECK(p.frequency.back() == 1.0);
  CHECK(*p.delta[0] == 0.0);
  for (std::size_t b = 1; b < p.delta.size(); ++b) CHECK(!p.delta[b].has_value());
}

TEST_CASE("spectrum of a point map is flat") {
  DenseTensor m({1, 1, 1, 8, 8});
  m[3 * 8 + 5] = 2.0;
  const SpectrumProfile p = spectrum_of(m);
  for (const auto& d : p.delta) CHECK(std::abs(*d) < 1e-12);
}

TEST_CASE("white noise has a flat spectrum") {
  Rng rng(12);
  const SpectrumProfile p = spectrum_of(noise_maps(rng, 100, 64));
  for (const auto& d : p.delta) {
    REQUIRE(d.has_value());
    CHECK(std::abs(*d) <= 0.5);
  }
}

TEST_CASE("spectrum is invariant to circular translation") {
  Rng rng(2);
  const DenseTensor m = noise_maps(rng, 3, 8);
  DenseTensor shifted(m.shape());
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) shifted[b * 64 + ((i + 3) % 8) * 8 + (j + 5) % 8] = m[b * 64 + i * 8 + j];
  const SpectrumProfile a = spectrum_of(m), b = spectrum_of(shifted);
  for (std::size_t i = 0; i < a.delta.size(); ++i) CHECK(*a.delta[i] == doctest::Approx(*b.delta[i]).epsilon(1e-9));
}

TEST_CASE("spectrum input checks") {
  CHECK_THROWS_AS(spectrum_of(DenseTensor({1, 1, 1, 4, 8})), DimensionError);
  CHECK_THROWS_AS(spectrum_of(DenseTensor({1, 1, 1, 1, 1})), DimensionError);
  CHECK_THROWS_AS(spectrum_of(DenseTensor({1, 1, 1, 4, 4})), DomainError);
  DenseTensor zero_dc({1, 1, 1, 2, 2}, {1, -1, -1, 1});
  CHECK_THROWS_AS(spectrum_of(zero_dc), DomainError);
  CHECK_THROWS_AS(spectrum(LayerActivationTrace{}, "block1.membrane"), PreconditionError);
}

TEST_CASE("high-frequency comparison") {
  Rng rng(5);
  const SpectrumProfile a = spectrum_of(noise_maps(rng, 2, 8));
  DenseTensor smooth({1, 2, 1, 8, 8});
  for (std::size_t i = 0; i < smooth.size(); ++i) smooth[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i % 8) * 0.8);
  const SpectrumProfile b = spectrum_of(smooth);

  const HighFreqComparison ab = compare_highfreq(a, b), ba = compare_highfreq(b, a);
  REQUIRE(ab.kind == HighFreqComparison::Kind::finite);
  CHECK(ab.value > 0.0);
  CHECK(ab.value == doctest::Approx(-ba.value).epsilon(1e-12));
  CHECK(compare_highfreq(a, a).value == 0.0);

  // Band [0.5, 1] on side 4 covers bins 1 and 2.
  const auto finite = with_deltas({0.0, -1.0, -3.0});
  const auto silent = with_deltas({0.0, -1.0, std::nullopt});
  CHECK(compare_highfreq(finite, finite).kind == HighFreqComparison::Kind::finite);
  CHECK(compare_highfreq(finite, with_deltas({0.0, 1.0, 1.0})).value == doctest::Approx(-3.0));
  CHECK(compare_highfreq(finite, silent).kind == HighFreqComparison::Kind::plus_inf);
  CHECK(compare_highfreq(silent, finite).kind == HighFreqComparison::Kind::minus_inf);
  CHECK(compare_highfreq(silent, silent).kind == HighFreqComparison::Kind::undefined);

  CHECK_THROWS_AS(compare_highfreq(finite, a), DimensionError);
  CHECK_THROWS_AS(compare_highfreq(finite, finite, 0.6, 0.9), DomainError);
}

TEST_CASE("spectrum exports") {
  auto p = with_deltas({0.0, -0.25, std::nullopt});
  p.layer = "x";
  const std::string csv = spectrum_csv({p});
  CHECK(csv == "layer,f_normalized,delta_log_amp\nx,0,0\nx,0.5,-0.25\nx,1,-inf\n");
  CHECK(spectrum_gnuplot({p}).find('?') != std::string::npos);
}

namespace {

LayerActivationTrace energy_trace(std::size_t T) {
  LayerActivationTrace t;
  t.timesteps = T;
  t.batch = 2;
  DenseTensor spikes({T * 2, 3});
  // Per timestep: sample 0 fires neuron 0, sample 1 fires neurons 1 and 2 (one negative).
  for (std::size_t s = 0; s < T; ++s) {
    spikes[(s * 2 + 0) * 3 + 0] = 1;
    spikes[(s * 2 + 1) * 3 + 1] = 1;
    spikes[(s * 2 + 1) * 3 + 2] = -1;
  }
  t.record_synapse("spiking", spikes, 7);
  DenseTensor real({T * 2, 3});
  real.fill(0.5);
  t.record_synapse("dense", real, 4);
  t.record_synapse("silent", DenseTensor({T * 2, 5}), 9);
  return t;
}

}  // namespace

TEST_CASE("energy accounting") {
  ModelConfig cfg;
  cfg.timesteps = 2;
  const EnergyReport r = count_sops(energy_trace(2), cfg);
  REQUIRE(r.layers.size() == 3);
  const LayerEnergy& sp = r.layers[0];
  CHECK(sp.spike_driven);
  CHECK(sp.sops == 6.0 * 7.0 / 2.0);
  CHECK(sp.firing_rate == doctest::Approx(0.5));
  CHECK(sp.energy_mj == doctest::Approx(21.0 * 0.9e-9));
  const LayerEnergy& de = r.layers[1];
  CHECK(!de.spike_driven);
  CHECK(de.macs == 2.0 * 3.0 * 4.0);
  CHECK(de.ann_macs == 12.0);
  CHECK(de.energy_mj == doctest::Approx(24.0 * 4.6e-9));
  CHECK(r.layers[2].sops == 0.0);
  CHECK(r.layers[2].energy_mj == 0.0);

  Real sops = 0, macs = 0, energy = 0, ann = 0;
  for (const auto& e : r.layers) {
    sops += e.sops;
    macs += e.macs;
    energy += e.energy_mj;
    ann += e.ann_macs;
  }
  CHECK(r.total_sops == sops);
  CHECK(r.total_macs == macs);
  CHECK(r.total_energy_mj == energy);
  CHECK(r.total_ann_macs == ann);
  CHECK(r.ann_energy_mj == doctest::Approx(ann * 4.6e-9));
  CHECK(r.to_json()["layers"].size() == 3);

  // Same firing pattern over twice the timesteps: SOPs and MACs double.
  cfg.timesteps = 4;
  const EnergyReport r4 = count_sops(energy_trace(4), cfg);
  CHECK(r4.total_sops == 2.0 * r.total_sops);
  CHECK(r4.total_macs == 2.0 * r.total_macs);
  CHECK(r4.total_ann_macs == r.total_ann_macs);

  CHECK_THROWS_AS(count_sops(energy_trace(2), cfg), PreconditionError);
  CHECK_THROWS_AS(count_sops(LayerActivationTrace{}, cfg), PreconditionError);
}

TEST_CASE("saturated firing reaches the dense bound") {
  LayerActivationTrace t;
  t.timesteps = 3;
  t.batch = 1;
  DenseTensor ones({3, 4});
  ones.fill(1.0);
  t.record_synapse("s", ones, 5);
  ModelConfig cfg;
  cfg.timesteps = 3;
  const EnergyReport r = count_sops(t, cfg);
  CHECK(r.total_sops == 3.0 * 4.0 * 5.0);
  CHECK(r.layers[0].firing_rate == 1.0);
}

TEST_CASE("energy totals on a traced model") {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.timesteps = 2;
  SWformer m(cfg, 1);
  Rng rng(3);
  DenseTensor x({2, 2, 1, 16, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  LayerActivationTrace trace;
  m.forward(x, false, &trace);
  const EnergyReport r = count_sops(trace, cfg);
  Real sops = 0, energy = 0;
  for (const auto& e : r.layers) {
    sops += e.sops;
    energy += e.energy_mj;
  }
  CHECK(r.total_sops == sops);
  CHECK(r.total_energy_mj == energy);
  CHECK(r.layers.front().layer == "sps.conv1");
  CHECK(!r.layers.front().spike_driven);
}
