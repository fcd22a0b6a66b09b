#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "swf/errors.hpp"
#include "swf/model.hpp"

using namespace swf;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.depth = 2;
  c.embed_dim = 16;
  c.blocks_k = 2;
  c.timesteps = 2;
  c.input_height = c.input_width = 16;
  c.num_classes = 10;
  return c;
}

DenseTensor random_images(const ModelConfig& c, std::size_t B, std::uint64_t seed) {
  Rng rng(seed);
  DenseTensor x({c.timesteps, B, c.in_channels, c.input_height, c.input_width});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  return x;
}

// Parameter count written out from the architecture: four stem convolutions
// with batch norm, the position-embedding convolution, per block a token mixer
// and a 4x MLP, and the linear head. Convolutions carry no bias.
std::size_t closed_form_params(const ModelConfig& c) {
  const std::size_t D = c.embed_dim, k = c.blocks_k, P = c.tokens();
  const std::size_t w[5] = {c.in_channels, D / 8, D / 4, D / 2, D};
  std::size_t n = 0;
  for (int i = 0; i < 4; ++i) n += w[i] * w[i + 1] * 9 + 2 * w[i + 1];
  n += D * D * 9 + 2 * D;
  std::size_t block = D * 4 * D + 2 * 4 * D + 4 * D * D + 2 * D;
  if (c.mixer == Mixer::fatm) {
    if (!c.has(Ablation::no_haar)) block += P * D * D / k;
    block += D * (D / k) * 9 + 2 * D + D * (D / k) + 2 * D;
  } else {
    block += D * D + 2 * D;
  }
  return n + c.depth * block + D * c.num_classes + c.num_classes;
}

}  // namespace

TEST_CASE("zero-initialised branches make every block an identity on membranes") {
  ModelConfig c = small_config();
  c.zero_init_branches = true;
  for (Mixer m : {Mixer::fatm, Mixer::global_avg})
    for (bool training : {true, false}) {
      c.mixer = m;
      SWformer model(c, 3);
      LayerActivationTrace trace;
      model.forward(random_images(c, 2, 5), training, &trace);
      std::string prev = "sps.U0";
      for (std::size_t l = 1; l <= c.depth; ++l) {
        const std::string cur = "block" + std::to_string(l) + ".membrane";
        CHECK(trace.maps.at(cur) == trace.maps.at(prev));
        prev = cur;
      }
    }
}

TEST_CASE("forward shapes") {
  ModelConfig c = small_config();
  SWformer model(c, 1);
  LayerActivationTrace trace;
  CHECK(model.forward(random_images(c, 3, 2), false, &trace).shape() == Shape{3, 10});
  CHECK(trace.maps.at("block2.spikes").shape() == Shape{2, 3, 16, 4, 4});

  c.input_height = c.input_width = 32;
  SWformer wide(c, 1);
  LayerActivationTrace t2;
  wide.forward(random_images(c, 1, 2), false, &t2);
  CHECK(t2.maps.at("block1.membrane").shape() == Shape{2, 1, 16, 8, 8});

  CHECK_THROWS_AS(model.forward(DenseTensor({2, 1, 1, 8, 8}), false), DimensionError);
}

TEST_CASE("dvs variant runs on two-channel clips") {
  ModelConfig c = small_config();
  c.variant = Variant::dvs;
  c.in_channels = 2;
  c.num_classes = 4;
  SWformer model(c, 4);
  const DenseTensor logits = model.forward(random_images(c, 2, 9), true);
  CHECK(logits.shape() == Shape{2, 4});
  model.backward(DenseTensor({2, 4}, {1, 0, 0, 0, 0, 0, 0, 1}));
}

TEST_CASE("removing the membrane shortcut changes the output") {
  ModelConfig c = small_config();
  const DenseTensor x = random_images(c, 2, 7);
  SWformer a(c, 11);
  c.membrane_shortcut = false;
  SWformer b(c, 11);
  CHECK(!(a.forward(x, true) == b.forward(x, true)));
}

TEST_CASE("seeded construction is deterministic") {
  const ModelConfig c = small_config();
  const DenseTensor x = random_images(c, 2, 7);
  SWformer a(c, 5), b(c, 5), other(c, 6);
  CHECK(a.forward(x, false) == b.forward(x, false));
  CHECK(!(a.forward(x, false) == other.forward(x, false)));
}

TEST_CASE("synapses inside the blocks are driven by spikes") {
  ModelConfig c = small_config();
  for (bool ternary : {true, false}) {
    ModelConfig cc = ternary ? c : with_flag(c, "no_neg");
    SWformer model(cc, 2);
    LayerActivationTrace trace;
    model.forward(random_images(cc, 2, 3), true, &trace);
    std::size_t fl_count = 0;
    for (const SynapseStat& s : trace.synapses) {
      INFO(s.layer);
      if (s.layer == "sps.conv1" || s.layer == "head") CHECK(!s.spike_valued);
      else CHECK(s.spike_valued);
      if (s.layer.find(".fl.") != std::string::npos) ++fl_count;
    }
    CHECK(fl_count == 5 * c.depth);
  }
}

TEST_CASE("no_haar drops the frequency layer") {
  const ModelConfig c = with_flag(small_config(), "no_haar");
  SWformer model(c, 1);
  CHECK(model.fl_param_count() == 0);
  LayerActivationTrace trace;
  model.forward(random_images(c, 1, 1), false, &trace);
  CHECK(trace.maps.count("block1.fl") == 0);
  CHECK_THROWS_AS(with_flag(c, "no_such_flag"), ConfigError);
}

TEST_CASE("exact-mode frequency layer with identity blocks is the identity") {
  ModelConfig c = small_config();
  c.wavelet_mode = WaveletMode::exact;
  Rng rng(4);
  FrequencyLayer fl("f", c);
  fl.init(rng, true);
  const std::size_t P = c.tokens(), bd = c.embed_dim / c.blocks_k;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t l = 0; l < c.blocks_k; ++l)
      for (std::size_t i = 0; i < bd; ++i) fl.weights.weight.value[((p * c.blocks_k + l) * bd + i) * bd + i] = 1.0;
  DenseTensor x({4, c.embed_dim, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  const DenseTensor y = fl.forward(x, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(y[i] - x[i]) < 1e-12);

  c.mask_dc = true;
  FrequencyLayer masked("m", c);
  masked.weights.weight.value = fl.weights.weight.value;
  const DenseTensor z = masked.forward(x, nullptr);
  for (std::size_t plane = 0; plane < x.size() / 16; ++plane) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 16; ++i) mean += x[plane * 16 + i] / 16.0;
    for (std::size_t i = 0; i < 16; ++i) REQUIRE(std::abs(z[plane * 16 + i] - (x[plane * 16 + i] - mean)) < 1e-12);
  }
}

TEST_CASE("checkpoint save, load and state copy") {
  const ModelConfig c = small_config();
  SWformer model(c, 8);
  const DenseTensor x = random_images(c, 2, 1);
  model.forward(x, true);  // moves the running statistics off their defaults
  const DenseTensor ref = model.forward(x, false);
  const auto dir = std::filesystem::temp_directory_path() / "swf_unit_ckpt";
  std::filesystem::remove_all(dir);
  model.save(dir);
  SWformer back = SWformer::load(dir);
  CHECK(back.forward(x, false) == ref);

  SWformer fresh(c, 99);
  fresh.copy_state_from(model);
  CHECK(fresh.forward(x, false) == ref);

  SWformer other(with_flag(c, "no_haar"), 8);
  CHECK_THROWS_AS(other.copy_state_from(model), DimensionError);

  std::filesystem::remove(dir / "params.swft");
  CHECK_THROWS_AS(SWformer::load(dir), FormatError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(SWformer::load(dir), FormatError);
}

TEST_CASE("parameter counts follow the closed form") {
  ModelConfig c = small_config();
  for (std::size_t k : {1, 2, 4}) {
    c.blocks_k = k;
    SWformer m(c, 0);
    CHECK(m.param_count() == closed_form_params(c));
    CHECK(m.fl_param_count() == c.depth * c.tokens() * c.embed_dim * c.embed_dim / k);
  }
  c.mixer = Mixer::global_avg;
  SWformer g(c, 0);
  CHECK(g.param_count() == closed_form_params(c));
  CHECK(g.fl_param_count() == 0);
}

TEST_CASE("model configuration validation") {
  ModelConfig c = small_config();
  c.embed_dim = 12;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.blocks_k = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.input_height = c.input_width = 24;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.wavelet_vth = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(mixer_from_string("attention"), ConfigError);
}

TEST_CASE("relaxed model backward matches finite differences below the ramp kinks") {
  // The relaxed forward is piecewise linear; a 1e-6 step stays between kinks.
  ModelConfig c = small_config();
  c.depth = 1;
  c.embed_dim = 8;
  c.relaxed = true;
  SWformer model(c, 606);
  const DenseTensor x = random_images(c, 2, 606);
  const std::vector<int> labels{3, 7};
  auto loss = [&] {
    const DenseTensor logits = model.forward(x, true);
    double l = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      double z = 0.0;
      for (std::size_t k = 0; k < 10; ++k) z += std::exp(logits[b * 10 + k]);
      l += (std::log(z) - logits[b * 10 + labels[b]]) / 2.0;
    }
    return l;
  };
  model.zero_grad();
  const DenseTensor logits = model.forward(x, true);
  DenseTensor g(logits.shape());
  for (std::size_t b = 0; b < 2; ++b) {
    double z = 0.0;
    for (std::size_t k = 0; k < 10; ++k) z += std::exp(logits[b * 10 + k]);
    for (std::size_t k = 0; k < 10; ++k)
      g[b * 10 + k] = (std::exp(logits[b * 10 + k]) / z - (static_cast<int>(k) == labels[b] ? 1.0 : 0.0)) / 2.0;
  }
  model.backward(g);
  Rng rng(1);
  for (Param* p : model.params())
    for (int s = 0; s < 4; ++s) {
      const std::size_t i = rng.below(p->value.size());
      const double keep = p->value[i];
      p->value[i] = keep + 1e-6;
      const double up = loss();
      p->value[i] = keep - 1e-6;
      const double down = loss();
      p->value[i] = keep;
      const double fd = (up - down) / 2e-6, an = p->grad[i];
      INFO(p->name << "[" << i << "] analytic " << an << " numeric " << fd);
      CHECK(std::abs(an - fd) <= 2e-2 * std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
}
