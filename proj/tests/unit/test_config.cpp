#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "swf/config.hpp"
#include "swf/errors.hpp"

using namespace swf;
using nlohmann::json;

TEST_CASE("shipped toy config loads") {
  const RunConfig c = load_run_config(std::filesystem::path(SWF_SOURCE_DIR) / "configs" / "toy_mnist.json");
  CHECK(c.model.depth == 2);
  CHECK(c.model.embed_dim == 32);
  CHECK(c.model.timesteps == 4);
  CHECK(c.train.learning_rate == 0.01);
  CHECK(c.data.image_side == 16);
  CHECK(c.analysis.samples == 64);
  // Defaults survive for keys the file leaves out.
  CHECK(c.analysis.e_mac_pj == 4.6);
  CHECK(c.model.wavelet_vth == 0.5);
}

TEST_CASE("config json round trip") {
  RunConfig c;
  c.model.mixer = Mixer::global_avg;
  c.model.ablations = {Ablation::no_neg, Ablation::no_pool};
  c.model.wavelet_vth = 1.0;
  c.train.optimizer = OptimizerKind::sgd_momentum;
  c.data.kind = "moving_edge";
  const json j = run_config_to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(run_config_to_json(back) == j);
  CHECK(back.model.has(Ablation::no_pool));
  CHECK(back.model.mixer == Mixer::global_avg);
}

TEST_CASE("overrides") {
  json j = run_config_to_json(RunConfig{});
  apply_override(j, "train.epochs=7");
  apply_override(j, "learning_rate=0.5");
  apply_override(j, "mixer=global_avg");
  apply_override(j, "model.relaxed=true");
  const RunConfig c = run_config_from_json(j);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.learning_rate == 0.5);
  CHECK(c.model.mixer == Mixer::global_avg);
  CHECK(c.model.relaxed);

  CHECK_THROWS_AS(apply_override(j, "epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "train.nonsense=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "nonsense=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "epochs=many"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "epochs=-2"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "relaxed=3"), ConfigError);
}

TEST_CASE("invalid configs are rejected") {
  json j = run_config_to_json(RunConfig{});
  SUBCASE("unknown key") {
    j["model"]["attention_heads"] = 8;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("unknown section") {
    j["extras"] = json::object();
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("wrong type") {
    j["train"]["epochs"] = "ten";
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("structural") {
    j["model"]["blocks_k"] = 3;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("band") {
    j["analysis"]["band_lo"] = 0.9;
    j["analysis"]["band_hi"] = 0.2;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("data kind") {
    j["data"]["kind"] = "tfrecord";
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
}

TEST_CASE("config files") {
  const auto p = std::filesystem::temp_directory_path() / "swf_unit_bad.json";
  {
    std::ofstream f(p);
    f << "{ \"model\": ";
  }
  CHECK_THROWS_AS(load_run_config(p), ConfigError);
  std::filesystem::remove(p);
  CHECK_THROWS_AS(load_run_config(p), ConfigError);
}
