#include <cmath>

#include "doctest.h"
#include "swf/errors.hpp"
#include "swf/training.hpp"

using namespace swf;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.depth = 1;
  c.embed_dim = 8;
  c.blocks_k = 2;
  c.timesteps = 2;
  c.in_channels = 2;
  c.num_classes = 4;
  c.variant = Variant::dvs;
  return c;
}

Dataset tiny_data() {
  DataConfig d;
  d.kind = "moving_edge";
  d.synthetic_count = 16;
  d.val_fraction = 0.25;
  return load_dataset(d, 2, 3);
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 4;
  t.learning_rate = 1e-2;
  t.seed = 5;
  return t;
}

std::vector<DenseTensor> snapshot(SWformer& m) {
  std::vector<DenseTensor> out;
  for (Param* p : m.params()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("cross entropy") {
  const DenseTensor flat({2, 4});
  DenseTensor grad;
  CHECK(cross_entropy(flat, {0, 3}, &grad) == doctest::Approx(std::log(4.0)));
  CHECK(grad[0] == doctest::Approx((0.25 - 1.0) / 2.0));
  CHECK(grad[1] == doctest::Approx(0.25 / 2.0));

  // Large logits stay finite; the gradient matches central differences.
  DenseTensor z({1, 3}, {800.0, 1.0, -3.0});
  CHECK(std::isfinite(cross_entropy(z, {1})));
  Rng rng(1);
  DenseTensor x({2, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
  cross_entropy(x, {2, 0}, &grad);
  for (std::size_t i = 0; i < x.size(); ++i) {
    DenseTensor up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    CHECK(grad[i] == doctest::Approx((cross_entropy(up, {2, 0}) - cross_entropy(down, {2, 0})) / 2e-6).epsilon(1e-6));
  }
  CHECK_THROWS_AS(cross_entropy(flat, {0}), DimensionError);
  CHECK_THROWS_AS(cross_entropy(flat, {0, 4}), DomainError);
}

TEST_CASE("batch assembly") {
  Split s;
  s.push(DenseTensor({1, 2, 2}, {1, 2, 3, 4}), 0);
  s.push(DenseTensor({1, 2, 2}, {5, 6, 7, 8}), 1);
  const DenseTensor b = make_batch(s, {1, 0}, 3);
  REQUIRE(b.shape() == Shape{3, 2, 1, 2, 2});
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(b[(t * 2 + 0) * 4] == 5.0);
    CHECK(b[(t * 2 + 1) * 4 + 3] == 4.0);
  }
  Split clips;
  clips.push(DenseTensor({2, 2, 1, 1}), 0);
  CHECK(make_batch(clips, {0}, 2).shape() == Shape{2, 1, 2, 1, 1});
  CHECK_THROWS_AS(make_batch(clips, {0}, 3), DimensionError);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const Dataset data = tiny_data();
  TrainConfig t = tiny_train();
  t.learning_rate = 0.0;
  t.epochs = 1;
  SWformer fresh(tiny_model(), t.seed);
  const auto before = snapshot(fresh);
  TrainResult r = train(tiny_model(), t, data);
  const auto after = snapshot(r.model);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("seeded training is deterministic") {
  const Dataset data = tiny_data();
  TrainResult a = train(tiny_model(), tiny_train(), data);
  TrainResult b = train(tiny_model(), tiny_train(), data);
  CHECK(a.record.to_csv() == b.record.to_csv());
  CHECK(a.record.to_json() == b.record.to_json());
  const auto pa = snapshot(a.model), pb = snapshot(b.model);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  // One train and one val row per epoch, then the test row.
  REQUIRE(a.record.rows.size() == 5);
  CHECK(a.record.rows.back().split == "test");
  CHECK(a.record.rows.back().epoch == 2);
  CHECK(a.record.to_csv().rfind("epoch,split,loss,acc\n", 0) == 0);
  for (const EpochRow& r : a.record.rows) CHECK((r.accuracy >= 0.0 && r.accuracy <= 1.0));
}

TEST_CASE("evaluation is read-only and repeatable") {
  const Dataset data = tiny_data();
  SWformer m(tiny_model(), 2);
  const auto before = snapshot(m);
  std::vector<DenseTensor> stats;
  for (auto& [name, t] : m.buffers()) stats.push_back(*t);
  const EvalResult a = evaluate(m, data.test, 3);
  const EvalResult b = evaluate(m, data.test, 64);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  const auto after = snapshot(m);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  std::size_t i = 0;
  for (auto& [name, t] : m.buffers()) CHECK(*t == stats[i++]);
}

TEST_CASE("epoch callback can stop training") {
  const Dataset data = tiny_data();
  TrainConfig t = tiny_train();
  t.epochs = 5;
  std::size_t calls = 0;
  TrainResult r = train(tiny_model(), t, data, [&](const EpochRow&, SWformer&) { return ++calls < 1; });
  CHECK(calls == 1);
  CHECK(r.record.rows.back().epoch == 1);
}

TEST_CASE("class count mismatch is a config error") {
  ModelConfig m = tiny_model();
  m.num_classes = 10;
  CHECK_THROWS_AS(train(m, tiny_train(), tiny_data()), ConfigError);
}

TEST_CASE("ablation suite") {
  const Dataset data = tiny_data();
  TrainConfig t = tiny_train();
  t.epochs = 1;
  const auto only = run_ablation_suite(tiny_model(), {}, t, data);
  REQUIRE(only.size() == 1);
  CHECK(only[0].label == "base");
  const auto rows = run_ablation_suite(tiny_model(), {"no_haar"}, t, data);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].label == "no_haar");
  CHECK(rows[0].record.to_json() == only[0].record.to_json());
  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("label,test_accuracy,test_loss,final_train_loss,final_train_acc\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
