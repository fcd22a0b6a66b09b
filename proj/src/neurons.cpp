#include "swf/neurons.hpp"

#include "swf/errors.hpp"

namespace swf {

void NeuronConfig::validate() const {
  if (!(v_th > 0.0)) throw ConfigError("neuron threshold must be positive");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("neuron beta must lie in (0, 1]");
  if (!(surrogate_width > 0.0)) throw ConfigError("surrogate width must be positive");
}

NeuronConfig NeuronConfig::lif(Real v_th, Real beta) {
  NeuronConfig c;
  c.v_th = v_th;
  c.beta = beta;
  return c;
}

NeuronConfig NeuronConfig::integrate_and_fire(Real v_th, Polarity polarity) {
  NeuronConfig c;
  c.v_th = v_th;
  c.beta = 1.0;
  c.polarity = polarity;
  c.reset = ResetMode::subtract;
  return c;
}

MembraneState MembraneState::zeros(const Shape& shape) { return {DenseTensor(shape), DenseTensor(shape)}; }

void MembraneState::reset() {
  u.fill(0.0);
  v.fill(0.0);
}

namespace {

StepOutput step(const MembraneState& state, const DenseTensor& input, const NeuronConfig& cfg) {
  if (state.v.shape() != input.shape())
    throw DimensionError("neuron input " + shape_string(input.shape()) + " does not match state " +
                         shape_string(state.v.shape()));
  if (cfg.relaxed) throw ConfigError("spike-valued step functions need a non-relaxed neuron");
  StepOutput out{SpikeTensor(input.shape(), cfg.polarity), MembraneState::zeros(input.shape())};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const Real u = state.v[i] + input[i];
    const Real s = neuron::fire(u, cfg);
    out.state.u[i] = u;
    out.state.v[i] = neuron::carry(u, s, cfg);
    out.spikes.set(i, static_cast<std::int8_t>(s));
  }
  return out;
}

}  // namespace

StepOutput lif_step(const MembraneState& state, const DenseTensor& input, const NeuronConfig& cfg) {
  cfg.validate();
  if (cfg.polarity != Polarity::binary) throw ConfigError("lif_step expects a binary neuron");
  return step(state, input, cfg);
}

StepOutput ternary_if_step(const MembraneState& state, const DenseTensor& input, const NeuronConfig& cfg) {
  cfg.validate();
  if (cfg.polarity != Polarity::ternary) throw ConfigError("ternary_if_step expects a ternary neuron");
  if (cfg.beta != 1.0) throw ConfigError("ternary integrate-and-fire requires beta == 1");
  return step(state, input, cfg);
}

Real surrogate_grad(Real u_minus_vth, const NeuronConfig& cfg) {
  return neuron::rect(u_minus_vth, cfg.surrogate_width);
}

SpikeTensor run_sequence(const NeuronConfig& cfg, const DenseTensor& inputs) {
  cfg.validate();
  if (inputs.rank() < 1 || inputs.extent(0) == 0) throw DimensionError("run_sequence needs inputs [T, ...]");
  const std::size_t T = inputs.extent(0);
  const std::size_t n = inputs.size() / T;
  Shape step_shape(inputs.shape().begin() + 1, inputs.shape().end());
  if (step_shape.empty()) step_shape = {1};
  auto state = MembraneState::zeros(step_shape);
  SpikeTensor out(inputs.shape(), cfg.polarity);
  for (std::size_t t = 0; t < T; ++t) {
    DenseTensor current(step_shape);
    for (std::size_t i = 0; i < n; ++i) current[i] = inputs[t * n + i];
    auto r = cfg.polarity == Polarity::ternary && cfg.beta == 1.0 ? ternary_if_step(state, current, cfg)
                                                                  : step(state, current, cfg);
    for (std::size_t i = 0; i < n; ++i) out.set(t * n + i, r.spikes[i]);
    state = std::move(r.state);
  }
  return out;
}

}  // namespace swf
