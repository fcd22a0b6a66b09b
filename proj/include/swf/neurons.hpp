#pragma once

#include <cmath>

#include "swf/tensor.hpp"

namespace swf {

/// How the carried potential is formed after a spike.
///  hard:     V = V_reset * s + beta * U * (1 - s)
///  subtract: V = beta * (U - s * V_th)
/// Ternary layers default to subtraction; `hard` with a ternary polarity
/// reproduces the verbatim symmetric-Heaviside reset rule for comparison.
enum class ResetMode { hard, subtract };

struct NeuronConfig {
  Real v_th = 1.0;
  Real v_reset = 0.0;
  Real beta = 0.5;
  Polarity polarity = Polarity::binary;
  Real surrogate_width = 0.5;
  ResetMode reset = ResetMode::hard;
  /// Replace the step function in the forward pass by the integral of the
  /// rectangular surrogate (a clamped ramp). Backprop then differentiates the
  /// forward exactly, which is what finite-difference gradient checks need.
  bool relaxed = false;

  /// Throws ConfigError unless v_th > 0, 0 < beta <= 1 and surrogate_width > 0.
  void validate() const;

  /// LIF layer used outside the wavelet path.
  static NeuronConfig lif(Real v_th = 1.0, Real beta = 0.5);
  /// Integrate-and-fire with subtraction reset, beta = 1.
  static NeuronConfig integrate_and_fire(Real v_th, Polarity polarity);
};

struct MembraneState {
  DenseTensor u;  ///< U[n], potential after integrating the input
  DenseTensor v;  ///< V[n], potential carried into the next step

  static MembraneState zeros(const Shape& shape);
  void reset();
};

// Scalar dynamics shared by the reference step functions and the batched
// training layers.
namespace neuron {

inline Real ramp(Real x, Real width) {
  const Real r = (x + width) / (2.0 * width);
  return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

inline Real rect(Real x, Real width) { return std::abs(x) < width ? 1.0 / (2.0 * width) : 0.0; }

/// Spike emitted for integrated potential u.
inline Real fire(Real u, const NeuronConfig& c) {
  if (c.relaxed) {
    Real s = ramp(u - c.v_th, c.surrogate_width);
    if (c.polarity == Polarity::ternary) s -= ramp(-u - c.v_th, c.surrogate_width);
    return s;
  }
  if (u - c.v_th >= 0.0) return 1.0;
  if (c.polarity == Polarity::ternary && u <= -c.v_th) return -1.0;
  return 0.0;
}

/// d fire / d u under the rectangular surrogate, symmetric around +-V_th for
/// ternary neurons.
inline Real fire_grad(Real u, const NeuronConfig& c) {
  Real g = rect(u - c.v_th, c.surrogate_width);
  if (c.polarity == Polarity::ternary) g += rect(-u - c.v_th, c.surrogate_width);
  return g;
}

inline Real carry(Real u, Real s, const NeuronConfig& c) {
  if (c.reset == ResetMode::subtract) return c.beta * (u - s * c.v_th);
  return c.v_reset * s + c.beta * u * (1.0 - s);
}

inline Real carry_grad_u(Real s, const NeuronConfig& c) {
  return c.reset == ResetMode::subtract ? c.beta : c.beta * (1.0 - s);
}

inline Real carry_grad_s(Real u, const NeuronConfig& c) {
  return c.reset == ResetMode::subtract ? -c.beta * c.v_th : c.v_reset - c.beta * u;
}

}  // namespace neuron

struct StepOutput {
  SpikeTensor spikes;
  MembraneState state;
};

/// One LIF step with binary output: U = V + I, s = H(U - V_th),
/// V = V_reset s + beta U (1 - s). H(0) = 1.
StepOutput lif_step(const MembraneState& state, const DenseTensor& input, const NeuronConfig& cfg);

/// One ternary integrate-and-fire step: s = +1 for U >= V_th, -1 for
/// U <= -V_th, 0 otherwise. Requires beta == 1.
StepOutput ternary_if_step(const MembraneState& state, const DenseTensor& input, const NeuronConfig& cfg);

/// Rectangular surrogate derivative for the distance of U from threshold.
Real surrogate_grad(Real u_minus_vth, const NeuronConfig& cfg);

/// Runs a freshly reset population over inputs [T, ...]; output step n only
/// depends on inputs 1..n.
SpikeTensor run_sequence(const NeuronConfig& cfg, const DenseTensor& inputs);

}  // namespace swf
