#include "swf/wavelet.hpp"

#include <cmath>
#include <limits>

#include "swf/errors.hpp"
#include "swf/kernels.hpp"

namespace swf {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::string to_string(TransformMode m) {
  switch (m) {
    case TransformMode::exact: return "exact";
    case TransformMode::spiking_binary: return "spiking_binary";
    case TransformMode::spiking_ternary: return "spiking_ternary";
  }
  return "?";
}

DenseTensor HaarMatrix::transposed() const {
  const std::size_t n = side();
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * n + i] = m[i * n + j];
  return t;
}

HaarMatrix haar_matrix(int level) {
  if (level < 1) throw DomainError("Haar recursion level must be >= 1");
  if (level > 24) throw DomainError("Haar matrix of level " + std::to_string(level) + " is too large");
  DenseTensor w({1, 1}, 1.0);
  const Real r = 1.0 / std::sqrt(2.0);
  for (int n = 2; n <= level; ++n) {
    const std::size_t half = w.extent(0);
    const std::size_t side = 2 * half;
    DenseTensor next({side, side});
    // Top: previous matrix with each column duplicated.
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t j = 0; j < half; ++j) {
        next[i * side + 2 * j] = r * w[i * half + j];
        next[i * side + 2 * j + 1] = r * w[i * half + j];
      }
    // Bottom: identity of size `half` expanded by [1, -1].
    for (std::size_t i = 0; i < half; ++i) {
      next[(half + i) * side + 2 * i] = r;
      next[(half + i) * side + 2 * i + 1] = -r;
    }
    w = std::move(next);
  }
  return {level, std::move(w)};
}

HaarMatrix haar_matrix_for_side(std::size_t side) {
  if (!is_power_of_two(side)) throw DomainError("side " + std::to_string(side) + " is not a power of two");
  int level = 1;
  while ((std::size_t{1} << (level - 1)) < side) ++level;
  return haar_matrix(level);
}

namespace {

void check_planes(const Shape& shape, std::size_t side) {
  if (shape.size() < 2 || shape[shape.size() - 1] != shape[shape.size() - 2])
    throw DimensionError("expected square planes [.., S, S], got " + shape_string(shape));
  const std::size_t s = shape.back();
  if (!is_power_of_two(s)) throw DomainError("plane side " + std::to_string(s) + " is not a power of two");
  if (s != side) throw DimensionError("plane side " + std::to_string(s) + " does not match Haar side " + std::to_string(side));
}

// out = a * b for n x n row-major planes.
void matmul(const Real* a, const Real* b, Real* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a[i * n + k] * b[k * n + j];
      out[i * n + j] = acc;
    }
}

DenseTensor sandwich(const DenseTensor& x, const DenseTensor& left, const DenseTensor& right) {
  const std::size_t n = left.extent(0);
  const std::size_t plane = n * n;
  DenseTensor out(x.shape());
  std::vector<Real> tmp(plane);
  for (std::size_t p = 0; p < x.size() / plane; ++p) {
    matmul(x.data().data() + p * plane, right.data().data(), tmp.data(), n);
    matmul(left.data().data(), tmp.data(), out.data().data() + p * plane, n);
  }
  return out;
}

// Integrate-and-fire population over one [S, S] plane.
struct IfPlane {
  NeuronConfig cfg;
  std::vector<Real> v;

  std::int8_t step(std::size_t i, Real current) {
    const Real u = v[i] + current;
    const Real s = neuron::fire(u, cfg);
    v[i] = neuron::carry(u, s, cfg);
    return static_cast<std::int8_t>(s);
  }
};

}  // namespace

TransformResult haar2d_forward_exact(const DenseTensor& x, const HaarMatrix& w) {
  check_planes(x.shape(), w.side());
  return {sandwich(x, w.m, w.transposed()), TransformMode::exact, 1, {}};
}

DenseTensor haar2d_inverse_exact(const DenseTensor& coeffs, const HaarMatrix& w) {
  check_planes(coeffs.shape(), w.side());
  return sandwich(coeffs, w.transposed(), w.m);
}

DenseTensor TransformResult::decoded() const {
  if (const auto* d = std::get_if<DenseTensor>(&coeffs)) return *d;
  const auto& s = std::get<SpikeTensor>(coeffs);
  Shape plane_shape(s.shape().begin() + 1, s.shape().end());
  DenseTensor out(plane_shape);
  const std::size_t T = s.shape()[0];
  const std::size_t n = out.size();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) out[i] += s[t * n + i];
  for (std::size_t i = 0; i < n; ++i) out[i] *= (units.empty() ? 1.0 : units[i]) / static_cast<Real>(T);
  return out;
}

namespace {

std::vector<Real> abs_row_sums(const HaarMatrix& w) {
  const std::size_t n = w.side();
  std::vector<Real> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) out[i] += std::abs(w.m[i * n + k]);
  return out;
}

}  // namespace

TransformResult haar2d_spiking(const SpikeTensor& x, const HaarMatrix& w, const NeuronConfig& cfg,
                               Direction direction, const DenseTensor& input_units, Real range) {
  if (x.shape().size() != 3 || x.shape()[0] == 0)
    throw DimensionError("spiking Haar transform expects spikes [T, S, S]");
  check_planes(x.shape(), w.side());
  cfg.validate();
  if (cfg.beta != 1.0) throw ConfigError("spiking Haar transform requires integrate-and-fire neurons (beta == 1)");
  if (!(range > 0.0)) throw DomainError("spiking Haar range must be positive");

  const std::size_t T = x.shape()[0];
  const std::size_t n = w.side();
  const std::size_t plane = n * n;
  if (input_units.shape() != Shape{n, n})
    throw DimensionError("input units " + shape_string(input_units.shape()) + " do not match the [S, S] plane");
  const bool fwd = direction == Direction::forward;
  // Forward: H = Spk(W Spk(x W^T)). Inverse: x = Spk(W^T Spk(H W)).
  const DenseTensor wt = w.transposed();
  const DenseTensor& right = fwd ? w.m : wt;  // first stage: x * right^T
  const DenseTensor& left = fwd ? w.m : wt;   // second stage: left * y

  // Largest magnitude of each stage's quantity for signals bounded by
  // `range`: x W^T and W x W^T going forward, W x and x going back.
  const std::vector<Real> rs = abs_row_sums(w);
  DenseTensor g1({n, n}), g2({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      g1[i * n + j] = range * (fwd ? rs[j] : rs[i]);
      g2[i * n + j] = range * (fwd ? rs[i] * rs[j] : 1.0);
    }

  // Effective synapses: matrix entry times the presynaptic spike value,
  // divided by the postsynaptic gain. eff1[i] serves row i of the input,
  // eff2[j] column j of the intermediate plane.
  std::vector<DenseTensor> eff1(n, DenseTensor({n, n})), eff2(n, DenseTensor({n, n}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        eff1[i][j * n + k] = right[j * n + k] * input_units[i * n + k] / g1[i * n + j];
        eff2[j][i * n + k] = left[i * n + k] * cfg.v_th * g1[k * n + j] / g2[i * n + j];
      }

  NeuronConfig neuron_cfg = cfg;
  neuron_cfg.relaxed = false;
  IfPlane first{neuron_cfg, std::vector<Real>(plane, 0.0)};
  IfPlane second{neuron_cfg, std::vector<Real>(plane, 0.0)};

  SpikeTensor out({T, n, n}, cfg.polarity);
  std::vector<std::int8_t> mid(plane), column(n);
  for (std::size_t t = 0; t < T; ++t) {
    const auto frame = x.step(t);
    for (std::size_t i = 0; i < n; ++i) {
      const DenseTensor row = spike_matmul(frame.subspan(i * n, n), eff1[i]);
      for (std::size_t j = 0; j < n; ++j) mid[i * n + j] = first.step(i * n + j, row[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = mid[i * n + j];
      const DenseTensor col = spike_matmul(column, eff2[j]);
      for (std::size_t i = 0; i < n; ++i) out.set(t * plane + i * n + j, second.step(i * n + j, col[i]));
    }
  }
  const TransformMode mode =
      cfg.polarity == Polarity::ternary ? TransformMode::spiking_ternary : TransformMode::spiking_binary;
  DenseTensor units = std::move(g2);
  for (Real& u : units.storage()) u *= cfg.v_th;
  return {std::move(out), mode, T, std::move(units)};
}

TransformResult haar2d_spiking(const SpikeTensor& x, const HaarMatrix& w, const NeuronConfig& cfg,
                               Direction direction, Real input_value, Real range) {
  return haar2d_spiking(x, w, cfg, direction, DenseTensor({w.side(), w.side()}, input_value), range);
}

SpikeTensor rate_encode(const DenseTensor& x, std::size_t timesteps, Polarity polarity) {
  if (timesteps == 0) throw DomainError("rate coding needs T >= 1");
  Shape shape{timesteps};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  DenseTensor drive(shape);
  for (std::size_t t = 0; t < timesteps; ++t)
    for (std::size_t i = 0; i < x.size(); ++i) drive[t * x.size() + i] = x[i];
  return run_sequence(NeuronConfig::integrate_and_fire(1.0, polarity), drive);
}

DenseTensor spiking_round_trip(const DenseTensor& image, std::size_t timesteps, Real v_th, Polarity polarity) {
  const HaarMatrix w = haar_matrix_for_side(image.extent(image.rank() - 1));
  const auto cfg = NeuronConfig::integrate_and_fire(v_th, polarity);
  const SpikeTensor input = rate_encode(image, timesteps, polarity);
  const auto fwd = haar2d_spiking(input, w, cfg, Direction::forward, 1.0, 1.0);
  const auto inv = haar2d_spiking(std::get<SpikeTensor>(fwd.coeffs), w, cfg, Direction::inverse, fwd.units, 1.0);
  return inv.decoded();
}

Real psnr(const DenseTensor& reference, const DenseTensor& reconstruction, Real peak) {
  if (reference.shape() != reconstruction.shape())
    throw DimensionError("psnr: shapes " + shape_string(reference.shape()) + " and " +
                         shape_string(reconstruction.shape()) + " differ");
  if (!(peak > 0.0)) throw DomainError("psnr peak must be positive");
  Real mse = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const Real d = reference[i] - reconstruction[i];
    mse += d * d;
  }
  mse /= static_cast<Real>(reference.size());
  if (mse == 0.0) return std::numeric_limits<Real>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

TransformResult mask_dc(const TransformResult& coeffs) {
  TransformResult out = coeffs;
  std::visit(
      [](auto& c) {
        const auto& shape = c.shape();
        if (shape.size() < 2) throw DimensionError("mask_dc expects planes [.., S, S]");
        const std::size_t plane = shape[shape.size() - 1] * shape[shape.size() - 2];
        for (std::size_t p = 0; p < c.size() / plane; ++p) {
          if constexpr (std::is_same_v<std::decay_t<decltype(c)>, DenseTensor>) c[p * plane] = 0.0;
          else c.set(p * plane, 0);
        }
      },
      out.coeffs);
  return out;
}

DenseTensor center_pad_pow2(const DenseTensor& x) {
  if (x.rank() < 2) throw DimensionError("center_pad_pow2 expects [.., H, W]");
  const std::size_t h = x.extent(x.rank() - 2), w = x.extent(x.rank() - 1);
  const std::size_t side = next_power_of_two(std::max(h, w));
  Shape shape = x.shape();
  shape[shape.size() - 2] = side;
  shape[shape.size() - 1] = side;
  DenseTensor out(shape);
  const std::size_t top = (side - h) / 2, left = (side - w) / 2;
  for (std::size_t p = 0; p < x.size() / (h * w); ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[p * side * side + (top + i) * side + left + j] = x[p * h * w + i * w + j];
  return out;
}

}  // namespace swf
