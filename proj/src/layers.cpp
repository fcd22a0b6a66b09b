#include "swf/layers.hpp"

#include <algorithm>
#include <cmath>

#include "swf/errors.hpp"
#include "swf/parallel.hpp"

namespace swf {

namespace {

constexpr std::size_t kGrain = 4;

void require_rank(const DenseTensor& x, std::size_t rank, const std::string& who) {
  if (x.rank() != rank)
    throw DimensionError(who + ": expected rank " + std::to_string(rank) + ", got " + shape_string(x.shape()));
}

bool is_spike_value(Real v) { return v == 0.0 || v == 1.0 || v == -1.0; }

}  // namespace

void LayerActivationTrace::record_map(const std::string& name, const DenseTensor& x) {
  if (timesteps == 0 || batch == 0 || x.rank() != 4 || x.extent(0) != timesteps * batch)
    throw DimensionError("trace map '" + name + "' does not have T * B leading rows");
  maps[name] = x.reshaped({timesteps, batch, x.extent(1), x.extent(2), x.extent(3)});
}

void LayerActivationTrace::record_synapse(const std::string& layer, const DenseTensor& input, std::size_t fan_out) {
  SynapseStat s;
  s.layer = layer;
  s.batch = batch;
  s.timesteps = input.extent(0) == batch ? 1 : timesteps;
  s.neurons = input.size() / (s.timesteps * s.batch);
  s.fan_out = fan_out;
  for (Real v : input.data()) {
    if (v != 0.0) ++s.nonzero;
    if (!is_spike_value(v)) s.spike_valued = false;
  }
  synapses.push_back(std::move(s));
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
               std::size_t groups)
    : name_(std::move(name)), in_(in), out_(out), kernel_(kernel), stride_(stride), groups_(groups),
      pad_(kernel / 2) {
  if (groups == 0 || in % groups != 0 || out % groups != 0)
    throw ConfigError(name_ + ": channels " + std::to_string(in) + "->" + std::to_string(out) +
                      " do not split into " + std::to_string(groups) + " groups");
  if (stride == 0 || kernel == 0) throw ConfigError(name_ + ": kernel and stride must be positive");
  weight = Param(name_ + ".weight", {out, in / groups, kernel, kernel}, true);
}

void Conv2d::init(Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(in_ / groups_ * kernel_ * kernel_));
  for (Real& w : weight.value.data()) w = rng.uniform(-bound, bound);
}

std::size_t Conv2d::fan_out() const {
  return std::max<std::size_t>(1, out_ / groups_ * kernel_ * kernel_ / (stride_ * stride_));
}

DenseTensor Conv2d::forward(const DenseTensor& x, LayerActivationTrace* trace) {
  require_rank(x, 4, name_);
  if (x.extent(1) != in_) throw DimensionError(name_ + ": input has " + std::to_string(x.extent(1)) + " channels");
  const std::size_t N = x.extent(0), H = x.extent(2), W = x.extent(3);
  const std::size_t Ho = out_side(H), Wo = out_side(W);
  const std::size_t cig = in_ / groups_, cog = out_ / groups_, K = kernel_;
  x_ = x;
  if (trace) trace->record_synapse(name_, x, fan_out());

  // wt[g][icl][ky][kx][ocl] keeps the output channels of one tap contiguous.
  std::vector<Real> wt(weight.value.size());
  for (std::size_t oc = 0; oc < out_; ++oc) {
    const std::size_t g = oc / cog, ocl = oc % cog;
    for (std::size_t icl = 0; icl < cig; ++icl)
      for (std::size_t t = 0; t < K * K; ++t)
        wt[((g * cig + icl) * K * K + t) * cog + ocl] = weight.value[(oc * cig + icl) * K * K + t];
  }

  DenseTensor y({N, out_, Ho, Wo});
  parallel_for(N, kGrain, [&](std::size_t n0, std::size_t n1) {
    std::vector<Real> acc(Ho * Wo * out_);
    for (std::size_t n = n0; n < n1; ++n) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t ic = 0; ic < in_; ++ic) {
        const std::size_t g = ic / cig, icl = ic % cig;
        const Real* plane = x.data().data() + (n * in_ + ic) * H * W;
        for (std::size_t iy = 0; iy < H; ++iy)
          for (std::size_t ix = 0; ix < W; ++ix) {
            const Real v = plane[iy * W + ix];
            if (v == 0.0) continue;
            for (std::size_t ky = 0; ky < K; ++ky) {
              const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(iy + pad_) - static_cast<std::ptrdiff_t>(ky);
              if (ny < 0 || ny % static_cast<std::ptrdiff_t>(stride_) != 0) continue;
              const std::size_t oy = static_cast<std::size_t>(ny) / stride_;
              if (oy >= Ho) continue;
              for (std::size_t kx = 0; kx < K; ++kx) {
                const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(ix + pad_) - static_cast<std::ptrdiff_t>(kx);
                if (nx < 0 || nx % static_cast<std::ptrdiff_t>(stride_) != 0) continue;
                const std::size_t ox = static_cast<std::size_t>(nx) / stride_;
                if (ox >= Wo) continue;
                const Real* w = &wt[((g * cig + icl) * K * K + ky * K + kx) * cog];
                Real* o = &acc[(oy * Wo + ox) * out_ + g * cog];
                for (std::size_t c = 0; c < cog; ++c) o[c] += v * w[c];
              }
            }
          }
      }
      for (std::size_t p = 0; p < Ho * Wo; ++p)
        for (std::size_t oc = 0; oc < out_; ++oc) y[(n * out_ + oc) * Ho * Wo + p] = acc[p * out_ + oc];
    }
  });
  return y;
}

DenseTensor Conv2d::backward(const DenseTensor& grad_out, bool need_input_grad) {
  const std::size_t N = x_.extent(0), H = x_.extent(2), W = x_.extent(3);
  const std::size_t Ho = grad_out.extent(2), Wo = grad_out.extent(3);
  const std::size_t cig = in_ / groups_, cog = out_ / groups_, K = kernel_;
  if (grad_out.extent(0) != N || grad_out.extent(1) != out_) throw DimensionError(name_ + ": gradient shape mismatch");

  std::vector<Real> wt(weight.value.size());
  for (std::size_t oc = 0; oc < out_; ++oc) {
    const std::size_t g = oc / cog, ocl = oc % cog;
    for (std::size_t icl = 0; icl < cig; ++icl)
      for (std::size_t t = 0; t < K * K; ++t)
        wt[((g * cig + icl) * K * K + t) * cog + ocl] = weight.value[(oc * cig + icl) * K * K + t];
  }

  DenseTensor gx;
  if (need_input_grad) gx = DenseTensor(x_.shape());
  const std::size_t chunks = chunk_count(N, kGrain);
  std::vector<std::vector<Real>> partial(chunks, std::vector<Real>(wt.size(), 0.0));

  parallel_for(N, kGrain, [&](std::size_t n0, std::size_t n1) {
    std::vector<Real>& gwt = partial[n0 / kGrain];
    std::vector<Real> go(Ho * Wo * out_);
    for (std::size_t n = n0; n < n1; ++n) {
      for (std::size_t oc = 0; oc < out_; ++oc)
        for (std::size_t p = 0; p < Ho * Wo; ++p) go[p * out_ + oc] = grad_out[(n * out_ + oc) * Ho * Wo + p];
      for (std::size_t ic = 0; ic < in_; ++ic) {
        const std::size_t g = ic / cig, icl = ic % cig;
        const Real* plane = &x_[(n * in_ + ic) * H * W];
        for (std::size_t iy = 0; iy < H; ++iy)
          for (std::size_t ix = 0; ix < W; ++ix) {
            const Real v = plane[iy * W + ix];
            if (v == 0.0 && !need_input_grad) continue;
            Real gsum = 0.0;
            for (std::size_t ky = 0; ky < K; ++ky) {
              const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(iy + pad_) - static_cast<std::ptrdiff_t>(ky);
              if (ny < 0 || ny % static_cast<std::ptrdiff_t>(stride_) != 0) continue;
              const std::size_t oy = static_cast<std::size_t>(ny) / stride_;
              if (oy >= Ho) continue;
              for (std::size_t kx = 0; kx < K; ++kx) {
                const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(ix + pad_) - static_cast<std::ptrdiff_t>(kx);
                if (nx < 0 || nx % static_cast<std::ptrdiff_t>(stride_) != 0) continue;
                const std::size_t ox = static_cast<std::size_t>(nx) / stride_;
                if (ox >= Wo) continue;
                const std::size_t tap = ((g * cig + icl) * K * K + ky * K + kx) * cog;
                const Real* o = &go[(oy * Wo + ox) * out_ + g * cog];
                if (v != 0.0)
                  for (std::size_t c = 0; c < cog; ++c) gwt[tap + c] += v * o[c];
                if (need_input_grad)
                  for (std::size_t c = 0; c < cog; ++c) gsum += wt[tap + c] * o[c];
              }
            }
            if (need_input_grad) gx[(n * in_ + ic) * H * W + iy * W + ix] = gsum;
          }
      }
    }
  });

  for (const auto& gwt : partial)
    for (std::size_t oc = 0; oc < out_; ++oc) {
      const std::size_t g = oc / cog, ocl = oc % cog;
      for (std::size_t icl = 0; icl < cig; ++icl)
        for (std::size_t t = 0; t < K * K; ++t)
          weight.grad[(oc * cig + icl) * K * K + t] += gwt[((g * cig + icl) * K * K + t) * cog + ocl];
    }
  return gx;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string n, std::size_t channels)
    : gamma(n + ".gamma", {channels}, false), beta(n + ".beta", {channels}, false),
      running_mean({channels}), running_var({channels}, 1.0), name(std::move(n)) {
  gamma.value.fill(1.0);
}

void BatchNorm2d::init(bool zero_gamma) {
  gamma.value.fill(zero_gamma ? 0.0 : 1.0);
  beta.value.fill(0.0);
  running_mean.fill(0.0);
  running_var.fill(1.0);
}

DenseTensor BatchNorm2d::forward(const DenseTensor& x, bool training) {
  require_rank(x, 4, name);
  const std::size_t N = x.extent(0), C = x.extent(1), P = x.extent(2) * x.extent(3);
  if (C != gamma.value.size()) throw DimensionError(name + ": channel count mismatch");
  const std::size_t M = N * P;
  training_ = training;
  xhat_ = DenseTensor(x.shape());
  inv_std_.assign(C, 0.0);
  DenseTensor y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    Real mean, var;
    if (training) {
      Real s = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < P; ++p) s += x[(n * C + c) * P + p];
      mean = s / static_cast<Real>(M);
      Real q = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < P; ++p) {
          const Real d = x[(n * C + c) * P + p] - mean;
          q += d * d;
        }
      var = q / static_cast<Real>(M);
      const Real unbiased = M > 1 ? q / static_cast<Real>(M - 1) : var;
      running_mean[c] = (1.0 - kMomentum) * running_mean[c] + kMomentum * mean;
      running_var[c] = (1.0 - kMomentum) * running_var[c] + kMomentum * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const Real inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[c] = inv;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = (n * C + c) * P + p;
        xhat_[i] = (x[i] - mean) * inv;
        y[i] = gamma.value[c] * xhat_[i] + beta.value[c];
      }
  }
  return y;
}

DenseTensor BatchNorm2d::backward(const DenseTensor& g) {
  const std::size_t N = g.extent(0), C = g.extent(1), P = g.extent(2) * g.extent(3);
  const Real M = static_cast<Real>(N * P);
  DenseTensor gx(g.shape());
  for (std::size_t c = 0; c < C; ++c) {
    Real sg = 0.0, sgx = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = (n * C + c) * P + p;
        sg += g[i];
        sgx += g[i] * xhat_[i];
      }
    gamma.grad[c] += sgx;
    beta.grad[c] += sg;
    const Real k = gamma.value[c] * inv_std_[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = (n * C + c) * P + p;
        gx[i] = training_ ? k * (g[i] - sg / M - xhat_[i] * sgx / M) : k * g[i];
      }
  }
  return gx;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}, true), bias(name + ".bias", {out}, false), name_(std::move(name)) {}

void Linear::init(Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(weight.value.extent(1)));
  for (Real& w : weight.value.data()) w = rng.uniform(-bound, bound);
  for (Real& b : bias.value.data()) b = rng.uniform(-bound, bound);
}

DenseTensor Linear::forward(const DenseTensor& x, LayerActivationTrace* trace) {
  require_rank(x, 2, name_);
  const std::size_t B = x.extent(0), in = weight.value.extent(1), out = weight.value.extent(0);
  if (x.extent(1) != in) throw DimensionError(name_ + ": input width mismatch");
  x_ = x;
  if (trace) trace->record_synapse(name_, x, out);
  DenseTensor y({B, out});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out; ++o) {
      Real acc = bias.value[o];
      for (std::size_t i = 0; i < in; ++i) acc += weight.value[o * in + i] * x[b * in + i];
      y[b * out + o] = acc;
    }
  return y;
}

DenseTensor Linear::backward(const DenseTensor& g) {
  const std::size_t B = x_.extent(0), in = weight.value.extent(1), out = weight.value.extent(0);
  DenseTensor gx({B, in});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out; ++o) {
      const Real go = g[b * out + o];
      bias.grad[o] += go;
      for (std::size_t i = 0; i < in; ++i) {
        weight.grad[o * in + i] += go * x_[b * in + i];
        gx[b * in + i] += go * weight.value[o * in + i];
      }
    }
  return gx;
}

// ------------------------------------------------------------- SpikeLayer

SpikeLayer::SpikeLayer(NeuronConfig cfg, std::size_t timesteps, bool pass_through)
    : cfg_(cfg), T_(timesteps), pass_through_(pass_through) {
  cfg_.validate();
  if (T_ == 0) throw ConfigError("spiking layer needs T >= 1");
}

DenseTensor SpikeLayer::forward(const DenseTensor& current) {
  if (pass_through_) return current;
  if (current.size() % T_ != 0 || current.rank() == 0 || current.extent(0) % T_ != 0)
    throw DimensionError("spiking layer input " + shape_string(current.shape()) + " is not a multiple of T");
  const std::size_t n = current.size() / T_;
  u_ = DenseTensor(current.shape());
  s_ = DenseTensor(current.shape());
  std::vector<Real> v(n, 0.0);
  for (std::size_t t = 0; t < T_; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = t * n + i;
      const Real u = v[i] + current[k];
      const Real s = neuron::fire(u, cfg_);
      u_[k] = u;
      s_[k] = s;
      v[i] = neuron::carry(u, s, cfg_);
    }
  return s_;
}

DenseTensor SpikeLayer::backward(const DenseTensor& gs) const {
  if (pass_through_) return gs;
  const std::size_t n = gs.size() / T_;
  DenseTensor gc(gs.shape());
  std::vector<Real> gv(n, 0.0);
  for (std::size_t t = T_; t-- > 0;)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = t * n + i;
      const Real u = u_[k], s = s_[k];
      const Real fg = neuron::fire_grad(u, cfg_);
      const Real dv_du = neuron::carry_grad_u(s, cfg_) + neuron::carry_grad_s(u, cfg_) * fg;
      const Real gu = gs[k] * fg + gv[i] * dv_du;
      gc[k] = gu;
      gv[i] = gu;
    }
  return gc;
}

// -------------------------------------------------------------- HaarStage

HaarStage::HaarStage(std::string name, DenseTensor m, Side side, Real scale)
    : name_(std::move(name)), m_(std::move(m)), side_(side), scale_(scale) {
  const std::size_t S = m_.extent(0);
  mt_ = DenseTensor({S, S});
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j) mt_[j * S + i] = m_[i * S + j];
}

DenseTensor HaarStage::forward(const DenseTensor& x, LayerActivationTrace* trace) {
  const std::size_t S = m_.extent(0);
  if (x.rank() < 2 || x.extent(x.rank() - 1) != S || x.extent(x.rank() - 2) != S)
    throw DimensionError(name_ + ": planes of " + shape_string(x.shape()) + " are not " + std::to_string(S) +
                         "x" + std::to_string(S));
  if (trace) trace->record_synapse(name_, x, S);
  DenseTensor y(x.shape());
  const std::size_t planes = x.size() / (S * S);
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* in = x.data().data() + p * S * S;
    Real* out = &y[p * S * S];
    for (std::size_t a = 0; a < S; ++a)
      for (std::size_t b = 0; b < S; ++b) {
        const Real v = in[a * S + b];
        if (v == 0.0) continue;
        // Column b of M (row b of M^T) reaches every output of this event.
        const Real* col = &mt_[b * S];
        const Real* col_a = &mt_[a * S];
        if (side_ == Side::right)
          for (std::size_t j = 0; j < S; ++j) out[a * S + j] += v * col[j];
        else
          for (std::size_t i = 0; i < S; ++i) out[i * S + b] += v * col_a[i];
      }
    for (std::size_t i = 0; i < S * S; ++i) out[i] *= scale_;
  }
  return y;
}

DenseTensor HaarStage::backward(const DenseTensor& g) const {
  const std::size_t S = m_.extent(0);
  DenseTensor gx(g.shape());
  const std::size_t planes = g.size() / (S * S);
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* go = g.data().data() + p * S * S;
    Real* out = &gx[p * S * S];
    for (std::size_t a = 0; a < S; ++a)
      for (std::size_t b = 0; b < S; ++b) {
        Real acc = 0.0;
        if (side_ == Side::right)
          for (std::size_t j = 0; j < S; ++j) acc += go[a * S + j] * m_[j * S + b];
        else
          for (std::size_t i = 0; i < S; ++i) acc += m_[i * S + a] * go[i * S + b];
        out[a * S + b] = scale_ * acc;
      }
  }
  return gx;
}

// --------------------------------------------------------- BlockDiagLayer

BlockDiagLayer::BlockDiagLayer(std::string name, std::size_t dim, std::size_t k, std::size_t height,
                               std::size_t width, Real scale)
    : name_(std::move(name)), dim_(dim), k_(k), scale_(scale) {
  if (k == 0 || dim % k != 0)
    throw ConfigError(name_ + ": D=" + std::to_string(dim) + " is not divisible by k=" + std::to_string(k));
  weight = Param(name_ + ".weight", {height * width, k, dim / k, dim / k}, true);
}

void BlockDiagLayer::init(Rng& rng, bool zero) {
  const std::size_t bd = dim_ / k_;
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(bd));
  for (Real& w : weight.value.data()) w = zero ? 0.0 : rng.uniform(-bound, bound);
}

DenseTensor BlockDiagLayer::forward(const DenseTensor& x, LayerActivationTrace* trace) {
  require_rank(x, 4, name_);
  const std::size_t N = x.extent(0), P = x.extent(2) * x.extent(3), bd = dim_ / k_;
  if (x.extent(1) != dim_ || P != weight.value.extent(0))
    throw DimensionError(name_ + ": input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(weight.value.shape()));
  x_ = x;
  if (trace) trace->record_synapse(name_, x, bd);
  DenseTensor y(x.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t l = 0; l < k_; ++l)
      for (std::size_t j = 0; j < bd; ++j)
        for (std::size_t p = 0; p < P; ++p) {
          const Real v = x[(n * dim_ + l * bd + j) * P + p];
          if (v == 0.0) continue;
          const Real* w = &weight.value[((p * k_ + l) * bd) * bd + j];
          for (std::size_t i = 0; i < bd; ++i) y[(n * dim_ + l * bd + i) * P + p] += v * w[i * bd];
        }
  for (Real& v : y.data()) v *= scale_;
  return y;
}

DenseTensor BlockDiagLayer::backward(const DenseTensor& g) {
  const std::size_t N = x_.extent(0), P = x_.extent(2) * x_.extent(3), bd = dim_ / k_;
  DenseTensor gx(x_.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t l = 0; l < k_; ++l)
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i < bd; ++i) {
          const Real go = scale_ * g[(n * dim_ + l * bd + i) * P + p];
          if (go == 0.0) continue;
          const std::size_t row = ((p * k_ + l) * bd + i) * bd;
          for (std::size_t j = 0; j < bd; ++j) {
            const std::size_t xi = (n * dim_ + l * bd + j) * P + p;
            weight.grad[row + j] += go * x_[xi];
            gx[xi] += go * weight.value[row + j];
          }
        }
  return gx;
}

// ----------------------------------------------------------- token mixing

DenseTensor TokenMaxPool::forward(const DenseTensor& x) {
  require_rank(x, 4, "token max-pool");
  shape_ = x.shape();
  const std::size_t P = x.extent(2) * x.extent(3), planes = x.extent(0) * x.extent(1);
  DenseTensor y(x.shape());
  argmax_.assign(x.size(), 0);
  for (std::size_t q = 0; q < planes; ++q)
    for (std::size_t p = 0; p < P; ++p) {
      const std::size_t i = q * P + p;
      std::size_t best = i;
      if (p + 1 < P && x[i + 1] > x[i]) best = i + 1;
      y[i] = x[best];
      argmax_[i] = best;
    }
  return y;
}

DenseTensor TokenMaxPool::backward(const DenseTensor& g) const {
  DenseTensor gx(shape_);
  for (std::size_t i = 0; i < g.size(); ++i) gx[argmax_[i]] += g[i];
  return gx;
}

DenseTensor token_mean(const DenseTensor& x) {
  require_rank(x, 4, "token mean");
  const std::size_t P = x.extent(2) * x.extent(3);
  DenseTensor y(x.shape());
  for (std::size_t q = 0; q < x.size() / P; ++q) {
    Real s = 0.0;
    for (std::size_t p = 0; p < P; ++p) s += x[q * P + p];
    s /= static_cast<Real>(P);
    for (std::size_t p = 0; p < P; ++p) y[q * P + p] = s;
  }
  return y;
}

DenseTensor token_mean_backward(const DenseTensor& g) { return token_mean(g); }

DenseTensor add(const DenseTensor& a, const DenseTensor& b) {
  DenseTensor out = a;
  add_into(out, b);
  return out;
}

void add_into(DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("cannot add " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace swf
