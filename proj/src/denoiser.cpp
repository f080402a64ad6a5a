// SPDX-License-Identifier: Apache-2.0

#include "ddpm/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "ddpm/errors.hpp"
#include "ddpm/rng.hpp"

namespace ddpm {

Timestep Timestep::discrete(std::size_t t, std::size_t steps) {
  return {static_cast<double>(t) / static_cast<double>(steps), static_cast<double>(t) - 1.0, t};
}

Timestep Timestep::from_continuous(double t_c, std::size_t steps) {
  return {t_c, discretize_time(t_c, steps), std::nullopt};
}

// ---------------------------------------------------------------------------

ImageTensor oracle_predict(const ImageTensor& y, double eta, double sigma,
                           const GaussianOracleParams& params) {
  const ImageTensor& mu = params.mu0;
  const bool broadcast = mu.size() == 1;
  if (!broadcast) require_same_shape(y, mu, "oracle_predict");
  const double scale = sigma / (eta * eta * params.s0 * params.s0 + sigma * sigma);
  ImageTensor out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = broadcast ? mu[0] : mu[i];
    out[i] = scale * (y[i] - eta * m);
  }
  return out;
}

ImageTensor oracle_predict(const ImageTensor& y, double t, const GaussianOracleParams& params,
                           const VarianceSchedule& schedule) {
  const ContinuousCoefficients c = schedule.continuous(t);
  return oracle_predict(y, c.eta, c.sigma, params);
}

GaussianOracle::GaussianOracle(GaussianOracleParams params, const VarianceSchedule& schedule)
    : params_(std::move(params)), schedule_(&schedule) {
  if (!(params_.s0 > 0.0)) throw DomainError("Gaussian oracle needs s0 > 0");
}

ImageTensor GaussianOracle::predict(const ImageTensor& y, const ImageTensor* /*condition*/,
                                    const Timestep& t) const {
  if (t.step) {
    return oracle_predict(y, schedule_->eta(*t.step), schedule_->sigma_marginal(*t.step), params_);
  }
  return oracle_predict(y, t.continuous, params_, *schedule_);
}

ImageTensor ConstantPredictor::predict(const ImageTensor& y, const ImageTensor*,
                                       const Timestep&) const {
  return ImageTensor(y.shape(), value_);
}

// ---------------------------------------------------------------------------

std::vector<double> time_embedding(double network_index, std::size_t dim) {
  std::vector<double> emb(dim, 0.0);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    emb[2 * i] = std::sin(network_index * freq);
    emb[2 * i + 1] = std::cos(network_index * freq);
  }
  return emb;
}

namespace {

constexpr std::size_t kKernel = 9;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

/// Copies C x H x W planes into the interior of C x (H+2) x (W+2) zero planes.
void pad_into(const double* src, std::size_t channels, std::size_t h, std::size_t w,
              double* dst) {
  const std::size_t pw = w + 2;
  const std::size_t pplane = (h + 2) * pw;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* s = src + (c * h + y) * w;
      double* d = dst + c * pplane + (y + 1) * pw + 1;
      for (std::size_t x = 0; x < w; ++x) d[x] = s[x];
    }
  }
}

/// out[co] = bias[co] + sum_ci conv3x3(in_padded[ci], weight[co][ci]).
void conv3x3_forward(const double* in_padded, std::size_t cin, std::size_t cout, std::size_t h,
                     std::size_t w, const double* weight, const double* bias, double* out) {
  const std::size_t pw = w + 2;
  const std::size_t pplane = (h + 2) * pw;
  for (std::size_t co = 0; co < cout; ++co) {
    double* dst_plane = out + co * h * w;
    for (std::size_t i = 0; i < h * w; ++i) dst_plane[i] = bias[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* k = weight + (co * cin + ci) * kKernel;
      const double* src_plane = in_padded + ci * pplane;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          for (std::size_t y = 0; y < h; ++y) {
            const double* src = src_plane + (y + ky) * pw + kx;
            double* dst = dst_plane + y * w;
            for (std::size_t x = 0; x < w; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

/// Accumulates weight/bias gradients and, when grad_in_padded is non-null, the
/// gradient with respect to the padded input.
void conv3x3_backward(const double* in_padded, std::size_t cin, std::size_t cout, std::size_t h,
                      std::size_t w, const double* weight, const double* grad_out,
                      double* grad_weight, double* grad_bias, double* grad_in_padded) {
  const std::size_t pw = w + 2;
  const std::size_t pplane = (h + 2) * pw;
  for (std::size_t co = 0; co < cout; ++co) {
    const double* g_plane = grad_out + co * h * w;
    double gb = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) gb += g_plane[i];
    grad_bias[co] += gb;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* k = weight + (co * cin + ci) * kKernel;
      double* gk = grad_weight + (co * cin + ci) * kKernel;
      const double* src_plane = in_padded + ci * pplane;
      double* gin_plane = grad_in_padded ? grad_in_padded + ci * pplane : nullptr;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          double acc = 0.0;
          for (std::size_t y = 0; y < h; ++y) {
            const double* src = src_plane + (y + ky) * pw + kx;
            const double* g = g_plane + y * w;
            for (std::size_t x = 0; x < w; ++x) acc += g[x] * src[x];
            if (gin_plane) {
              double* gi = gin_plane + (y + ky) * pw + kx;
              for (std::size_t x = 0; x < w; ++x) gi[x] += wv * g[x];
            }
          }
          gk[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

void unpad_into(const double* src_padded, std::size_t channels, std::size_t h, std::size_t w,
                double* dst) {
  const std::size_t pw = w + 2;
  const std::size_t pplane = (h + 2) * pw;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* s = src_padded + c * pplane + (y + 1) * pw + 1;
      double* d = dst + (c * h + y) * w;
      for (std::size_t x = 0; x < w; ++x) d[x] = s[x];
    }
  }
}

struct Offsets {
  std::size_t w1, b1, wt, bt, w2, b2, w3, b3, total;
};

Offsets offsets_for(const ConvArchitecture& a) {
  Offsets o{};
  std::size_t at = 0;
  o.w1 = at; at += std::size_t{a.hidden} * a.in_channels * kKernel;
  o.b1 = at; at += a.hidden;
  o.wt = at; at += std::size_t{a.hidden} * a.embed_dim;
  o.bt = at; at += a.hidden;
  o.w2 = at; at += std::size_t{a.hidden} * a.hidden * kKernel;
  o.b2 = at; at += a.hidden;
  o.w3 = at; at += std::size_t{a.out_channels} * a.hidden * kKernel;
  o.b3 = at; at += a.out_channels;
  o.total = at;
  return o;
}

}  // namespace

std::size_t ConvArchitecture::parameter_count() const { return offsets_for(*this).total; }

ConvDenoiser::ConvDenoiser(ConvArchitecture arch)
    : ConvDenoiser(arch, std::vector<double>(arch.parameter_count(), 0.0)) {}

ConvDenoiser::ConvDenoiser(ConvArchitecture arch, std::vector<double> parameters)
    : arch_(arch), params_(std::move(parameters)) {
  check_arch();
  if (params_.size() != arch_.parameter_count()) {
    throw DomainError("parameter count " + std::to_string(params_.size()) +
                      " does not match architecture (" +
                      std::to_string(arch_.parameter_count()) + ")");
  }
  const Offsets o = offsets_for(arch_);
  layers_ = {
      {"conv1.weight", o.w1, o.b1 - o.w1}, {"conv1.bias", o.b1, o.wt - o.b1},
      {"time.weight", o.wt, o.bt - o.wt},  {"time.bias", o.bt, o.w2 - o.bt},
      {"conv2.weight", o.w2, o.b2 - o.w2}, {"conv2.bias", o.b2, o.w3 - o.b2},
      {"conv3.weight", o.w3, o.b3 - o.w3}, {"conv3.bias", o.b3, o.total - o.b3},
  };
}

void ConvDenoiser::check_arch() const {
  if (arch_.in_channels <= arch_.out_channels || arch_.out_channels == 0 || arch_.hidden == 0 ||
      arch_.embed_dim == 0 || arch_.embed_dim % 2 != 0) {
    throw DomainError("invalid conv architecture");
  }
  if (arch_.in_channels != 2 * arch_.out_channels) {
    throw DomainError("conv architecture must take concat(y, x) with equal channel counts");
  }
}

ConvDenoiser ConvDenoiser::initialized(ConvArchitecture arch, std::uint64_t seed) {
  ConvDenoiser net(arch);
  const Offsets o = offsets_for(arch);
  CounterRng rng(seed, StreamRole::kNetInit);
  auto fill = [&](std::size_t begin, std::size_t end, double bound) {
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = bound * (2.0 * rng.uniform() - 1.0);
  };
  fill(o.w1, o.b1, std::sqrt(6.0 / (arch.in_channels * kKernel)));
  fill(o.wt, o.bt, std::sqrt(1.0 / arch.embed_dim));
  fill(o.w2, o.b2, std::sqrt(6.0 / (arch.hidden * kKernel)));
  fill(o.w3, o.b3, std::sqrt(3.0 / (arch.hidden * kKernel)));
  return net;
}

const std::string& ConvDenoiser::layer_of(std::size_t i) const {
  for (const auto& l : layers_) {
    if (i >= l.offset && i < l.offset + l.size) return l.name;
  }
  throw std::out_of_range("parameter index " + std::to_string(i));
}

ImageTensor ConvDenoiser::predict(const ImageTensor& y, const ImageTensor* condition,
                                  const Timestep& t) const {
  return forward(y, condition, t.network_index);
}

ImageTensor ConvDenoiser::forward(const ImageTensor& y, const ImageTensor* condition,
                                  double network_index, Cache* cache) const {
  const std::size_t yc = arch_.out_channels;
  if (y.shape().channels != yc) {
    throw ShapeError("conv denoiser expects " + std::to_string(yc) + "-channel input, got " +
                     y.shape().str());
  }
  const ImageTensor& cond = condition ? *condition : y;
  require_same_shape(y, cond, "conv denoiser condition");

  const std::size_t h = y.shape().height;
  const std::size_t w = y.shape().width;
  const std::size_t hid = arch_.hidden;
  const std::size_t pplane = (h + 2) * (w + 2);
  const Offsets o = offsets_for(arch_);
  const double* p = params_.data();

  Cache local;
  Cache& c = cache ? *cache : local;
  c.height = h;
  c.width = w;
  c.input_padded.assign(arch_.in_channels * pplane, 0.0);
  pad_into(y.values().data(), yc, h, w, c.input_padded.data());
  pad_into(cond.values().data(), yc, h, w, c.input_padded.data() + yc * pplane);

  c.embedding = time_embedding(network_index, arch_.embed_dim);
  std::vector<double> bias1(hid);
  for (std::size_t ch = 0; ch < hid; ++ch) {
    double b = p[o.b1 + ch] + p[o.bt + ch];
    for (std::size_t k = 0; k < arch_.embed_dim; ++k) {
      b += p[o.wt + ch * arch_.embed_dim + k] * c.embedding[k];
    }
    bias1[ch] = b;
  }

  c.pre1.assign(hid * h * w, 0.0);
  conv3x3_forward(c.input_padded.data(), arch_.in_channels, hid, h, w, p + o.w1, bias1.data(),
                  c.pre1.data());
  std::vector<double> act(hid * h * w);
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = silu(c.pre1[i]);
  c.act1_padded.assign(hid * pplane, 0.0);
  pad_into(act.data(), hid, h, w, c.act1_padded.data());

  c.pre2.assign(hid * h * w, 0.0);
  conv3x3_forward(c.act1_padded.data(), hid, hid, h, w, p + o.w2, p + o.b2, c.pre2.data());
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = silu(c.pre2[i]);
  c.act2_padded.assign(hid * pplane, 0.0);
  pad_into(act.data(), hid, h, w, c.act2_padded.data());

  ImageTensor out(y.shape());
  conv3x3_forward(c.act2_padded.data(), hid, yc, h, w, p + o.w3, p + o.b3, out.values().data());
  return out;
}

std::vector<double> ConvDenoiser::backward(const ImageTensor& output_grad,
                                           const Cache& cache) const {
  if (!cache.valid()) throw std::logic_error("conv backward called without a forward cache");
  const std::size_t h = cache.height;
  const std::size_t w = cache.width;
  const std::size_t yc = arch_.out_channels;
  if (output_grad.shape() != Shape{yc, h, w}) {
    throw ShapeError("output gradient shape " + output_grad.shape().str() +
                     " does not match cached forward pass");
  }
  const std::size_t hid = arch_.hidden;
  const std::size_t pplane = (h + 2) * (w + 2);
  const Offsets o = offsets_for(arch_);
  const double* p = params_.data();
  std::vector<double> grad(params_.size(), 0.0);
  double* g = grad.data();

  std::vector<double> g_act_padded(hid * pplane, 0.0);
  conv3x3_backward(cache.act2_padded.data(), hid, yc, h, w, p + o.w3,
                   output_grad.values().data(), g + o.w3, g + o.b3, g_act_padded.data());
  std::vector<double> g_pre(hid * h * w);
  unpad_into(g_act_padded.data(), hid, h, w, g_pre.data());
  for (std::size_t i = 0; i < g_pre.size(); ++i) g_pre[i] *= silu_grad(cache.pre2[i]);

  std::fill(g_act_padded.begin(), g_act_padded.end(), 0.0);
  conv3x3_backward(cache.act1_padded.data(), hid, hid, h, w, p + o.w2, g_pre.data(), g + o.w2,
                   g + o.b2, g_act_padded.data());
  unpad_into(g_act_padded.data(), hid, h, w, g_pre.data());
  for (std::size_t i = 0; i < g_pre.size(); ++i) g_pre[i] *= silu_grad(cache.pre1[i]);

  conv3x3_backward(cache.input_padded.data(), arch_.in_channels, hid, h, w, p + o.w1,
                   g_pre.data(), g + o.w1, g + o.b1, nullptr);
  // The time bias enters exactly like conv1.bias.
  for (std::size_t ch = 0; ch < hid; ++ch) {
    const double gb = g[o.b1 + ch];
    g[o.bt + ch] = gb;
    for (std::size_t k = 0; k < arch_.embed_dim; ++k) {
      g[o.wt + ch * arch_.embed_dim + k] = gb * cache.embedding[k];
    }
  }
  return grad;
}

}  // namespace ddpm
