// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddpm/schedule.hpp"
#include "ddpm/tensor.hpp"

namespace ddpm {

/// Where along the diffusion a predictor is evaluated. Discrete samplers set
/// `step` (1-based); ODE solvers leave it empty and pass a continuous time.
/// `network_index` is the real-valued argument of the sinusoidal embedding:
/// t - 1 on the discrete chain, discretize_time(t_c) for continuous times.
struct Timestep {
  double continuous = 1.0;
  double network_index = 0.0;
  std::optional<std::size_t> step;

  static Timestep discrete(std::size_t t, std::size_t steps);
  static Timestep from_continuous(double t_c, std::size_t steps);
};

/// Noise-prediction contract D(y_t, x, t). Output has the shape of y_t.
/// Implementations are immutable and safe to call concurrently.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  /// `condition` may be null (unconditional use).
  virtual ImageTensor predict(const ImageTensor& y, const ImageTensor* condition,
                              const Timestep& t) const = 0;
};

// ---------------------------------------------------------------------------
// Analytic Gaussian oracle

/// Data law N(mu0, s0^2 I). mu0 either matches the sample shape or is 1x1x1
/// and broadcast.
struct GaussianOracleParams {
  ImageTensor mu0 = ImageTensor::scalar(0.0);
  double s0 = 1.0;
};

/// Exact optimal noise prediction for Gaussian data:
/// sigma (y - eta mu0) / (eta^2 s0^2 + sigma^2).
ImageTensor oracle_predict(const ImageTensor& y, double eta, double sigma,
                           const GaussianOracleParams& params);
/// Continuous-time form, using the closed-form eta(t) and sigma(t).
ImageTensor oracle_predict(const ImageTensor& y, double t, const GaussianOracleParams& params,
                           const VarianceSchedule& schedule);

class GaussianOracle final : public NoisePredictor {
 public:
  GaussianOracle(GaussianOracleParams params, const VarianceSchedule& schedule);

  /// Uses the discrete tables when `t.step` is set, the continuous
  /// coefficients otherwise.
  ImageTensor predict(const ImageTensor& y, const ImageTensor* condition,
                      const Timestep& t) const override;

  const GaussianOracleParams& params() const { return params_; }

 private:
  GaussianOracleParams params_;
  const VarianceSchedule* schedule_;
};

/// Returns the same value everywhere; used to check the solvers' exact cases.
class ConstantPredictor final : public NoisePredictor {
 public:
  explicit ConstantPredictor(double value) : value_(value) {}
  ImageTensor predict(const ImageTensor& y, const ImageTensor* condition,
                      const Timestep& t) const override;

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Small conditional convolutional denoiser

struct ConvArchitecture {
  std::uint32_t in_channels = 2;  // concat(y_t, x)
  std::uint32_t hidden = 16;
  std::uint32_t out_channels = 1;
  std::uint32_t embed_dim = 16;  // sinusoidal time embedding width

  std::size_t parameter_count() const;
  bool operator==(const ConvArchitecture&) const = default;
};

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Three 3x3 same-padded convolutions (in -> hidden -> hidden -> out) with
/// SiLU after the first two. The sinusoidal embedding of the time index goes
/// through one affine map and is added as a per-channel bias after the first
/// convolution.
///
/// Parameters live in one flat vector, in the order reported by layers():
/// conv1.weight, conv1.bias, time.weight, time.bias, conv2.weight, conv2.bias,
/// conv3.weight, conv3.bias. Convolution weights are [out][in][3][3].
class ConvDenoiser final : public NoisePredictor {
 public:
  struct Cache {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> input_padded;   // in_channels x (H+2) x (W+2)
    std::vector<double> pre1;           // hidden x H x W
    std::vector<double> act1_padded;    // hidden x (H+2) x (W+2)
    std::vector<double> pre2;
    std::vector<double> act2_padded;
    std::vector<double> embedding;      // embed_dim
    bool valid() const { return height > 0 && !input_padded.empty(); }
  };

  /// All-zero parameters.
  explicit ConvDenoiser(ConvArchitecture arch = {});
  ConvDenoiser(ConvArchitecture arch, std::vector<double> parameters);
  /// He-style random initialization, deterministic in `seed`.
  static ConvDenoiser initialized(ConvArchitecture arch, std::uint64_t seed);

  const ConvArchitecture& architecture() const { return arch_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<ParameterBlock>& layers() const { return layers_; }
  /// Name of the layer that owns flat parameter index i.
  const std::string& layer_of(std::size_t i) const;

  ImageTensor predict(const ImageTensor& y, const ImageTensor* condition,
                      const Timestep& t) const override;

  /// Forward pass. When `cache` is given, stores what backward() needs.
  ImageTensor forward(const ImageTensor& y, const ImageTensor* condition, double network_index,
                      Cache* cache = nullptr) const;

  /// Gradient of a scalar loss with respect to every parameter, given the
  /// loss gradient with respect to the network output. Throws
  /// std::logic_error if the cache is empty.
  std::vector<double> backward(const ImageTensor& output_grad, const Cache& cache) const;

 private:
  void check_arch() const;

  ConvArchitecture arch_;
  std::vector<double> params_;
  std::vector<ParameterBlock> layers_;
};

/// Sinusoidal features [sin(n w_0), cos(n w_0), ...], w_i = 10000^(-i/(dim/2)).
std::vector<double> time_embedding(double network_index, std::size_t dim);

}  // namespace ddpm
