// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ddpm/denoiser.hpp"
#include "ddpm/schedule.hpp"
#include "ddpm/tensor.hpp"

namespace ddpm {

/// Sampling stops here; sigma(t) -> 0 makes the ODE singular at t = 0.
inline constexpr double kSamplerMinTime = 1e-3;

struct PlanSegment {
  int order = 1;  // 1, 2 or 3
  double t_start = 1.0;
  double t_end = kSamplerMinTime;
};

/// Ordered solver steps from t = 1 down to t_min. Segments are contiguous and
/// strictly decreasing in t; total_nfe is the sum of their orders.
struct SamplePlan {
  std::vector<PlanSegment> segments;
  std::size_t total_nfe = 0;

  /// `steps` equal-lambda steps of a single solver order.
  static SamplePlan uniform(int order, std::size_t steps, double t_start, double t_end,
                            const VarianceSchedule& schedule);
  void validate() const;
};

/// Splits an NFE budget into third-order steps plus at most one trailing
/// first- or second-order step for the remainder, spaced uniformly in lambda.
SamplePlan plan_nfe(std::size_t budget, double t_start, double t_end,
                    const VarianceSchedule& schedule);

struct TraceStep {
  double t = 0.0;
  std::size_t calls = 0;
};

struct SamplerTrace {
  std::vector<TraceStep> steps;
  std::size_t nfe = 0;
  double seconds = 0.0;
};

/// Counts predictor evaluations made through it.
class CountingPredictor final : public NoisePredictor {
 public:
  explicit CountingPredictor(const NoisePredictor& inner) : inner_(&inner) {}
  ImageTensor predict(const ImageTensor& y, const ImageTensor* condition,
                      const Timestep& t) const override;
  std::size_t calls() const { return calls_; }

 private:
  const NoisePredictor* inner_;
  mutable std::size_t calls_ = 0;
};

struct SampleResult {
  ImageTensor image;
  SamplerTrace trace;
};

// ---------------------------------------------------------------------------
// Ancestral (discrete-chain) sampling

/// y_{t-1} = posterior_mean_from_eps(y_t, D(y_t, x, t), t) + sigma_post_t z.
/// z must be all zeros at t = 1.
ImageTensor ancestral_step(const ImageTensor& y, const ImageTensor* condition, std::size_t t,
                           const ImageTensor& z, const NoisePredictor& net,
                           const VarianceSchedule& schedule);

/// Draws y_T ~ N(0, I) of `shape` and runs t = T .. 1. z for step t comes
/// from the stream (seed, t).
SampleResult ancestral_sample(const Shape& shape, const ImageTensor* condition,
                              const NoisePredictor& net, const VarianceSchedule& schedule,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Probability-flow ODE

/// dy/dt = f(t) y + g^2(t) / (2 sigma(t)) D(y, x, t).
ImageTensor ode_rhs(const ImageTensor& y, const ImageTensor* condition, double t,
                    const NoisePredictor& net, const VarianceSchedule& schedule);

enum class TimeGrid { kUniformLambda, kUniformTime };

/// Classical fixed-step RK4 from t = 1 to kSamplerMinTime, starting at `y_start`.
SampleResult rk4_integrate(const ImageTensor& y_start, const ImageTensor* condition,
                           const NoisePredictor& net, const VarianceSchedule& schedule,
                           std::size_t steps, TimeGrid grid = TimeGrid::kUniformTime);
SampleResult rk4_sample(const Shape& shape, const ImageTensor* condition,
                        const NoisePredictor& net, const VarianceSchedule& schedule,
                        std::size_t steps, std::uint64_t seed,
                        TimeGrid grid = TimeGrid::kUniformTime);

// ---------------------------------------------------------------------------
// DPM-Solver steps (t < t_prev, both continuous)

ImageTensor dpm1_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule);
ImageTensor dpm2_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule);
ImageTensor dpm3_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule);

/// Runs every plan segment with the matching step from a given start.
SampleResult dpm_integrate(const ImageTensor& y_start, const ImageTensor* condition,
                           const NoisePredictor& net, const VarianceSchedule& schedule,
                           const SamplePlan& plan);
/// Draws y(1) ~ N(0, I) from (seed) and integrates the plan.
SampleResult dpm_sample(const Shape& shape, const ImageTensor* condition,
                        const NoisePredictor& net, const VarianceSchedule& schedule,
                        const SamplePlan& plan, std::uint64_t seed);

/// Standard-normal start tensor shared by every sampler for a given seed.
ImageTensor initial_noise(const Shape& shape, std::uint64_t seed);

}  // namespace ddpm
