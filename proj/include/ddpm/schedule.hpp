// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ddpm {

/// The three numbers that fully determine a linear schedule. Derived tables
/// are always recomputed from these; they are never serialized.
struct ScheduleDescriptor {
  std::uint64_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  bool operator==(const ScheduleDescriptor&) const = default;
};

/// Coefficients of the variance-preserving SDE dy = f y dt + g dw at a
/// continuous time t in [0, 1], together with the marginal scales.
struct ContinuousCoefficients {
  double f = 0.0;       // d log(eta) / dt
  double g2 = 0.0;      // squared diffusion coefficient
  double eta = 1.0;     // signal scale
  double sigma = 0.0;   // marginal noise std
  double lambda = 0.0;  // log(eta / sigma)
};

/// Discrete beta table plus every quantity derived from it, and the
/// closed-form continuous-time extension used by the ODE solvers.
///
/// Discrete accessors take the 1-based step index t in [1, T], matching the
/// usual notation; alpha_bar(0) is defined as 1. Two different "sigma"s live
/// here and must not be confused: sigma_marginal(t) = sqrt(1 - alpha_bar_t) is
/// the noise scale of the closed-form marginal, sigma_posterior(t) is the std
/// of q(y_{t-1} | y_t, y_0).
///
/// Immutable after construction.
class VarianceSchedule {
 public:
  /// Smallest continuous time accepted by the continuous-time queries.
  static constexpr double kMinTime = 1e-6;

  /// beta_t = beta_start + (t-1)/(T-1) (beta_end - beta_start). Throws
  /// DomainError unless 0 < beta_start <= beta_end < 1 and T >= 1.
  static VarianceSchedule linear(std::size_t steps, double beta_start, double beta_end);
  static VarianceSchedule from_descriptor(const ScheduleDescriptor& d);

  std::size_t steps() const { return beta_.size(); }
  const ScheduleDescriptor& descriptor() const { return descriptor_; }

  double beta(std::size_t t) const;
  double alpha(std::size_t t) const;
  double alpha_bar(std::size_t t) const;  // t in [0, T]
  double eta(std::size_t t) const;
  double sigma_marginal(std::size_t t) const;
  double sigma_posterior(std::size_t t) const;
  double lambda(std::size_t t) const;

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }
  const std::vector<double>& lambdas() const { return lambda_; }

  /// Continuous beta(t) = T beta_start + t T (beta_end - beta_start), and
  /// log eta(t) = -1/2 integral_0^t beta(s) ds in closed form.
  ContinuousCoefficients continuous(double t) const;
  double continuous_beta(double t) const;
  double continuous_log_eta(double t) const;
  double continuous_lambda(double t) const;

  /// Inverse of continuous_lambda by bisection on [kMinTime, 1].
  double t_from_lambda(double lam) const;

 private:
  VarianceSchedule() = default;
  void check_step(std::size_t t) const;
  void check_time(double t) const;

  ScheduleDescriptor descriptor_;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;  // alpha_bar_[0] = 1, alpha_bar_[t] for t in [1, T]
  std::vector<double> eta_;
  std::vector<double> sigma_marginal_;
  std::vector<double> sigma_posterior_;
  std::vector<double> lambda_;
};

/// Maps a continuous solver time onto the discrete index the network was
/// trained with: 1000 * max(t_c - 1/T, 0). The factor 1000 is kept literal.
double discretize_time(double t_c, std::size_t steps);

}  // namespace ddpm
