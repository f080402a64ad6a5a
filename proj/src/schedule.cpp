// SPDX-License-Identifier: Apache-2.0

#include "ddpm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddpm/errors.hpp"

namespace ddpm {

VarianceSchedule VarianceSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw DomainError("schedule needs at least one step");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw DomainError("schedule requires 0 < beta_start <= beta_end < 1, got [" +
                      std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  VarianceSchedule s;
  s.descriptor_ = {steps, beta_start, beta_end};
  s.beta_.resize(steps);
  s.alpha_.resize(steps);
  s.alpha_bar_.resize(steps + 1);
  s.eta_.resize(steps);
  s.sigma_marginal_.resize(steps);
  s.sigma_posterior_.resize(steps);
  s.lambda_.resize(steps);

  s.alpha_bar_[0] = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps > 1 ? static_cast<double>(i) / static_cast<double>(steps - 1) : 0.0;
    const double beta = beta_start + frac * (beta_end - beta_start);
    s.beta_[i] = beta;
    s.alpha_[i] = 1.0 - beta;
    s.alpha_bar_[i + 1] = s.alpha_bar_[i] * s.alpha_[i];
    const double abar = s.alpha_bar_[i + 1];
    s.eta_[i] = std::sqrt(abar);
    s.sigma_marginal_[i] = std::sqrt(1.0 - abar);
    // (1 - abar_{t-1}) is exactly 0 at t = 1.
    s.sigma_posterior_[i] = std::sqrt((1.0 - s.alpha_bar_[i]) * beta / (1.0 - abar));
    s.lambda_[i] = std::log(s.eta_[i] / s.sigma_marginal_[i]);
  }
  return s;
}

VarianceSchedule VarianceSchedule::from_descriptor(const ScheduleDescriptor& d) {
  return linear(static_cast<std::size_t>(d.steps), d.beta_start, d.beta_end);
}

void VarianceSchedule::check_step(std::size_t t) const {
  if (t < 1 || t > beta_.size()) {
    throw DomainError("step " + std::to_string(t) + " outside [1, " + std::to_string(beta_.size()) +
                      "]");
  }
}

void VarianceSchedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("continuous time " + std::to_string(t) + " outside [0, 1]");
  }
}

double VarianceSchedule::beta(std::size_t t) const { check_step(t); return beta_[t - 1]; }
double VarianceSchedule::alpha(std::size_t t) const { check_step(t); return alpha_[t - 1]; }
double VarianceSchedule::eta(std::size_t t) const { check_step(t); return eta_[t - 1]; }
double VarianceSchedule::lambda(std::size_t t) const { check_step(t); return lambda_[t - 1]; }

double VarianceSchedule::alpha_bar(std::size_t t) const {
  if (t > beta_.size()) check_step(t);
  return alpha_bar_[t];
}

double VarianceSchedule::sigma_marginal(std::size_t t) const {
  check_step(t);
  return sigma_marginal_[t - 1];
}

double VarianceSchedule::sigma_posterior(std::size_t t) const {
  check_step(t);
  return sigma_posterior_[t - 1];
}

double VarianceSchedule::continuous_beta(double t) const {
  check_time(t);
  const double scale = static_cast<double>(descriptor_.steps);
  const double b0 = scale * descriptor_.beta_start;
  const double b1 = scale * descriptor_.beta_end;
  return b0 + t * (b1 - b0);
}

double VarianceSchedule::continuous_log_eta(double t) const {
  check_time(t);
  const double scale = static_cast<double>(descriptor_.steps);
  const double b0 = scale * descriptor_.beta_start;
  const double b1 = scale * descriptor_.beta_end;
  return -0.5 * (b0 * t + 0.5 * (b1 - b0) * t * t);
}

ContinuousCoefficients VarianceSchedule::continuous(double t) const {
  const double log_eta = continuous_log_eta(t);
  const double beta = continuous_beta(t);
  // sigma^2 = 1 - eta^2 = -expm1(2 log eta), accurate for small t.
  const double sigma2 = -std::expm1(2.0 * log_eta);
  if (!(sigma2 > 0.0)) {
    throw NumericError("marginal sigma underflows at t = " + std::to_string(t));
  }
  ContinuousCoefficients c;
  c.f = -0.5 * beta;
  c.g2 = beta;
  c.eta = std::exp(log_eta);
  c.sigma = std::sqrt(sigma2);
  c.lambda = log_eta - 0.5 * std::log(sigma2);
  if (!std::isfinite(c.lambda) || !std::isfinite(c.sigma)) {
    throw NumericError("non-finite continuous coefficients at t = " + std::to_string(t));
  }
  return c;
}

double VarianceSchedule::continuous_lambda(double t) const { return continuous(t).lambda; }

double VarianceSchedule::t_from_lambda(double lam) const {
  const double lam_hi = continuous_lambda(kMinTime);
  const double lam_lo = continuous_lambda(1.0);
  if (!(lam >= lam_lo && lam <= lam_hi)) {
    throw DomainError("lambda " + std::to_string(lam) + " outside attainable range [" +
                      std::to_string(lam_lo) + ", " + std::to_string(lam_hi) + "]");
  }
  if (lam == lam_lo) return 1.0;
  if (lam == lam_hi) return kMinTime;
  // lambda is strictly decreasing in t.
  double lo = kMinTime;
  double hi = 1.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (continuous_lambda(mid) > lam) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double discretize_time(double t_c, std::size_t steps) {
  return 1000.0 * std::max(t_c - 1.0 / static_cast<double>(steps), 0.0);
}

}  // namespace ddpm
