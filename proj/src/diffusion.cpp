// SPDX-License-Identifier: Apache-2.0

#include "ddpm/diffusion.hpp"

#include <cmath>
#include <limits>

namespace ddpm {

ImageTensor forward_step_sample(const ImageTensor& y_prev, std::size_t t, const ImageTensor& noise,
                                const VarianceSchedule& schedule) {
  require_same_shape(y_prev, noise, "forward_step_sample");
  const double beta = schedule.beta(t);
  return lincomb(std::sqrt(1.0 - beta), y_prev, std::sqrt(beta), noise);
}

ImageTensor forward_marginal_sample(const ImageTensor& y0, std::size_t t, const ImageTensor& eps,
                                    const VarianceSchedule& schedule) {
  require_same_shape(y0, eps, "forward_marginal_sample");
  return lincomb(schedule.eta(t), y0, schedule.sigma_marginal(t), eps);
}

PosteriorParams posterior_params(const ImageTensor& y_t, const ImageTensor& y0, std::size_t t,
                                 const VarianceSchedule& schedule) {
  require_same_shape(y_t, y0, "posterior_params");
  const double alpha = schedule.alpha(t);
  const double abar = schedule.alpha_bar(t);
  const double abar_prev = schedule.alpha_bar(t - 1);
  const double coef_t = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);
  const double coef_0 = std::sqrt(abar_prev) * (1.0 - alpha) / (1.0 - abar);
  return {lincomb(coef_t, y_t, coef_0, y0), schedule.sigma_posterior(t)};
}

ImageTensor posterior_mean_from_eps(const ImageTensor& y_t, const ImageTensor& eps, std::size_t t,
                                    const VarianceSchedule& schedule) {
  require_same_shape(y_t, eps, "posterior_mean_from_eps");
  const double alpha = schedule.alpha(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = (1.0 - alpha) / schedule.sigma_marginal(t);
  return lincomb(inv_sqrt_alpha, y_t, -inv_sqrt_alpha * eps_coef, eps);
}

double eps_loss_weight(std::size_t t, const VarianceSchedule& schedule) {
  const double alpha = schedule.alpha(t);
  const double abar = schedule.alpha_bar(t);
  const double sp = schedule.sigma_posterior(t);
  if (sp == 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - alpha) * (1.0 - alpha) / (2.0 * sp * sp * abar * (1.0 - abar));
}

}  // namespace ddpm
