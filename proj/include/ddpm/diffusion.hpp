// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "ddpm/schedule.hpp"
#include "ddpm/tensor.hpp"

namespace ddpm {

/// Forward-process and posterior arithmetic. Noise is always passed in, never
/// drawn here, so every function is deterministic and affine in its tensors.

struct PosteriorParams {
  ImageTensor mean;
  double std = 0.0;  // isotropic; zero exactly at t = 1
};

/// One step of the forward chain: sqrt(1 - beta_t) y_prev + sqrt(beta_t) noise.
ImageTensor forward_step_sample(const ImageTensor& y_prev, std::size_t t, const ImageTensor& noise,
                                const VarianceSchedule& schedule);

/// Closed-form marginal: sqrt(alpha_bar_t) y0 + sqrt(1 - alpha_bar_t) eps.
ImageTensor forward_marginal_sample(const ImageTensor& y0, std::size_t t, const ImageTensor& eps,
                                    const VarianceSchedule& schedule);

/// Mean and std of q(y_{t-1} | y_t, y_0).
PosteriorParams posterior_params(const ImageTensor& y_t, const ImageTensor& y0, std::size_t t,
                                 const VarianceSchedule& schedule);

/// The same posterior mean written in terms of the noise that produced y_t:
/// (y_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t).
ImageTensor posterior_mean_from_eps(const ImageTensor& y_t, const ImageTensor& eps, std::size_t t,
                                    const VarianceSchedule& schedule);

/// Weight (1 - alpha_t)^2 / (2 sigma_post^2 alpha_bar_t (1 - alpha_bar_t)) that
/// turns the unweighted noise-prediction loss into the variational bound term.
/// Infinite at t = 1 where the posterior variance vanishes.
double eps_loss_weight(std::size_t t, const VarianceSchedule& schedule);

}  // namespace ddpm
