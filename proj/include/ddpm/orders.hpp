// SPDX-License-Identifier: Apache-2.0

// Empirical convergence-order study of the DPM-Solver family on the analytic
// Gaussian predictor, where the probability-flow map is known in closed form.

#pragma once

#include <cstddef>
#include <vector>

#include "ddpm/schedule.hpp"

namespace ddpm {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Exact probability-flow image of `y_start` (at t = 1) at time `t` for the
/// scalar data law N(mu0, s0^2).
double gaussian_flow_exact(double y_start, double t, double mu0, double s0,
                           const VarianceSchedule& schedule);

struct OrderStudy {
  int solver_order = 1;
  std::vector<std::size_t> steps;
  std::vector<double> errors;
  /// Convergence order: minus the slope of log(error) against log(steps).
  double order = 0.0;
  double r_squared = 0.0;
};

/// Runs DPM-Solver-1/2/3 with `steps` equal-lambda steps from t = 1 to the
/// sampling floor and measures the endpoint mean error. The predictor is
/// affine in y, so the solver is an affine map and the mean of the pushed
/// N(0, 1) start is the image of 0.
std::vector<OrderStudy> convergence_orders(double mu0, double s0,
                                           const std::vector<std::size_t>& ladder,
                                           const VarianceSchedule& schedule);

}  // namespace ddpm
