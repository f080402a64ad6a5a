// SPDX-License-Identifier: Apache-2.0

#include "ddpm/orders.hpp"

#include <cmath>

#include "ddpm/denoiser.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/sampler.hpp"

namespace ddpm {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DomainError("fit_line needs at least two matching points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("fit_line: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

double gaussian_flow_exact(double y_start, double t, double mu0, double s0,
                           const VarianceSchedule& schedule) {
  const auto a = schedule.continuous(1.0);
  const auto b = schedule.continuous(t);
  const double v1 = a.eta * a.eta * s0 * s0 + a.sigma * a.sigma;
  const double vt = b.eta * b.eta * s0 * s0 + b.sigma * b.sigma;
  return b.eta * mu0 + std::sqrt(vt / v1) * (y_start - a.eta * mu0);
}

std::vector<OrderStudy> convergence_orders(double mu0, double s0,
                                           const std::vector<std::size_t>& ladder,
                                           const VarianceSchedule& schedule) {
  if (ladder.size() < 2) throw DomainError("convergence study needs at least two step counts");
  const GaussianOracle oracle({ImageTensor::scalar(mu0), s0}, schedule);
  const double exact = gaussian_flow_exact(0.0, kSamplerMinTime, mu0, s0, schedule);
  std::vector<OrderStudy> out;
  for (int order = 1; order <= 3; ++order) {
    OrderStudy s;
    s.solver_order = order;
    std::vector<double> lx, ly;
    for (std::size_t steps : ladder) {
      const auto plan = SamplePlan::uniform(order, steps, 1.0, kSamplerMinTime, schedule);
      const double y = dpm_integrate(ImageTensor::scalar(0.0), nullptr, oracle, schedule, plan).image[0];
      const double err = std::abs(y - exact);
      if (!(err > 0.0)) throw NumericError("convergence study hit zero error; ladder too fine");
      s.steps.push_back(steps);
      s.errors.push_back(err);
      lx.push_back(std::log(static_cast<double>(steps)));
      ly.push_back(std::log(err));
    }
    const LineFit fit = fit_line(lx, ly);
    s.order = -fit.slope;
    s.r_squared = fit.r_squared;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ddpm
