// SPDX-License-Identifier: Apache-2.0

#include "ddpm/sampler.hpp"

#include <chrono>
#include <cmath>

#include "ddpm/diffusion.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/rng.hpp"

namespace ddpm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> lambda_grid(std::size_t steps, double t_start, double t_end,
                                const VarianceSchedule& schedule) {
  const double lam0 = schedule.continuous_lambda(t_start);
  const double lam1 = schedule.continuous_lambda(t_end);
  std::vector<double> ts(steps + 1);
  ts.front() = t_start;
  ts.back() = t_end;
  for (std::size_t i = 1; i < steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(steps);
    ts[i] = schedule.t_from_lambda(lam0 + frac * (lam1 - lam0));
  }
  return ts;
}

void check_interval(double t_start, double t_end) {
  if (!(t_start <= 1.0 && t_end < t_start && t_end >= kSamplerMinTime * (1.0 - 1e-12))) {
    throw DomainError("sampling interval must satisfy 1 >= t_start > t_end >= t_min");
  }
}

/// Shared quantities of one solver step from t_prev down to t.
struct StepFrame {
  ContinuousCoefficients prev;
  ContinuousCoefficients next;
  double h = 0.0;
};

StepFrame frame(double t_prev, double t, const VarianceSchedule& schedule) {
  if (!(t < t_prev)) throw DomainError("solver step times must decrease");
  StepFrame f{schedule.continuous(t_prev), schedule.continuous(t), 0.0};
  f.h = f.next.lambda - f.prev.lambda;
  if (!(f.h > 0.0)) throw DomainError("solver step must increase lambda");
  return f;
}

ImageTensor eval(const NoisePredictor& net, const ImageTensor& y, const ImageTensor* condition,
                 double t, const VarianceSchedule& schedule) {
  return net.predict(y, condition, Timestep::from_continuous(t, schedule.steps()));
}

}  // namespace

// ---------------------------------------------------------------------------

SamplePlan SamplePlan::uniform(int order, std::size_t steps, double t_start, double t_end,
                               const VarianceSchedule& schedule) {
  if (order < 1 || order > 3) throw DomainError("solver order must be 1, 2 or 3");
  if (steps == 0) throw DomainError("plan needs at least one step");
  check_interval(t_start, t_end);
  const auto ts = lambda_grid(steps, t_start, t_end, schedule);
  SamplePlan plan;
  for (std::size_t i = 0; i < steps; ++i) plan.segments.push_back({order, ts[i], ts[i + 1]});
  plan.total_nfe = steps * static_cast<std::size_t>(order);
  return plan;
}

void SamplePlan::validate() const {
  if (segments.empty()) throw DomainError("sample plan has no segments");
  std::size_t nfe = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.order < 1 || s.order > 3) throw DomainError("sample plan: invalid order");
    if (!(s.t_end < s.t_start)) throw DomainError("sample plan: times must decrease");
    if (i > 0 && segments[i - 1].t_end != s.t_start) {
      throw DomainError("sample plan: segments are not contiguous");
    }
    nfe += static_cast<std::size_t>(s.order);
  }
  if (nfe != total_nfe) throw DomainError("sample plan: total_nfe does not match segment orders");
}

SamplePlan plan_nfe(std::size_t budget, double t_start, double t_end,
                    const VarianceSchedule& schedule) {
  if (budget == 0) throw DomainError("NFE budget must be at least 1");
  check_interval(t_start, t_end);
  std::vector<int> orders(budget / 3, 3);
  if (budget % 3 != 0) orders.push_back(static_cast<int>(budget % 3));
  const auto ts = lambda_grid(orders.size(), t_start, t_end, schedule);
  SamplePlan plan;
  for (std::size_t i = 0; i < orders.size(); ++i) plan.segments.push_back({orders[i], ts[i], ts[i + 1]});
  plan.total_nfe = budget;
  return plan;
}

ImageTensor CountingPredictor::predict(const ImageTensor& y, const ImageTensor* condition,
                                       const Timestep& t) const {
  ++calls_;
  return inner_->predict(y, condition, t);
}

ImageTensor initial_noise(const Shape& shape, std::uint64_t seed) {
  return CounterRng(seed, StreamRole::kInitialNoise).normal_like(shape);
}

// ---------------------------------------------------------------------------

ImageTensor ancestral_step(const ImageTensor& y, const ImageTensor* condition, std::size_t t,
                           const ImageTensor& z, const NoisePredictor& net,
                           const VarianceSchedule& schedule) {
  require_same_shape(y, z, "ancestral_step noise");
  if (t == 1) {
    for (double v : z.values()) {
      if (v != 0.0) throw DomainError("ancestral_step: noise must be zero at t = 1");
    }
  }
  const ImageTensor eps = net.predict(y, condition, Timestep::discrete(t, schedule.steps()));
  ImageTensor out = posterior_mean_from_eps(y, eps, t, schedule);
  const double sp = schedule.sigma_posterior(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sp * z[i];
  return out;
}

SampleResult ancestral_sample(const Shape& shape, const ImageTensor* condition,
                              const NoisePredictor& net, const VarianceSchedule& schedule,
                              std::uint64_t seed) {
  const auto start = Clock::now();
  CountingPredictor counted(net);
  SampleResult r;
  ImageTensor y = initial_noise(shape, seed);
  const ImageTensor zero(shape);
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    const std::size_t before = counted.calls();
    if (t > 1) {
      const ImageTensor z = CounterRng(seed, StreamRole::kAncestralNoise, t).normal_like(shape);
      y = ancestral_step(y, condition, t, z, counted, schedule);
    } else {
      y = ancestral_step(y, condition, t, zero, counted, schedule);
    }
    r.trace.steps.push_back({static_cast<double>(t) / static_cast<double>(schedule.steps()),
                             counted.calls() - before});
  }
  r.image = std::move(y);
  r.trace.nfe = counted.calls();
  r.trace.seconds = seconds_since(start);
  return r;
}

// ---------------------------------------------------------------------------

ImageTensor ode_rhs(const ImageTensor& y, const ImageTensor* condition, double t,
                    const NoisePredictor& net, const VarianceSchedule& schedule) {
  if (t < kSamplerMinTime * (1.0 - 1e-12)) {
    throw DomainError("ode_rhs: t = " + std::to_string(t) + " is below t_min");
  }
  const ContinuousCoefficients c = schedule.continuous(t);
  const ImageTensor d = eval(net, y, condition, t, schedule);
  return lincomb(c.f, y, c.g2 / (2.0 * c.sigma), d);
}

SampleResult rk4_integrate(const ImageTensor& y_start, const ImageTensor* condition,
                           const NoisePredictor& net, const VarianceSchedule& schedule,
                           std::size_t steps, TimeGrid grid) {
  if (steps == 0) throw DomainError("rk4 needs at least one step");
  const auto start = Clock::now();
  CountingPredictor counted(net);
  std::vector<double> ts;
  if (grid == TimeGrid::kUniformLambda) {
    ts = lambda_grid(steps, 1.0, kSamplerMinTime, schedule);
  } else {
    ts.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      ts[i] = 1.0 + (kSamplerMinTime - 1.0) * static_cast<double>(i) / static_cast<double>(steps);
    }
    ts.back() = kSamplerMinTime;
  }
  SampleResult r;
  ImageTensor y = y_start;
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t before = counted.calls();
    const double t0 = ts[i];
    const double h = ts[i + 1] - t0;
    const double tm = t0 + 0.5 * h;
    const ImageTensor k1 = ode_rhs(y, condition, t0, counted, schedule);
    const ImageTensor k2 = ode_rhs(lincomb(1.0, y, 0.5 * h, k1), condition, tm, counted, schedule);
    const ImageTensor k3 = ode_rhs(lincomb(1.0, y, 0.5 * h, k2), condition, tm, counted, schedule);
    const ImageTensor k4 = ode_rhs(lincomb(1.0, y, h, k3), condition, ts[i + 1], counted, schedule);
    for (std::size_t j = 0; j < y.size(); ++j) {
      y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    r.trace.steps.push_back({ts[i + 1], counted.calls() - before});
  }
  r.image = std::move(y);
  r.trace.nfe = counted.calls();
  r.trace.seconds = seconds_since(start);
  return r;
}

SampleResult rk4_sample(const Shape& shape, const ImageTensor* condition,
                        const NoisePredictor& net, const VarianceSchedule& schedule,
                        std::size_t steps, std::uint64_t seed, TimeGrid grid) {
  const auto start = Clock::now();
  SampleResult r = rk4_integrate(initial_noise(shape, seed), condition, net, schedule, steps, grid);
  r.trace.seconds = seconds_since(start);
  return r;
}

// ---------------------------------------------------------------------------

ImageTensor dpm1_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule) {
  const StepFrame f = frame(t_prev, t, schedule);
  const ImageTensor d0 = eval(net, y, condition, t_prev, schedule);
  return lincomb(f.next.eta / f.prev.eta, y, -f.next.sigma * std::expm1(f.h), d0);
}

ImageTensor dpm2_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule) {
  const StepFrame f = frame(t_prev, t, schedule);
  const double s = schedule.t_from_lambda(f.prev.lambda + 0.5 * f.h);
  const ContinuousCoefficients cs = schedule.continuous(s);

  const ImageTensor d0 = eval(net, y, condition, t_prev, schedule);
  const ImageTensor u = lincomb(cs.eta / f.prev.eta, y, -cs.sigma * std::expm1(0.5 * f.h), d0);
  const ImageTensor d1 = eval(net, u, condition, s, schedule);
  return lincomb(f.next.eta / f.prev.eta, y, -f.next.sigma * std::expm1(f.h), d1);
}

ImageTensor dpm3_step(const ImageTensor& y, const ImageTensor* condition, double t_prev, double t,
                      const NoisePredictor& net, const VarianceSchedule& schedule) {
  constexpr double r1 = 1.0 / 3.0;
  constexpr double r2 = 2.0 / 3.0;
  const StepFrame f = frame(t_prev, t, schedule);
  const double h = f.h;
  const double s1 = schedule.t_from_lambda(f.prev.lambda + r1 * h);
  const double s2 = schedule.t_from_lambda(f.prev.lambda + r2 * h);
  const ContinuousCoefficients c1 = schedule.continuous(s1);
  const ContinuousCoefficients c2 = schedule.continuous(s2);

  const ImageTensor d0 = eval(net, y, condition, t_prev, schedule);

  const ImageTensor u1 = lincomb(c1.eta / f.prev.eta, y, -c1.sigma * std::expm1(r1 * h), d0);
  ImageTensor v1 = eval(net, u1, condition, s1, schedule);
  v1 -= d0;

  const double phi2 = std::expm1(r2 * h) / (r2 * h) - 1.0;
  ImageTensor u2 = lincomb(c2.eta / f.prev.eta, y, -c2.sigma * std::expm1(r2 * h), d0);
  const double v1_coef = -c2.sigma * r2 / r1 * phi2;
  for (std::size_t i = 0; i < u2.size(); ++i) u2[i] += v1_coef * v1[i];
  ImageTensor v2 = eval(net, u2, condition, s2, schedule);
  v2 -= d0;

  const double phi = std::expm1(h) / h - 1.0;
  ImageTensor out = lincomb(f.next.eta / f.prev.eta, y, -f.next.sigma * std::expm1(h), d0);
  const double v2_coef = -f.next.sigma / r2 * phi;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += v2_coef * v2[i];
  return out;
}

SampleResult dpm_integrate(const ImageTensor& y_start, const ImageTensor* condition,
                           const NoisePredictor& net, const VarianceSchedule& schedule,
                           const SamplePlan& plan) {
  plan.validate();
  const auto start = Clock::now();
  CountingPredictor counted(net);
  SampleResult r;
  ImageTensor y = y_start;
  for (const PlanSegment& seg : plan.segments) {
    const std::size_t before = counted.calls();
    switch (seg.order) {
      case 1: y = dpm1_step(y, condition, seg.t_start, seg.t_end, counted, schedule); break;
      case 2: y = dpm2_step(y, condition, seg.t_start, seg.t_end, counted, schedule); break;
      default: y = dpm3_step(y, condition, seg.t_start, seg.t_end, counted, schedule); break;
    }
    r.trace.steps.push_back({seg.t_end, counted.calls() - before});
  }
  r.image = std::move(y);
  r.trace.nfe = counted.calls();
  r.trace.seconds = seconds_since(start);
  return r;
}

SampleResult dpm_sample(const Shape& shape, const ImageTensor* condition,
                        const NoisePredictor& net, const VarianceSchedule& schedule,
                        const SamplePlan& plan, std::uint64_t seed) {
  const auto start = Clock::now();
  SampleResult r = dpm_integrate(initial_noise(shape, seed), condition, net, schedule, plan);
  r.trace.seconds = seconds_since(start);
  return r;
}

}  // namespace ddpm
