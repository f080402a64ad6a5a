// SPDX-License-Identifier: Apache-2.0

#include "ddpm/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ddpm/diffusion.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/parallel.hpp"
#include "ddpm/rng.hpp"

namespace ddpm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
  if (batch_size < 1) throw DomainError("batch_size must be at least 1");
  if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw DomainError("adam_epsilon must be positive");
}

namespace {

LossResult squared_error(const ImageTensor& prediction, const ImageTensor& target) {
  LossResult r;
  r.output_grad = ImageTensor(prediction.shape());
  const double n = static_cast<double>(prediction.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    acc += d * d;
    r.output_grad[i] = 2.0 * d / n;
  }
  r.loss = acc / n;
  return r;
}

}  // namespace

LossResult ddpm_loss_at(const ImageTensor& y_t, const ImageTensor& x, std::size_t t,
                        const ImageTensor& eps, const ConvDenoiser& net,
                        const VarianceSchedule& schedule, ConvDenoiser::Cache* cache) {
  require_same_shape(y_t, eps, "ddpm_loss");
  require_same_shape(y_t, x, "ddpm_loss condition");
  const Timestep ts = Timestep::discrete(t, schedule.steps());
  (void)schedule.beta(t);  // range check
  return squared_error(net.forward(y_t, &x, ts.network_index, cache), eps);
}

LossResult ddpm_loss(const ImageTensor& y0, const ImageTensor& x, std::size_t t,
                     const ImageTensor& eps, const ConvDenoiser& net,
                     const VarianceSchedule& schedule, ConvDenoiser::Cache* cache) {
  return ddpm_loss_at(forward_marginal_sample(y0, t, eps, schedule), x, t, eps, net, schedule,
                      cache);
}

LossResult baseline_loss(const ImageTensor& x, const ImageTensor& y0, const ConvDenoiser& net,
                         ConvDenoiser::Cache* cache) {
  require_same_shape(x, y0, "baseline_loss");
  return squared_error(net.forward(x, &x, 0.0, cache), y0);
}

void adam_step(ConvDenoiser& net, std::span<const double> grads, AdamState& state,
               const TrainConfig& config) {
  auto params = net.parameters();
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: gradient/state length does not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient in layer " + net.layer_of(i));
    }
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double step = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(b1, step);
  const double corr2 = 1.0 - std::pow(b2, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / corr1;
    const double v_hat = state.v[i] / corr2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
  }
}

TrainResult train(const PairedDataset& data, ConvDenoiser net, const TrainConfig& config,
                  const VarianceSchedule& schedule, const TrainObserver& observer) {
  config.validate();
  if (data.empty()) throw DataError("training dataset is empty");
  data.validate();

  const std::size_t batch = config.batch_size;
  const auto n_pairs = static_cast<std::int64_t>(data.size());
  const auto T = static_cast<std::int64_t>(schedule.steps());
  AdamState adam(net.parameters().size());

  struct Slot {
    double loss = 0.0;
    double weighted = 0.0;
    bool weight_finite = false;
    std::vector<double> grad;
  };
  std::vector<Slot> slots(batch);

  TrainResult result;
  result.history.reserve(config.max_iterations);

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    parallel_for(batch, config.jobs, [&](std::size_t b) {
      const auto slot = static_cast<std::uint32_t>(b);
      CounterRng pick(config.seed, StreamRole::kTrainPair, iter, slot);
      const ImagePair& pair = data.pairs[static_cast<std::size_t>(pick.uniform_int(0, n_pairs - 1))];
      ConvDenoiser::Cache cache;
      LossResult lr;
      Slot& s = slots[b];
      if (config.mode == TrainMode::kDdpm) {
        CounterRng tpick(config.seed, StreamRole::kTrainTimestep, iter, slot);
        const auto t = static_cast<std::size_t>(tpick.uniform_int(1, T));
        CounterRng noise(config.seed, StreamRole::kTrainNoise, iter, slot);
        const ImageTensor eps = noise.normal_like(pair.ndct.shape());
        lr = ddpm_loss(pair.ndct, pair.ldct, t, eps, net, schedule, &cache);
        const double w = eps_loss_weight(t, schedule);
        s.weight_finite = std::isfinite(w);
        s.weighted = s.weight_finite ? w * lr.loss : 0.0;
      } else {
        lr = baseline_loss(pair.ldct, pair.ndct, net, &cache);
        s.weight_finite = false;
        s.weighted = 0.0;
      }
      s.loss = lr.loss;
      s.grad = net.backward(lr.output_grad, cache);
    });

    // Fixed-order reduction.
    std::vector<double> grad(net.parameters().size(), 0.0);
    double loss = 0.0;
    double weighted = 0.0;
    std::size_t weighted_count = 0;
    for (const Slot& s : slots) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += s.grad[i];
      loss += s.loss;
      if (s.weight_finite) {
        weighted += s.weighted;
        ++weighted_count;
      }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    for (double& g : grad) g *= inv;
    loss *= inv;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at iteration " + std::to_string(iter));
    }
    adam_step(net, grad, adam, config);

    TrainRecord rec{iter, loss,
                    weighted_count > 0 ? weighted / static_cast<double>(weighted_count)
                                       : std::numeric_limits<double>::quiet_NaN()};
    result.history.push_back(rec);
    if (observer) observer(rec);
  }

  const auto params = net.parameters();
  result.checkpoint.schedule = schedule.descriptor();
  result.checkpoint.architecture = net.architecture();
  result.checkpoint.metadata = {config.mode, config.max_iterations, config.seed};
  result.checkpoint.parameters.assign(params.begin(), params.end());
  return result;
}

void write_loss_csv(const std::vector<TrainRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  out << "iteration,loss,diagnostic_weighted_loss\n";
  for (const auto& r : history) {
    out << r.iteration << ',' << r.loss << ',' << r.weighted_loss << '\n';
  }
}

}  // namespace ddpm
