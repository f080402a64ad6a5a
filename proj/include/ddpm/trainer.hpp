// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddpm/checkpoint.hpp"
#include "ddpm/dataset.hpp"
#include "ddpm/denoiser.hpp"
#include "ddpm/schedule.hpp"
#include "ddpm/tensor.hpp"

namespace ddpm {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 4;
  std::size_t max_iterations = 1000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kDdpm;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t jobs = 1;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct LossResult {
  double loss = 0.0;
  ImageTensor output_grad;  // d loss / d network output
};

/// Unweighted noise-prediction loss mean((eps - D(y_t, x, t))^2) with
/// y_t = forward_marginal_sample(y0, t, eps). The network output and cache
/// are left in `cache` for backpropagation when non-null.
LossResult ddpm_loss(const ImageTensor& y0, const ImageTensor& x, std::size_t t,
                     const ImageTensor& eps, const ConvDenoiser& net,
                     const VarianceSchedule& schedule, ConvDenoiser::Cache* cache = nullptr);

/// Same loss given an already-perturbed y_t.
LossResult ddpm_loss_at(const ImageTensor& y_t, const ImageTensor& x, std::size_t t,
                        const ImageTensor& eps, const ConvDenoiser& net,
                        const VarianceSchedule& schedule, ConvDenoiser::Cache* cache = nullptr);

/// Direct supervised regression mean((D(x, x, 0) - y0)^2).
LossResult baseline_loss(const ImageTensor& x, const ImageTensor& y0, const ConvDenoiser& net,
                         ConvDenoiser::Cache* cache = nullptr);

/// Bias-corrected Adam update in place. Throws NumericError naming the layer
/// of the first non-finite gradient; parameters are untouched in that case.
void adam_step(ConvDenoiser& net, std::span<const double> grads, AdamState& state,
               const TrainConfig& config);

struct TrainRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double weighted_loss = 0.0;  // diagnostic only, never optimized
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainRecord> history;
};

/// Optional per-iteration callback (progress reporting).
using TrainObserver = std::function<void(const TrainRecord&)>;

/// Runs config.max_iterations optimizer steps. Every random draw is keyed by
/// (seed, iteration, batch slot), so the history is bitwise reproducible and
/// independent of config.jobs.
TrainResult train(const PairedDataset& data, ConvDenoiser net, const TrainConfig& config,
                  const VarianceSchedule& schedule, const TrainObserver& observer = {});

void write_loss_csv(const std::vector<TrainRecord>& history, const std::string& path);

}  // namespace ddpm
