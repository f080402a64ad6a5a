// SPDX-License-Identifier: Apache-2.0

// Central finite-difference oracle for the conv denoiser's backward pass.
// Test-only; shares nothing with the backward implementation beyond forward().

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ddpm/denoiser.hpp"
#include "ddpm/rng.hpp"

namespace ddpm::testing {

struct GradCheckEntry {
  std::string layer;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// Checks `per_layer` coordinates of every layer on the loss
/// mean((D(y, x, index) - target)^2) with step 1e-5.
inline std::vector<GradCheckEntry> conv_gradient_check(const ConvDenoiser& base, double index,
                                                       std::size_t per_layer) {
  const Shape shape{1, 6, 7};
  const ImageTensor y = CounterRng(101, StreamRole::kTest).normal_like(shape);
  const ImageTensor x = CounterRng(102, StreamRole::kTest).normal_like(shape);
  const ImageTensor target = CounterRng(103, StreamRole::kTest).normal_like(shape);
  const double n = static_cast<double>(shape.size());

  auto loss_of = [&](const ConvDenoiser& net) {
    const ImageTensor out = net.forward(y, &x, index);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += (out[i] - target[i]) * (out[i] - target[i]);
    return acc / n;
  };

  ConvDenoiser::Cache cache;
  const ImageTensor out = base.forward(y, &x, index, &cache);
  ImageTensor dl(shape);
  for (std::size_t i = 0; i < out.size(); ++i) dl[i] = 2.0 * (out[i] - target[i]) / n;
  const std::vector<double> grad = base.backward(dl, cache);

  std::vector<GradCheckEntry> report;
  const double h = 1e-5;
  for (const auto& layer : base.layers()) {
    for (std::size_t k = 0; k < per_layer && k < layer.size; ++k) {
      const std::size_t idx = layer.offset + (k * layer.size) / per_layer + (layer.size > 1 ? k % 2 : 0);
      const std::size_t i = std::min(idx, layer.offset + layer.size - 1);
      ConvDenoiser plus = base;
      ConvDenoiser minus = base;
      plus.parameters()[i] += h;
      minus.parameters()[i] -= h;
      const double numeric = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
      report.push_back({layer.name, i, grad[i], numeric, std::abs(numeric - grad[i]) / scale});
    }
  }
  return report;
}

}  // namespace ddpm::testing
