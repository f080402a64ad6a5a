// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ddpm/sampler.hpp"
#include "ddpm/tensor.hpp"

namespace ddpm {

/// 10 log10(peak^2 / MSE). Identical images give +infinity.
double psnr(const ImageTensor& reference, const ImageTensor& test, double peak);

/// Mean local SSIM over every position of an 11x11 Gaussian window (std 1.5)
/// that fits inside the image, K1 = 0.01, K2 = 0.03. Single channel only.
double ssim(const ImageTensor& reference, const ImageTensor& test, double peak);

/// |reference - test| elementwise.
ImageTensor abs_error_map(const ImageTensor& reference, const ImageTensor& test);

struct MetricReport {
  std::string method;
  std::vector<std::string> names;
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Scores test[i] against reference[i]; the means are plain arithmetic means.
MetricReport evaluate(const std::string& method, const std::vector<ImageTensor>& reference,
                      const std::vector<ImageTensor>& test, double peak,
                      std::vector<std::string> names = {});

struct BenchResult {
  double mean_seconds = 0.0;
  std::vector<double> seconds;
  std::size_t nfe = 0;
};

/// Times `run` `repetitions` times on a monotonic clock after one untimed
/// warm-up. NFE is read from the returned trace.
BenchResult bench(const std::function<SamplerTrace()>& run, std::size_t repetitions);

}  // namespace ddpm
