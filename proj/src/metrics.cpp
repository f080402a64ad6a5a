// SPDX-License-Identifier: Apache-2.0

#include "ddpm/metrics.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "ddpm/errors.hpp"

namespace ddpm {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowStd = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWindow * kWindow> gaussian_window() {
  std::array<double, kWindow * kWindow> w{};
  const double c = (kWindow - 1) / 2.0;
  double total = 0.0;
  for (std::size_t y = 0; y < kWindow; ++y) {
    for (std::size_t x = 0; x < kWindow; ++x) {
      const double dy = static_cast<double>(y) - c;
      const double dx = static_cast<double>(x) - c;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowStd * kWindowStd));
      w[y * kWindow + x] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double psnr(const ImageTensor& reference, const ImageTensor& test, double peak) {
  require_same_shape(reference, test, "psnr");
  if (!(peak > 0.0)) throw DomainError("psnr: peak must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - test[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageTensor& reference, const ImageTensor& test, double peak) {
  require_same_shape(reference, test, "ssim");
  if (!(peak > 0.0)) throw DomainError("ssim: peak must be positive");
  const Shape& s = reference.shape();
  if (s.channels != 1) throw ShapeError("ssim: single-channel images only, got " + s.str());
  if (s.height < kWindow || s.width < kWindow) {
    throw ShapeError("ssim: image " + s.str() + " is smaller than the 11x11 window");
  }
  static const auto window = gaussian_window();
  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + kWindow <= s.height; ++y0) {
    for (std::size_t x0 = 0; x0 + kWindow <= s.width; ++x0) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t wy = 0; wy < kWindow; ++wy) {
        for (std::size_t wx = 0; wx < kWindow; ++wx) {
          const double w = window[wy * kWindow + wx];
          const double a = reference.at(0, y0 + wy, x0 + wx);
          const double b = test.at(0, y0 + wy, x0 + wx);
          mx += w * a;
          my += w * b;
          sxx += w * (a * a);
          syy += w * (b * b);
          sxy += w * (a * b);
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

ImageTensor abs_error_map(const ImageTensor& reference, const ImageTensor& test) {
  require_same_shape(reference, test, "abs_error_map");
  ImageTensor out(reference.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(reference[i] - test[i]);
  return out;
}

MetricReport evaluate(const std::string& method, const std::vector<ImageTensor>& reference,
                      const std::vector<ImageTensor>& test, double peak,
                      std::vector<std::string> names) {
  if (reference.size() != test.size()) {
    throw DataError("evaluate: " + std::to_string(reference.size()) + " references vs " +
                    std::to_string(test.size()) + " test images");
  }
  if (reference.empty()) throw DataError("evaluate: no images");
  if (names.empty()) {
    for (std::size_t i = 0; i < reference.size(); ++i) names.push_back(std::to_string(i));
  }
  MetricReport r;
  r.method = method;
  r.names = std::move(names);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    r.psnr.push_back(psnr(reference[i], test[i], peak));
    r.ssim.push_back(ssim(reference[i], test[i], peak));
    r.mean_psnr += r.psnr.back();
    r.mean_ssim += r.ssim.back();
  }
  r.mean_psnr /= static_cast<double>(reference.size());
  r.mean_ssim /= static_cast<double>(reference.size());
  return r;
}

BenchResult bench(const std::function<SamplerTrace()>& run, std::size_t repetitions) {
  if (repetitions < 1) throw DomainError("bench needs at least one repetition");
  using Clock = std::chrono::steady_clock;
  BenchResult r;
  r.nfe = run().nfe;  // warm-up, not timed
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto start = Clock::now();
    const SamplerTrace trace = run();
    r.seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    if (trace.nfe != r.nfe) throw NumericError("bench: NFE changed between repetitions");
  }
  double total = 0.0;
  for (double s : r.seconds) total += s;
  r.mean_seconds = total / static_cast<double>(repetitions);
  return r;
}

}  // namespace ddpm
