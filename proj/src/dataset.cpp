// SPDX-License-Identifier: Apache-2.0

#include "ddpm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <regex>
#include <sstream>

#include "byteio.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/rng.hpp"

namespace ddpm {

namespace {
constexpr std::string_view kTensorMagic = "IMGT";
}

void PairedDataset::validate() const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].ldct.shape() != pairs[i].ndct.shape()) {
      throw DataError("pair " + std::to_string(i) + " has mismatched shapes " +
                      pairs[i].ldct.shape().str() + " vs " + pairs[i].ndct.shape().str());
    }
  }
}

ImageTensor generate_phantom(std::size_t size, std::uint64_t seed) {
  if (size < 16) throw DomainError("phantom size must be at least 16, got " + std::to_string(size));
  CounterRng rng(seed, StreamRole::kPhantom);
  const double n = static_cast<double>(size);
  ImageTensor img({1, size, size}, 0.0);

  const double cx = n / 2.0 + (rng.uniform() - 0.5) * 0.05 * n;
  const double cy = n / 2.0 + (rng.uniform() - 0.5) * 0.05 * n;
  const double radius = n * (0.40 + 0.06 * rng.uniform());
  const double background = 0.15 + 0.2 * rng.uniform();

  auto inside_disk = [&](double px, double py) {
    return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= radius * radius;
  };
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      if (inside_disk(x + 0.5, y + 0.5)) img.at(0, y, x) = background;
    }
  }

  std::vector<double> used{0.0, background};
  const auto count = rng.uniform_int(3, 8);
  for (std::int64_t e = 0; e < count; ++e) {
    double level = 0.0;
    bool distinct = false;
    while (!distinct) {
      level = rng.uniform();
      distinct = std::all_of(used.begin(), used.end(),
                             [&](double u) { return std::abs(u - level) >= 0.05; });
    }
    used.push_back(level);

    const double r = radius * 0.6 * std::sqrt(rng.uniform());
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const double ex = cx + r * std::cos(phi);
    const double ey = cy + r * std::sin(phi);
    const double a = n * (0.06 + 0.18 * rng.uniform());
    const double b = n * (0.06 + 0.18 * rng.uniform());
    const double theta = std::numbers::pi * rng.uniform();
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double px = x + 0.5;
        const double py = y + 0.5;
        if (!inside_disk(px, py)) continue;
        const double u = (px - ex) * ct + (py - ey) * st;
        const double v = -(px - ex) * st + (py - ey) * ct;
        if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) img.at(0, y, x) = level;
      }
    }
  }
  return img;
}

ImageTensor simulate_low_dose(const ImageTensor& ndct, double dose_factor, std::uint64_t seed) {
  if (!(dose_factor > 0.0 && dose_factor <= 1.0)) {
    throw DomainError("dose_factor must lie in (0, 1], got " + std::to_string(dose_factor));
  }
  for (double v : ndct.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("simulate_low_dose expects values in [0, 1]");
  }
  if (dose_factor == 1.0) return ndct;
  const double std = kLowDoseBaseStd * std::sqrt(1.0 / dose_factor - 1.0);
  CounterRng rng(seed, StreamRole::kLowDose);
  ImageTensor out(ndct.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(ndct[i] + std * rng.normal(), 0.0, 1.0);
  }
  return out;
}

PairedDataset make_synthetic_dataset(std::size_t count, std::size_t size, double dose_factor,
                                     std::uint64_t seed) {
  PairedDataset d;
  d.pairs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ImageTensor ndct = generate_phantom(size, split_seed(seed, 2 * k));
    ImageTensor ldct = simulate_low_dose(ndct, dose_factor, split_seed(seed, 2 * k + 1));
    d.pairs.push_back({std::move(ldct), std::move(ndct)});
  }
  d.metadata.source = "synthetic phantoms, dose " + std::to_string(dose_factor) + ", seed " +
                      std::to_string(seed);
  return d;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_tensor(const ImageTensor& t) {
  detail::ByteWriter w;
  w.bytes(kTensorMagic);
  w.u32(static_cast<std::uint32_t>(t.shape().channels));
  w.u32(static_cast<std::uint32_t>(t.shape().height));
  w.u32(static_cast<std::uint32_t>(t.shape().width));
  for (double v : t.values()) w.f64(v);
  return w.take();
}

ImageTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "tensor file");
  r.expect(kTensorMagic);
  Shape s;
  s.channels = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  if (s.channels == 0 || s.height == 0 || s.width == 0) {
    throw DataError("tensor file: corrupt dimensions " + s.str());
  }
  if (r.remaining() != s.size() * 8) {
    throw DataError(r.remaining() < s.size() * 8 ? "tensor file: truncated file"
                                                 : "tensor file: trailing bytes");
  }
  std::vector<double> data(s.size());
  for (double& v : data) v = r.f64();
  return ImageTensor(s, std::move(data));
}

void save_tensor(const ImageTensor& t, const std::filesystem::path& path) {
  detail::write_file(path, encode_tensor(t));
}

ImageTensor load_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path));
}

PairedDataset load_paired_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  static const std::regex pattern(R"(pair_(\d+)_(ldct|ndct)\.imgt)");
  std::map<std::uint64_t, std::pair<std::filesystem::path, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    auto& slot = found[std::stoull(m[1].str())];
    (m[2] == "ldct" ? slot.first : slot.second) = entry.path();
  }
  if (found.empty()) throw DataError("no pair_<k>_{ldct,ndct}.imgt files in " + dir.string());

  PairedDataset d;
  d.metadata.source = dir.string();
  for (const auto& [k, paths] : found) {
    if (paths.first.empty() || paths.second.empty()) {
      throw DataError("pair " + std::to_string(k) + " is missing its ldct or ndct file");
    }
    d.pairs.push_back({load_tensor(paths.first), load_tensor(paths.second)});
  }
  d.validate();

  std::ifstream meta(dir / "metadata.ini");
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    const double value = std::stod(line.substr(eq + 1));
    if (key == "window_low") d.metadata.window_low = value;
    if (key == "window_high") d.metadata.window_high = value;
  }
  return d;
}

void save_paired_dir(const PairedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < data.pairs.size(); ++k) {
    save_tensor(data.pairs[k].ldct, dir / ("pair_" + std::to_string(k) + "_ldct.imgt"));
    save_tensor(data.pairs[k].ndct, dir / ("pair_" + std::to_string(k) + "_ndct.imgt"));
  }
  std::ofstream meta(dir / "metadata.ini", std::ios::trunc);
  meta.precision(17);
  meta << "window_low = " << data.metadata.window_low << "\n"
       << "window_high = " << data.metadata.window_high << "\n";
}

std::uint8_t window_to_gray(double value, double window_low, double window_high) {
  if (!(window_high > window_low)) throw DomainError("display window must have high > low");
  const double scaled = (value - window_low) / (window_high - window_low) * 255.0;
  // nearbyint follows the default round-half-to-even mode.
  return static_cast<std::uint8_t>(std::nearbyint(std::clamp(scaled, 0.0, 255.0)));
}

void export_display_png(const ImageTensor& t, double window_low, double window_high,
                        const std::filesystem::path& path) {
  if (!(window_high > window_low)) throw DomainError("display window must have high > low");
  const Shape& s = t.shape();
  std::ostringstream header;
  header << "P5\n" << s.width << ' ' << s.height << "\n255\n";
  std::vector<std::uint8_t> bytes;
  const std::string h = header.str();
  bytes.insert(bytes.end(), h.begin(), h.end());
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      bytes.push_back(window_to_gray(t.at(0, y, x), window_low, window_high));
    }
  }
  detail::write_file(path, bytes);
}

}  // namespace ddpm
