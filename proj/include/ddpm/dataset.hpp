// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddpm/tensor.hpp"

namespace ddpm {

struct ImagePair {
  ImageTensor ldct;  // condition
  ImageTensor ndct;  // target
};

struct DatasetMetadata {
  std::string source;
  double value_low = 0.0;
  double value_high = 1.0;
  // Display window in the original intensity units (e.g. HU).
  double window_low = 0.0;
  double window_high = 1.0;
};

struct PairedDataset {
  std::vector<ImagePair> pairs;
  DatasetMetadata metadata;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  /// Throws DataError on a shape-mismatched pair.
  void validate() const;
};

inline constexpr std::size_t kDefaultPhantomSize = 32;
inline constexpr double kLowDoseBaseStd = 0.02;

/// Piecewise-constant phantom: a background disk carrying 3 to 8 random
/// ellipses with distinct intensities, all values in [0, 1]. Requires
/// size >= 16.
ImageTensor generate_phantom(std::size_t size, std::uint64_t seed);

/// Adds N(0, (0.02 sqrt(1/dose - 1))^2) noise and clamps to [0, 1]. This is a
/// plain Gaussian image-domain model, not a CT physics simulation.
ImageTensor simulate_low_dose(const ImageTensor& ndct, double dose_factor, std::uint64_t seed);

/// Pairs (simulate_low_dose(p_k), p_k) for phantoms p_k seeded from `seed`.
PairedDataset make_synthetic_dataset(std::size_t count, std::size_t size, double dose_factor,
                                     std::uint64_t seed);

/// Tensor file: "IMGT", channels/height/width as u32 LE, then f64 LE values.
void save_tensor(const ImageTensor& t, const std::filesystem::path& path);
ImageTensor load_tensor(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const ImageTensor& t);
ImageTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

/// Directory layout: pair_<k>_ldct.imgt / pair_<k>_ndct.imgt, plus an optional
/// metadata.ini with window_low / window_high keys.
PairedDataset load_paired_dir(const std::filesystem::path& dir);
void save_paired_dir(const PairedDataset& data, const std::filesystem::path& dir);

/// Linear map [low, high] -> [0, 255], clamped, rounded half-to-even.
std::uint8_t window_to_gray(double value, double window_low, double window_high);

/// Writes the first channel as an 8-bit binary PGM (P5).
void export_display_png(const ImageTensor& t, double window_low, double window_high,
                        const std::filesystem::path& path);

}  // namespace ddpm
