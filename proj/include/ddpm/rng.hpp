// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "ddpm/tensor.hpp"

namespace ddpm {

/// Philox4x32-10 block function: maps a 128-bit counter and a 64-bit key to
/// 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Identifies an independent stream. Every draw is a pure function of
/// (seed, role, a, b, position), so results never depend on call order or
/// thread count.
enum class StreamRole : std::uint32_t {
  kInitialNoise = 1,
  kAncestralNoise = 2,
  kTrainPair = 3,
  kTrainTimestep = 4,
  kTrainNoise = 5,
  kPhantom = 6,
  kLowDose = 7,
  kNetInit = 8,
  kTest = 9,
  kSplit = 10,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamRole role, std::uint64_t a = 0, std::uint32_t b = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  void fill_normal(ImageTensor& out);
  ImageTensor normal_like(const Shape& shape);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives a child seed; used to fan one user seed out to per-image seeds.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ddpm
