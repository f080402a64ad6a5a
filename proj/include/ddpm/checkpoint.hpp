// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddpm/denoiser.hpp"
#include "ddpm/schedule.hpp"

namespace ddpm {

enum class TrainMode : std::uint32_t { kDdpm = 0, kBaseline = 1 };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);

struct TrainingMetadata {
  TrainMode mode = TrainMode::kDdpm;
  std::uint64_t iterations = 0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingMetadata&) const = default;
};

/// Binary layout, all integers and reals little-endian:
///
///   "DDPMCKPT"                      8 bytes
///   version                         u32 (= kCheckpointVersion)
///   T                               u64
///   beta_start, beta_end            f64, f64
///   in, hidden, out, embed_dim      u32 x 4
///   mode                            u32 (0 ddpm, 1 baseline)
///   iterations, seed                u64, u64
///   parameter count                 u64
///   parameters                      f64 x count, declared layer order
struct Checkpoint {
  ScheduleDescriptor schedule;
  ConvArchitecture architecture;
  TrainingMetadata metadata;
  std::vector<double> parameters;

  ConvDenoiser denoiser() const { return ConvDenoiser(architecture, parameters); }
  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ddpm
