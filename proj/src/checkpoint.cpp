// SPDX-License-Identifier: Apache-2.0

#include "ddpm/checkpoint.hpp"

#include "byteio.hpp"
#include "ddpm/errors.hpp"

namespace ddpm {

namespace {
constexpr std::string_view kMagic = "DDPMCKPT";
}

std::string to_string(TrainMode mode) {
  return mode == TrainMode::kBaseline ? "baseline" : "ddpm";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "ddpm") return TrainMode::kDdpm;
  if (s == "baseline") return TrainMode::kBaseline;
  throw DomainError("unknown training mode '" + s + "' (expected ddpm or baseline)");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.parameters.size() != ckpt.architecture.parameter_count()) {
    throw DomainError("checkpoint parameter count does not match its architecture");
  }
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.schedule.steps);
  w.f64(ckpt.schedule.beta_start);
  w.f64(ckpt.schedule.beta_end);
  w.u32(ckpt.architecture.in_channels);
  w.u32(ckpt.architecture.hidden);
  w.u32(ckpt.architecture.out_channels);
  w.u32(ckpt.architecture.embed_dim);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.mode));
  w.u64(ckpt.metadata.iterations);
  w.u64(ckpt.metadata.seed);
  w.u64(ckpt.parameters.size());
  for (double v : ckpt.parameters) w.f64(v);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.expect(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.schedule.steps = r.u64();
  c.schedule.beta_start = r.f64();
  c.schedule.beta_end = r.f64();
  c.architecture.in_channels = r.u32();
  c.architecture.hidden = r.u32();
  c.architecture.out_channels = r.u32();
  c.architecture.embed_dim = r.u32();
  const std::uint32_t mode = r.u32();
  if (mode > 1) throw DataError("checkpoint: unknown training mode " + std::to_string(mode));
  c.metadata.mode = static_cast<TrainMode>(mode);
  c.metadata.iterations = r.u64();
  c.metadata.seed = r.u64();
  const std::uint64_t count = r.u64();
  if (count != c.architecture.parameter_count()) {
    throw DataError("checkpoint: parameter count " + std::to_string(count) +
                    " does not match architecture");
  }
  if (r.remaining() < count * 8) throw DataError("checkpoint: truncated file");
  c.parameters.resize(count);
  for (double& v : c.parameters) v = r.f64();
  r.finish();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace ddpm
