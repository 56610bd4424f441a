// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "s3net/lstm.hpp"

namespace s3net {

// Checkpoint, little-endian:
//   "S3NT" | version u16 | mode u8 | meta_len u32 | meta (key=value\n lines) |
//   parameter blocks in Model::parameters() order | CRC-32 u32 of everything before it.
// Float modes store f32 values; quantized modes store int8 weight codes.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct TrainingMeta {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double train_loss = 0.0;
    double eval_accuracy = 0.0;
    bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
    Model model;
    TrainingMeta meta;
};

/// Rounds every parameter to what the file stores: float32 in float modes,
/// the 8-bit weight lattice in quantized modes. serialize() of a snapped model
/// loses nothing.
void snap_to_storage(Model& model);

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
/// Errc::format, Errc::version or Errc::checksum; never returns a partial model.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);  // atomic
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Same shape and mode with every parameter zero; no random draws.
Model zero_model(const ModelShape& shape, Mode mode, QuantOptions quant = {});

/// Bytes of the dense float32 LSTM with the same M, N and class count:
/// 4 gates x (N*M + N*N + N) plus the N*C + C head, 4 bytes each.
std::uint64_t dense_equivalent_bytes(const ModelShape& shape);

/// Exact serialized size without building the byte buffer.
std::uint64_t serialized_size(const Checkpoint& ckpt);

}  // namespace s3net
