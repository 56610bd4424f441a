// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s3net/tensor.hpp"

namespace s3net {

/// Per-frame structured feature dimensions: sub-scenes x features x scores.
struct FrameDims {
    std::size_t s = 0;
    std::size_t f = 0;
    std::size_t c = 0;

    std::size_t flat_size() const noexcept { return s * f * c; }
    bool operator==(const FrameDims&) const = default;
};

/// Sub-scene cap of the detector front end.
inline constexpr std::size_t kMaxSubscenes = 25;

/// One detected sub-scene: f feature values and c class confidences, all in [0, 1].
struct Detection {
    std::vector<double> features;
    std::vector<double> scores;

    double confidence() const;  // max score
};

/// X_t of shape (s, f, c). Row i holds features(j) * scores(k) for detection i;
/// rows at and beyond subscene_count are exactly zero.
struct FrameFeatures {
    DenseTensor tensor;
    std::uint32_t frame_index = 0;
    std::uint16_t subscene_count = 0;

    bool operator==(const FrameFeatures&) const = default;
};

enum class Provenance { ingested, synthetic };

struct FeatureSequence {
    std::vector<FrameFeatures> frames;
    std::uint16_t label = 0;
    Provenance provenance = Provenance::ingested;
    std::string source_id;

    FrameDims dims() const;
};

/// Keeps the `s` most confident detections (stable for ties), in detection order.
std::vector<Detection> truncate_by_confidence(std::span<const Detection> detections, std::size_t s);

/// Builds X_t from detections in order. Returns std::nullopt (skip marker) when
/// nothing was detected or every entry is zero. More than dims.s detections is
/// Errc::capacity; out-of-range values are Errc::domain.
std::optional<FrameFeatures> structure_frame(std::span<const Detection> detections, FrameDims dims,
                                             std::uint32_t frame_index);

struct DimFactorization {
    std::size_t flat_size = 0;
    Shape factors;
    bool degraded = false;  // no factorization into d factors >= 2 exists
};

/// Splits prod(axes) into d factors. Minimizes the largest factor; among ties,
/// prefers refinements of the original axes (larger part outermost), otherwise
/// the lexicographically smallest sequence.
DimFactorization factorize_dims(std::span<const std::size_t> axes, std::size_t d);

struct LoadOptions {
    bool allow_oversize = false;  // accept s > kMaxSubscenes
};

/// Throws Errc::data/domain/capacity/shape on invariant violations.
void validate_sequence(const FeatureSequence& seq, FrameDims dims, const LoadOptions& options = {});

// Feature file, little-endian:
//   "S3FT" | version u16 | s u16 | f u16 | c u16 | count u32 |
//   per sequence: label u16 | T u32 |
//     per frame: frame_index u32 | subscene_count u16 | s*f*c f32 row-major
inline constexpr std::uint16_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_sequences(std::span<const FeatureSequence> seqs, FrameDims dims);

struct DecodedSequences {
    FrameDims dims;
    std::vector<FeatureSequence> sequences;
};
DecodedSequences decode_sequences(std::span<const std::uint8_t> bytes, const LoadOptions& options = {},
                                  const std::string& source = "memory");

/// Atomic: writes a sibling temp file and renames it into place.
void save_sequences(const std::filesystem::path& path, std::span<const FeatureSequence> seqs, FrameDims dims);
DecodedSequences load_sequences(const std::filesystem::path& path, const LoadOptions& options = {});

/// Synthetic stand-in for the segmentation front end. Class k fires two
/// sub-scene events in a class-specific order; only their temporal order
/// separates classes sharing an event pair.
struct SyntheticSpec {
    std::size_t num_classes = 4;
    FrameDims dims{5, 17, 4};
    std::size_t frames = 16;
    std::size_t count = 256;
    std::uint64_t seed = 1;
};

std::vector<FeatureSequence> generate_synthetic(const SyntheticSpec& spec);

/// Flattened frame (row-major s*f*c).
inline std::span<const double> flat_frame(const FrameFeatures& f) { return f.tensor.data(); }

// Byte helpers shared with the checkpoint format.
namespace bytes {
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v);
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);

class Reader {
  public:
    Reader(std::span<const std::uint8_t> data, std::string context)
        : data_(data), context_(std::move(context)) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
    std::span<const std::uint8_t> take(std::size_t n);
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }

  private:
    void need(std::size_t n);
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

/// Temp-file-and-rename write.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
}  // namespace bytes

}  // namespace s3net
