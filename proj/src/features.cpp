// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unistd.h>

#include "s3net/error.hpp"
#include "s3net/rng.hpp"

namespace s3net {

// ---------------------------------------------------------------------------
// Byte helpers
// ---------------------------------------------------------------------------

namespace bytes {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void Reader::need(std::size_t n) {
    if (remaining() < n)
        fail(Errc::format, context_ + ": truncated at byte " + std::to_string(pos_));
}

std::uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint16_t Reader::u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

std::span<const std::uint8_t> Reader::take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::io, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            fail(Errc::io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(Errc::io, "cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace bytes

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

double Detection::confidence() const {
    return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
}

FrameDims FeatureSequence::dims() const {
    if (frames.empty()) return {};
    const Shape& s = frames.front().tensor.shape();
    return {s[0], s[1], s[2]};
}

std::vector<Detection> truncate_by_confidence(std::span<const Detection> detections, std::size_t s) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].confidence() > detections[b].confidence();
    });
    if (order.size() > s) order.resize(s);
    std::sort(order.begin(), order.end());
    std::vector<Detection> kept;
    for (auto i : order) kept.push_back(detections[i]);
    return kept;
}

std::optional<FrameFeatures> structure_frame(std::span<const Detection> detections, FrameDims dims,
                                             std::uint32_t frame_index) {
    if (dims.s == 0 || dims.f == 0 || dims.c == 0) fail(Errc::shape, "frame dimensions must be positive");
    if (detections.size() > dims.s)
        fail(Errc::capacity, std::to_string(detections.size()) + " sub-scenes exceed the cap of " +
                                 std::to_string(dims.s));
    if (detections.empty()) return std::nullopt;

    FrameFeatures frame{DenseTensor({dims.s, dims.f, dims.c}), frame_index,
                        static_cast<std::uint16_t>(detections.size())};
    auto out = frame.tensor.data();
    bool any_nonzero = false;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const auto& det = detections[i];
        if (det.features.size() != dims.f || det.scores.size() != dims.c)
            fail(Errc::shape, "detection row does not match (f, c)");
        for (double v : det.features)
            if (!(v >= 0.0 && v <= 1.0)) fail(Errc::domain, "feature value outside [0, 1]");
        for (double v : det.scores)
            if (!(v >= 0.0 && v <= 1.0)) fail(Errc::domain, "confidence score outside [0, 1]");
        for (std::size_t j = 0; j < dims.f; ++j)
            for (std::size_t k = 0; k < dims.c; ++k) {
                const double v = det.features[j] * det.scores[k];
                out[(i * dims.f + j) * dims.c + k] = v;
                any_nonzero = any_nonzero || v != 0.0;
            }
    }
    if (!any_nonzero) return std::nullopt;
    return frame;
}

// ---------------------------------------------------------------------------
// Dimension factorization
// ---------------------------------------------------------------------------

namespace {

void enumerate_factorizations(std::size_t value, std::size_t parts, Shape& prefix, std::vector<Shape>& out) {
    if (parts == 1) {
        if (value >= 2) {
            prefix.push_back(value);
            out.push_back(prefix);
            prefix.pop_back();
        }
        return;
    }
    for (std::size_t a = 2; a <= value; ++a) {
        if (value % a != 0) continue;
        prefix.push_back(a);
        enumerate_factorizations(value / a, parts - 1, prefix, out);
        prefix.pop_back();
    }
}

bool refines(const Shape& factors, std::span<const std::size_t> axes) {
    std::size_t pos = 0;
    for (auto axis : axes) {
        std::size_t prod = 1;
        std::size_t used = 0;
        while (pos < factors.size() && prod < axis) {
            prod *= factors[pos++];
            ++used;
        }
        if (used == 0 || prod != axis) return false;
    }
    return pos == factors.size();
}

}  // namespace

DimFactorization factorize_dims(std::span<const std::size_t> axes, std::size_t d) {
    if (axes.empty() || d == 0) fail(Errc::shape, "factorize_dims needs axes and d >= 1");
    const std::size_t total = shape_product(axes);
    if (total == 0) fail(Errc::shape, "zero-sized axis");

    std::vector<Shape> all;
    Shape prefix;
    enumerate_factorizations(total, d, prefix, all);
    if (all.empty()) {
        Shape trivial(d, 1);
        trivial[0] = total;
        return {total, trivial, true};
    }

    std::size_t best_max = SIZE_MAX;
    for (const auto& f : all) best_max = std::min(best_max, *std::max_element(f.begin(), f.end()));

    const bool axes_usable = std::all_of(axes.begin(), axes.end(), [](std::size_t a) { return a >= 2; });
    std::optional<Shape> refinement, balanced;
    for (const auto& f : all) {
        if (*std::max_element(f.begin(), f.end()) != best_max) continue;
        if (axes_usable && refines(f, axes) && (!refinement || f > *refinement)) refinement = f;
        if (!balanced || f < *balanced) balanced = f;
    }
    return {total, refinement ? *refinement : *balanced, false};
}

// ---------------------------------------------------------------------------
// Validation and file format
// ---------------------------------------------------------------------------

void validate_sequence(const FeatureSequence& seq, FrameDims dims, const LoadOptions& options) {
    if (seq.frames.empty()) fail(Errc::data, "sequence has no frames");
    if (dims.s > kMaxSubscenes && !options.allow_oversize)
        fail(Errc::capacity, "s = " + std::to_string(dims.s) + " exceeds the sub-scene cap of 25");
    const Shape want{dims.s, dims.f, dims.c};
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const auto& fr = seq.frames[t];
        if (fr.tensor.shape() != want) fail(Errc::shape, "frame shape differs from (s, f, c)");
        if (t > 0 && fr.frame_index <= seq.frames[t - 1].frame_index)
            fail(Errc::data, "frame indices must be strictly increasing");
        if (fr.subscene_count == 0 || fr.subscene_count > dims.s)
            fail(Errc::data, "sub-scene count out of range");
        const auto data = fr.tensor.data();
        bool any_nonzero = false;
        for (std::size_t e = 0; e < data.size(); ++e) {
            const double v = data[e];
            if (!std::isfinite(v)) fail(Errc::domain, "non-finite feature value");
            if (v < 0.0 || v > 1.0) fail(Errc::data, "confidence-weighted value outside [0, 1]");
            if (e / (dims.f * dims.c) >= fr.subscene_count && v != 0.0)
                fail(Errc::data, "padding row is not zero");
            any_nonzero = any_nonzero || v != 0.0;
        }
        if (!any_nonzero) fail(Errc::data, "all-zero frame (skipped frames must be omitted)");
    }
}

std::vector<std::uint8_t> encode_sequences(std::span<const FeatureSequence> seqs, FrameDims dims) {
    if (dims.s == 0 || dims.f == 0 || dims.c == 0 || dims.s > 0xFFFF || dims.f > 0xFFFF || dims.c > 0xFFFF)
        fail(Errc::shape, "frame dimensions must fit u16 and be positive");
    std::vector<std::uint8_t> out{'S', '3', 'F', 'T'};
    bytes::put_u16(out, kFeatureFileVersion);
    bytes::put_u16(out, static_cast<std::uint16_t>(dims.s));
    bytes::put_u16(out, static_cast<std::uint16_t>(dims.f));
    bytes::put_u16(out, static_cast<std::uint16_t>(dims.c));
    bytes::put_u32(out, static_cast<std::uint32_t>(seqs.size()));
    for (const auto& seq : seqs) {
        if (seq.dims() != dims) fail(Errc::shape, "sequence dims differ from file dims");
        bytes::put_u16(out, seq.label);
        bytes::put_u32(out, static_cast<std::uint32_t>(seq.frames.size()));
        for (const auto& fr : seq.frames) {
            bytes::put_u32(out, fr.frame_index);
            bytes::put_u16(out, fr.subscene_count);
            for (double v : fr.tensor.data()) bytes::put_f32(out, static_cast<float>(v));
        }
    }
    return out;
}

DecodedSequences decode_sequences(std::span<const std::uint8_t> data, const LoadOptions& options,
                                  const std::string& source) {
    bytes::Reader in(data, source);
    const auto magic = in.take(4);
    if (std::memcmp(magic.data(), "S3FT", 4) != 0) fail(Errc::format, source + ": bad magic");
    const auto version = in.u16();
    if (version != kFeatureFileVersion)
        fail(Errc::version, source + ": unsupported feature file version " + std::to_string(version));
    DecodedSequences result;
    result.dims.s = in.u16();
    result.dims.f = in.u16();
    result.dims.c = in.u16();
    const FrameDims dims = result.dims;
    if (dims.s == 0 || dims.f == 0 || dims.c == 0) fail(Errc::shape, source + ": zero frame dimension");
    if (dims.s > kMaxSubscenes && !options.allow_oversize)
        fail(Errc::capacity, source + ": s = " + std::to_string(dims.s) + " exceeds the sub-scene cap of 25");
    const std::uint32_t count = in.u32();
    const std::size_t flat = dims.flat_size();

    std::vector<FeatureSequence> seqs;
    for (std::uint32_t n = 0; n < count; ++n) {
        FeatureSequence seq;
        seq.label = in.u16();
        seq.provenance = Provenance::ingested;
        seq.source_id = source + "#" + std::to_string(n);
        const std::uint32_t frames = in.u32();
        if (frames == 0) fail(Errc::data, source + ": empty sequence " + std::to_string(n));
        // Reject impossible counts before allocating.
        if (in.remaining() / (6 + 4 * flat) < frames) fail(Errc::format, source + ": truncated sequence payload");
        for (std::uint32_t t = 0; t < frames; ++t) {
            FrameFeatures fr;
            fr.frame_index = in.u32();
            fr.subscene_count = in.u16();
            std::vector<double> values(flat);
            for (auto& v : values) v = static_cast<double>(in.f32());
            fr.tensor = DenseTensor({dims.s, dims.f, dims.c}, std::move(values));
            seq.frames.push_back(std::move(fr));
        }
        validate_sequence(seq, dims, options);
        seqs.push_back(std::move(seq));
    }
    if (in.remaining() != 0) fail(Errc::format, source + ": trailing bytes after last sequence");
    result.sequences = std::move(seqs);
    return result;
}

void save_sequences(const std::filesystem::path& path, std::span<const FeatureSequence> seqs, FrameDims dims) {
    bytes::write_file_atomic(path, encode_sequences(seqs, dims));
}

DecodedSequences load_sequences(const std::filesystem::path& path, const LoadOptions& options) {
    const auto data = bytes::read_file(path);
    return decode_sequences(data, options, path.filename().string());
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kEventFrames = 2;
constexpr double kSkipProbability = 0.05;

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }
double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Feature signature of each event type; fixed per task shape so that
/// independently seeded splits share them.
std::vector<std::vector<double>> event_patterns(std::size_t events, std::size_t f) {
    Rng rng(0x5EED0000ULL + events * 131 + f);
    std::vector<std::vector<double>> patterns(events, std::vector<double>(f));
    for (auto& p : patterns)
        for (auto& v : p) v = rng.uniform() < 0.5 ? rng.uniform(0.75, 0.95) : rng.uniform(0.0, 0.1);
    return patterns;
}

}  // namespace

std::vector<FeatureSequence> generate_synthetic(const SyntheticSpec& spec) {
    const FrameDims dims = spec.dims;
    if (spec.num_classes < 2) fail(Errc::config, "synthetic task needs at least 2 classes");
    if (dims.s == 0 || dims.f == 0 || dims.c == 0) fail(Errc::config, "synthetic frame dims must be positive");
    if (spec.frames < 4 * kEventFrames) fail(Errc::config, "synthetic sequences need at least 8 frames");

    const std::size_t events = 2 * ((spec.num_classes + 1) / 2);
    const auto patterns = event_patterns(events, dims.f);
    const std::size_t T = spec.frames;
    const std::size_t half = T / 2;

    std::vector<FeatureSequence> out;
    out.reserve(spec.count);
    for (std::size_t n = 0; n < spec.count; ++n) {
        Rng rng = Rng::derive(spec.seed, n);
        FeatureSequence seq;
        seq.label = static_cast<std::uint16_t>(n % spec.num_classes);
        seq.provenance = Provenance::synthetic;
        seq.source_id = "synthetic:" + std::to_string(spec.seed) + "#" + std::to_string(n);

        const std::size_t pair = seq.label / 2, order = seq.label % 2;
        const std::size_t first_event = 2 * pair + order, second_event = 2 * pair + 1 - order;
        const std::size_t t1 = rng.below(half - kEventFrames + 1);
        const std::size_t lo2 = t1 + kEventFrames + 1;
        const std::size_t t2 = lo2 + rng.below(T - kEventFrames - lo2 + 1);

        std::vector<std::vector<double>> base(dims.s, std::vector<double>(dims.f));
        for (auto& row : base)
            for (auto& v : row) v = rng.uniform(0.1, 0.5);

        for (std::size_t t = 0; t < T; ++t) {
            std::optional<std::size_t> active;
            if (t >= t1 && t < t1 + kEventFrames) active = first_event;
            if (t >= t2 && t < t2 + kEventFrames) active = second_event;

            const bool skipped = !active && rng.uniform() < kSkipProbability;
            const std::size_t present = skipped ? 0 : 1 + rng.below(dims.s);
            std::vector<Detection> dets(present);
            for (std::size_t i = 0; i < present; ++i) {
                auto& det = dets[i];
                det.features.resize(dims.f);
                det.scores.resize(dims.c);
                for (std::size_t j = 0; j < dims.f; ++j)
                    det.features[j] = f32_round(clip01(base[i][j] + 0.05 * rng.normal()));
                for (auto& sc : det.scores) sc = f32_round(rng.uniform(0.05, 0.35));
                if (i == 0 && active) {
                    const auto& pat = patterns[*active];
                    for (std::size_t j = 0; j < dims.f; ++j)
                        det.features[j] = f32_round(clip01(0.3 * base[i][j] + 0.7 * pat[j] + 0.03 * rng.normal()));
                    det.scores[*active % dims.c] = f32_round(rng.uniform(0.8, 1.0));
                }
            }
            // Products of float-representable values are rounded again so the
            // in-memory tensor equals what a feature file stores.
            if (auto frame = structure_frame(dets, dims, static_cast<std::uint32_t>(t))) {
                for (auto& v : frame->tensor.data()) v = f32_round(v);
                seq.frames.push_back(std::move(*frame));
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace s3net
