// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "s3net/error.hpp"

namespace s3net {

namespace {

constexpr char kMagic[4] = {'S', '3', 'N', 'T'};

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
        fail(Errc::format, "checkpoint metadata '" + key + "' is not an unsigned integer");
    return v;
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
        fail(Errc::format, "checkpoint metadata '" + key + "' is not a number");
    return v;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, item));
    return out;
}

std::string encode_meta(const Checkpoint& c) {
    const ModelShape& s = c.model.shape;
    std::string m;
    auto kv = [&](const char* k, const std::string& v) { m += std::string(k) + "=" + v + "\n"; };
    kv("s", std::to_string(s.frame.s));
    kv("f", std::to_string(s.frame.f));
    kv("c", std::to_string(s.frame.c));
    kv("hidden", std::to_string(s.hidden_size));
    kv("classes", std::to_string(s.num_classes));
    kv("input_factors", join(s.input_factors));
    kv("hidden_factors", join(s.hidden_factors));
    kv("ranks", join(s.ranks));
    kv("quantize_state", c.model.quant.quantize_state ? "1" : "0");
    kv("floor", c.model.quant.floor == quant::FloorMode::literal ? "literal" : "sign_magnitude");
    kv("seed", std::to_string(c.meta.seed));
    kv("epochs", std::to_string(c.meta.epochs));
    kv("train_loss", format_double(c.meta.train_loss));
    kv("eval_accuracy", format_double(c.meta.eval_accuracy));
    return m;
}

void decode_meta(std::string_view text, Mode mode, Checkpoint& out) {
    static const char* const kKeys[] = {"s",      "f",          "c",     "hidden",     "classes",
                                        "input_factors", "hidden_factors", "ranks", "quantize_state", "floor",
                                        "seed",   "epochs",     "train_loss", "eval_accuracy"};
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) fail(Errc::format, "checkpoint metadata line is not terminated");
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) fail(Errc::format, "checkpoint metadata line lacks '='");
        std::string key(line.substr(0, eq));
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
            fail(Errc::format, "unknown checkpoint metadata key '" + key + "'");
        if (!kv.emplace(key, std::string(line.substr(eq + 1))).second)
            fail(Errc::format, "duplicate checkpoint metadata key '" + key + "'");
    }
    for (const char* k : kKeys)
        if (!kv.count(k)) fail(Errc::format, std::string("checkpoint metadata lacks '") + k + "'");

    ModelShape s;
    s.frame.s = parse_uint("s", kv["s"]);
    s.frame.f = parse_uint("f", kv["f"]);
    s.frame.c = parse_uint("c", kv["c"]);
    s.hidden_size = parse_uint("hidden", kv["hidden"]);
    s.num_classes = parse_uint("classes", kv["classes"]);
    s.input_factors = parse_list("input_factors", kv["input_factors"]);
    s.hidden_factors = parse_list("hidden_factors", kv["hidden_factors"]);
    s.ranks = parse_list("ranks", kv["ranks"]);
    QuantOptions q;
    if (kv["quantize_state"] != "0" && kv["quantize_state"] != "1") fail(Errc::format, "bad quantize_state flag");
    q.quantize_state = kv["quantize_state"] == "1";
    if (kv["floor"] == "literal")
        q.floor = quant::FloorMode::literal;
    else if (kv["floor"] != "sign_magnitude")
        fail(Errc::format, "bad floor mode '" + kv["floor"] + "'");
    try {
        s.validate(mode);
    } catch (const Error& e) {
        fail(Errc::format, std::string("checkpoint shape: ") + e.what());
    }
    out.model = zero_model(s, mode, q);
    out.meta.seed = parse_uint("seed", kv["seed"]);
    out.meta.epochs = parse_uint("epochs", kv["epochs"]);
    out.meta.train_loss = parse_double("train_loss", kv["train_loss"]);
    out.meta.eval_accuracy = parse_double("eval_accuracy", kv["eval_accuracy"]);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - pos, 1u << 30));
        crc = crc32(crc, data.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

Model zero_model(const ModelShape& shape, Mode mode, QuantOptions quant) {
    shape.validate(mode);
    Model m;
    m.mode = mode;
    m.shape = shape;
    m.quant = quant;
    const std::size_t n = shape.hidden_size, in = shape.input_size();
    m.lstm.input_size = in;
    m.lstm.hidden_size = n;
    for (auto& g : m.lstm.gates) {
        if (is_tensorized(mode)) {
            g.W = WeightMatrix(TTMatrix::zeros(shape.hidden_factors, shape.input_factors, shape.ranks));
            g.U = WeightMatrix(TTMatrix::zeros(shape.hidden_factors, shape.hidden_factors, shape.ranks));
        } else {
            g.W = WeightMatrix(Matrix::zeros(n, in));
            g.U = WeightMatrix(Matrix::zeros(n, n));
        }
        g.B.assign(n, 0.0);
    }
    m.head.projection = Matrix::zeros(n, shape.num_classes);
    m.head.bias.assign(shape.num_classes, 0.0);
    return m;
}

void snap_to_storage(Model& model) {
    const bool q = is_quantized(model.mode);
    for (auto& p : model.parameters())
        for (auto& v : p.values)
            v = q ? quant::fake_quantize_weight(v, model.quant.floor) : static_cast<double>(static_cast<float>(v));
}

std::uint64_t dense_equivalent_bytes(const ModelShape& shape) {
    const std::uint64_t n = shape.hidden_size, m = shape.input_size(), c = shape.num_classes;
    return (4 * (n * m + n * n + n) + n * c + c) * 4;
}

std::uint64_t serialized_size(const Checkpoint& ckpt) {
    const std::uint64_t width = is_quantized(ckpt.model.mode) ? 1 : 4;
    return 4 + 2 + 1 + 4 + encode_meta(ckpt).size() + width * ckpt.model.param_count() + 4;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
    const Model& model = ckpt.model;
    const std::string meta = encode_meta(ckpt);
    std::vector<std::uint8_t> out;
    out.reserve(serialized_size(ckpt));
    out.insert(out.end(), kMagic, kMagic + 4);
    bytes::put_u16(out, kCheckpointVersion);
    bytes::put_u8(out, static_cast<std::uint8_t>(model.mode));
    bytes::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    const bool q = is_quantized(model.mode);
    for (auto block : model.parameter_values()) {
        for (double v : block) {
            if (q)
                bytes::put_u8(out, static_cast<std::uint8_t>(quant::quantize_weight(v, model.quant.floor).code));
            else
                bytes::put_f32(out, static_cast<float>(v));
        }
    }
    bytes::put_u32(out, crc32_of(out));
    return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> data) {
    if (data.size() < 4 + 2 + 1 + 4 + 4) fail(Errc::format, "checkpoint is truncated");
    if (std::memcmp(data.data(), kMagic, 4) != 0) fail(Errc::format, "not a checkpoint (bad magic)");
    bytes::Reader header(data.subspan(4), "checkpoint");
    const std::uint16_t version = header.u16();
    if (version != kCheckpointVersion)
        fail(Errc::version, "unsupported checkpoint version " + std::to_string(version));

    const auto body = data.first(data.size() - 4);
    bytes::Reader tail(data.subspan(data.size() - 4), "checkpoint");
    if (tail.u32() != crc32_of(body)) fail(Errc::checksum, "checkpoint checksum mismatch");

    bytes::Reader r(body.subspan(6), "checkpoint");
    const std::uint8_t mode_tag = r.u8();
    if (mode_tag > static_cast<std::uint8_t>(Mode::dense_quant))
        fail(Errc::format, "unknown checkpoint mode tag " + std::to_string(mode_tag));
    const Mode mode = static_cast<Mode>(mode_tag);
    const std::uint32_t meta_len = r.u32();
    const auto meta = r.take(meta_len);

    Checkpoint out;
    decode_meta(std::string_view(reinterpret_cast<const char*>(meta.data()), meta.size()), mode, out);
    const bool q = is_quantized(mode);
    const std::uint64_t expected = (q ? 1ull : 4ull) * out.model.param_count();
    if (r.remaining() != expected) fail(Errc::format, "checkpoint parameter payload has the wrong length");
    for (auto& p : out.model.parameters()) {
        for (auto& v : p.values) {
            if (q) {
                const auto code = static_cast<std::int8_t>(r.u8());
                if (code < -quant::kMaxWeightCode) fail(Errc::format, "weight code -128 is outside the lattice");
                v = quant::dequantize(quant::WeightCode{code});
            } else {
                const float f = r.f32();
                if (!std::isfinite(f)) fail(Errc::format, "non-finite parameter in checkpoint");
                v = f;
            }
        }
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    bytes::write_file_atomic(path, serialize(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(bytes::read_file(path)); }

}  // namespace s3net
