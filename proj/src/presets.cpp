// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/presets.hpp"

#include <charconv>

#include "s3net/error.hpp"

namespace s3net {

ModelShape make_shape(FrameDims frame, const Shape& hidden_factors, std::size_t num_classes, std::size_t rank) {
    ModelShape s;
    s.frame = frame;
    s.hidden_factors = hidden_factors;
    s.hidden_size = shape_product(hidden_factors);
    s.num_classes = num_classes;
    const std::size_t axes[] = {frame.s, frame.f, frame.c};
    const DimFactorization f = factorize_dims(axes, hidden_factors.size());
    if (f.degraded)
        fail(Errc::config, "input size " + std::to_string(f.flat_size) + " has no factorization into " +
                               std::to_string(hidden_factors.size()) + " factors >= 2");
    s.input_factors = f.factors;
    s.ranks = uniform_ranks(hidden_factors.size(), rank);
    return s;
}

Preset find_preset(std::string_view name) {
    Preset p;
    p.name = std::string(name);
    if (name == "desk") {
        p.shape = make_shape(FrameDims{5, 17, 4}, {4, 4, 4, 4}, 4, 4);
        p.train_data = SyntheticSpec{4, {5, 17, 4}, 16, 256, 1};
        p.eval_data = SyntheticSpec{4, {5, 17, 4}, 16, 256, 2};
        p.train.epochs = 30;
        p.train.learning_rate = 0.05;
        p.train.batch_size = 16;
    } else if (name == "paper-shape") {
        p.shape = make_shape(FrameDims{25, 425, 8}, {8, 8, 8, 8}, 4, 8);
        p.train_data = SyntheticSpec{4, {25, 425, 8}, 16, 8, 1};
        p.eval_data = SyntheticSpec{4, {25, 425, 8}, 16, 8, 2};
        p.train.epochs = 1;
        p.train.batch_size = 4;
    } else if (name == "tiny") {
        p.shape = tiny_shape();
        p.train_data = SyntheticSpec{3, tiny_shape().frame, 8, 48, 1};
        p.eval_data = SyntheticSpec{3, tiny_shape().frame, 8, 48, 2};
        p.train.epochs = 5;
        p.train.batch_size = 8;
    } else {
        fail(Errc::config, "preset: unknown preset '" + std::string(name) + "' (desk, paper-shape, tiny)");
    }
    return p;
}

std::vector<std::string> preset_names() { return {"desk", "paper-shape", "tiny"}; }

std::vector<std::size_t> parse_ranks(std::string_view text, std::size_t d) {
    std::vector<std::size_t> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, comma - pos);
        std::size_t v = 0;
        auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc{} || end != item.data() + item.size() || v == 0)
            fail(Errc::config, "ranks: '" + std::string(text) + "' is not a positive integer list");
        values.push_back(v);
        pos = comma + 1;
    }
    if (values.size() == 1) return uniform_ranks(d, values[0]);
    if (values.size() != d + 1 || values.front() != 1 || values.back() != 1)
        fail(Errc::config, "ranks: expected one value or " + std::to_string(d + 1) + " values starting and ending with 1");
    return values;
}

}  // namespace s3net
