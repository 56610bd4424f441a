// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "s3net/features.hpp"
#include "s3net/lstm.hpp"
#include "s3net/train.hpp"

namespace s3net {

struct Preset {
    std::string name;
    ModelShape shape;       // ranks are the default TT ranks
    SyntheticSpec train_data;
    SyntheticSpec eval_data;
    TrainConfig train;
};

/// "desk", "paper-shape" or "tiny"; Errc::config otherwise.
Preset find_preset(std::string_view name);
std::vector<std::string> preset_names();

/// Builds a model shape for frame dims and hidden factors, factorizing s*f*c
/// into as many modes as there are hidden factors. Errc::config when the
/// input cannot be split into factors >= 2.
ModelShape make_shape(FrameDims frame, const Shape& hidden_factors, std::size_t num_classes, std::size_t rank);

/// "4" (uniform interior rank) or "1,4,4,4,1" (explicit r_0..r_d).
std::vector<std::size_t> parse_ranks(std::string_view text, std::size_t d);

}  // namespace s3net
