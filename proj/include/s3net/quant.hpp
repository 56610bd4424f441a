// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "s3net/tt.hpp"

namespace s3net::quant {

/// Signed 8-bit weight code; value = code / 2^7.
struct WeightCode {
    std::int8_t code = 0;
    bool operator==(const WeightCode&) const = default;
};

/// Unsigned 8-bit feature code; value = code / 2^8.
struct FeatureCode {
    std::uint8_t code = 0;
    bool operator==(const FeatureCode&) const = default;
};

inline constexpr double kWeightScale = 128.0;   // 2^7
inline constexpr double kFeatureScale = 256.0;  // 2^8
inline constexpr int kMaxWeightCode = 127;
inline constexpr int kMaxFeatureCode = 255;

/// How the middle branch treats negative weights.
enum class FloorMode {
    sign_magnitude,  // sign(w) * floor(128 |w|): symmetric, rounds toward zero
    literal,         // floor(128 w): rounds toward -inf, clamped at -127
};

/// Piecewise 8-bit weight quantizer:
///   w == 0             -> 0
///   0 < |w| <= 2^-7    -> sign(w)
///   2^-7 < |w| < 1     -> sign(w) floor(2^7 |w|)   (see FloorMode)
///   |w| >= 1           -> sign(w) 127
/// Throws Errc::domain for non-finite input.
WeightCode quantize_weight(double w, FloorMode mode = FloorMode::sign_magnitude);
double dequantize(WeightCode c) noexcept;

/// floor(2^8 x) on [0, 1), 255 for x >= 1; negative inputs clamp to 0.
FeatureCode quantize_feature(double x);
double dequantize(FeatureCode c) noexcept;

/// Quantize-then-dequantize shortcuts used by the forward pass.
double fake_quantize_weight(double w, FloorMode mode = FloorMode::sign_magnitude);
double fake_quantize_feature(double x);

/// Straight-through masks: 1 inside the quantizer's unsaturated region, 0 outside.
inline double weight_ste_mask(double w) noexcept { return (w > -1.0 && w < 1.0) ? 1.0 : 0.0; }
inline double feature_ste_mask(double x) noexcept { return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0; }

/// TT-matrix whose core entries are weight codes.
class QuantizedTTMatrix {
  public:
    QuantizedTTMatrix(const TTMatrix& structure, std::vector<std::vector<WeightCode>> codes);

    const std::vector<std::vector<WeightCode>>& codes() const noexcept { return codes_; }
    Shape row_factors() const { return structure_.row_factors(); }
    Shape col_factors() const { return structure_.col_factors(); }
    std::vector<std::size_t> ranks() const { return structure_.ranks(); }

    /// Cores holding code / 128.
    TTMatrix dequantize() const;

  private:
    TTMatrix structure_;  // zero-valued; carries factorization and ranks
    std::vector<std::vector<WeightCode>> codes_;
};

QuantizedTTMatrix quantize_tt(const TTMatrix& w, FloorMode mode = FloorMode::sign_magnitude);

}  // namespace s3net::quant
