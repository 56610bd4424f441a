// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/quant.hpp"

#include <algorithm>
#include <cmath>

#include "s3net/error.hpp"

namespace s3net::quant {

WeightCode quantize_weight(double w, FloorMode mode) {
    if (!std::isfinite(w)) fail(Errc::domain, "cannot quantize a non-finite weight");
    const double mag = std::fabs(w);
    const int sign = w < 0.0 ? -1 : 1;
    int code = 0;
    if (mag == 0.0) {
        code = 0;
    } else if (mag <= 1.0 / kWeightScale) {
        code = sign;
    } else if (mag < 1.0) {
        if (mode == FloorMode::literal)
            code = std::max(-kMaxWeightCode, static_cast<int>(std::floor(kWeightScale * w)));
        else
            code = sign * static_cast<int>(std::floor(kWeightScale * mag));
    } else {
        code = sign * kMaxWeightCode;
    }
    return WeightCode{static_cast<std::int8_t>(code)};
}

double dequantize(WeightCode c) noexcept { return static_cast<double>(c.code) / kWeightScale; }

FeatureCode quantize_feature(double x) {
    if (!std::isfinite(x)) fail(Errc::domain, "cannot quantize a non-finite feature");
    if (x < 0.0) x = 0.0;
    const int code = x >= 1.0 ? kMaxFeatureCode : static_cast<int>(std::floor(kFeatureScale * x));
    return FeatureCode{static_cast<std::uint8_t>(code)};
}

double dequantize(FeatureCode c) noexcept { return static_cast<double>(c.code) / kFeatureScale; }

double fake_quantize_weight(double w, FloorMode mode) { return dequantize(quantize_weight(w, mode)); }
double fake_quantize_feature(double x) { return dequantize(quantize_feature(x)); }

QuantizedTTMatrix::QuantizedTTMatrix(const TTMatrix& structure, std::vector<std::vector<WeightCode>> codes)
    : structure_(TTMatrix::zeros(structure.row_factors(), structure.col_factors(), structure.ranks())),
      codes_(std::move(codes)) {
    if (codes_.size() != structure_.order()) fail(Errc::shape, "one code block per core expected");
    for (std::size_t k = 0; k < codes_.size(); ++k)
        if (codes_[k].size() != structure_.cores()[k].data.size()) fail(Errc::shape, "code block length mismatch");
}

TTMatrix QuantizedTTMatrix::dequantize() const {
    TTMatrix out = structure_;
    for (std::size_t k = 0; k < codes_.size(); ++k) {
        auto values = out.core_values(k);
        for (std::size_t e = 0; e < values.size(); ++e) values[e] = quant::dequantize(codes_[k][e]);
    }
    return out;
}

QuantizedTTMatrix quantize_tt(const TTMatrix& w, FloorMode mode) {
    std::vector<std::vector<WeightCode>> codes;
    for (const auto& core : w.cores()) {
        std::vector<WeightCode> block;
        block.reserve(core.data.size());
        for (double v : core.data) block.push_back(quantize_weight(v, mode));
        codes.push_back(std::move(block));
    }
    return QuantizedTTMatrix(w, std::move(codes));
}

}  // namespace s3net::quant
