// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/tensor.hpp"

#include <cmath>
#include <sstream>

#include "s3net/error.hpp"

namespace s3net {

const char* errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::shape: return "shape";
        case Errc::index: return "index";
        case Errc::capacity: return "capacity";
        case Errc::domain: return "domain";
        case Errc::input: return "input";
        case Errc::format: return "format";
        case Errc::version: return "version";
        case Errc::checksum: return "checksum";
        case Errc::data: return "data";
        case Errc::config: return "config";
        case Errc::numeric: return "numeric";
        case Errc::io: return "io";
    }
    return "unknown";
}

namespace {

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
    os << ']';
    return os.str();
}

void validate_shape(const Shape& shape) {
    if (shape.empty()) fail(Errc::shape, "tensor needs at least one mode");
    for (auto l : shape)
        if (l == 0) fail(Errc::shape, "zero mode size in shape " + shape_string(shape));
}

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t p = 1;
    for (auto l : shape) p *= l;
    return p;
}

Shape row_major_strides(std::span<const std::size_t> shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
    return strides;
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_product(shape_))
        fail(Errc::shape, "data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
}

double DenseTensor::at(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) fail(Errc::index, "index arity mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= shape_[k]) fail(Errc::index, "index out of bounds in mode " + std::to_string(k));
        flat = flat * shape_[k] + index[k];
    }
    return data_[flat];
}

double DenseTensor::norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

DenseTensor reshape(const DenseTensor& t, Shape new_shape) {
    if (shape_product(new_shape) != t.size())
        fail(Errc::shape, "cannot reshape " + shape_string(t.shape()) + " into " + shape_string(new_shape));
    return DenseTensor(std::move(new_shape), std::vector<double>(t.data().begin(), t.data().end()));
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::shape, "relative_error: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace s3net
