// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace s3net {

using Shape = std::vector<std::size_t>;

/// Product of mode sizes; 1 for an empty list.
std::size_t shape_product(std::span<const std::size_t> shape);

/// Row-major strides for `shape` (last mode contiguous).
Shape row_major_strides(std::span<const std::size_t> shape);

/// Dense d-way real array in row-major order.
///
/// Every mode size is at least 1 and `data().size() == shape_product(shape())`;
/// the constructors reject anything else with `Errc::shape`.
class DenseTensor {
  public:
    DenseTensor() : shape_{1}, data_(1, 0.0) {}
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t order() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    /// Multi-index access with bounds checking.
    double at(std::span<const std::size_t> index) const;

    /// Frobenius norm.
    double norm() const;

    bool operator==(const DenseTensor&) const = default;

  private:
    Shape shape_;
    std::vector<double> data_;
};

/// Relabel the shape; the row-major data sequence is untouched.
DenseTensor reshape(const DenseTensor& t, Shape new_shape);

/// ||a - b||_F / ||b||_F, or ||a - b||_F when b is zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace s3net
