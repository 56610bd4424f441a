// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "s3net/tensor.hpp"

namespace s3net {

// ---------------------------------------------------------------------------
// Tensor train of a d-way tensor.
//
//   X(h_1, ..., h_d) = G_1(h_1) G_2(h_2) ... G_d(h_d)
//
// where G_k(h_k) is the r_{k-1} x r_k slice of core k and r_0 = r_d = 1.
// Cores are stored row-major as (rank_in, mode, rank_out).
// ---------------------------------------------------------------------------
struct TTCore {
    std::size_t rank_in = 1;
    std::size_t mode = 1;
    std::size_t rank_out = 1;
    std::vector<double> data;

    double operator()(std::size_t a, std::size_t h, std::size_t b) const {
        return data[(a * mode + h) * rank_out + b];
    }
};

class TTTensor {
  public:
    /// Validates boundary ranks and rank agreement between neighbours.
    explicit TTTensor(std::vector<TTCore> cores);

    const std::vector<TTCore>& cores() const noexcept { return cores_; }
    std::size_t order() const noexcept { return cores_.size(); }
    Shape mode_sizes() const;
    /// r_0 .. r_d
    std::vector<std::size_t> ranks() const;
    std::size_t param_count() const;

  private:
    std::vector<TTCore> cores_;
};

/// Truncation policy for the TT-SVD sweep. Either field may be left empty/zero;
/// when both are set the smaller resulting rank wins.
struct TTTruncation {
    /// r_0 .. r_d caps; r_0 and r_d must be 1.
    std::vector<std::size_t> max_ranks;
    /// Target relative Frobenius error in (0, 1); 0 disables.
    double tolerance = 0.0;
};

/// Left-to-right truncated-SVD sweep over successive unfoldings.
TTTensor tt_decompose(const DenseTensor& t, const TTTruncation& truncation);
TTTensor tt_decompose(const DenseTensor& t, std::span<const std::size_t> max_ranks);
TTTensor tt_decompose(const DenseTensor& t, double tolerance);

/// Ranks (1, r, ..., r, 1) for an order-d train.
std::vector<std::size_t> uniform_ranks(std::size_t d, std::size_t r);

/// Largest ranks any tensor of this shape can need: min of the two unfolding sizes.
std::vector<std::size_t> full_ranks(std::span<const std::size_t> mode_sizes);

double tt_element(const TTTensor& tt, std::span<const std::size_t> index);

inline constexpr std::size_t kDefaultReconstructCap = 10'000'000;

/// Throws Errc::capacity when the dense result would exceed `max_elements`.
DenseTensor tt_reconstruct(const TTTensor& tt, std::size_t max_elements = kDefaultReconstructCap);

// ---------------------------------------------------------------------------
// TT-matrix (double-index format). Core k has shape n_k x m_k x r_{k-1} x r_k
// and represents W(j, i) = G_1(j_1, i_1) ... G_d(j_d, i_d), where j and i are
// big-endian mixed-radix row/column indices over (n_1..n_d) and (m_1..m_d).
// The fused mode of core k is j_k * m_k + i_k (row index outer).
// ---------------------------------------------------------------------------
struct TTMatrixCore {
    std::size_t rows = 1;      // n_k
    std::size_t cols = 1;      // m_k
    std::size_t rank_in = 1;   // r_{k-1}
    std::size_t rank_out = 1;  // r_k
    std::vector<double> data;

    std::size_t offset(std::size_t j, std::size_t i, std::size_t a, std::size_t b) const {
        return ((j * cols + i) * rank_in + a) * rank_out + b;
    }
    double operator()(std::size_t j, std::size_t i, std::size_t a, std::size_t b) const {
        return data[offset(j, i, a, b)];
    }
    bool operator==(const TTMatrixCore&) const = default;
};

class TTMatrix {
  public:
    TTMatrix() = default;
    explicit TTMatrix(std::vector<TTMatrixCore> cores);

    /// Zero-valued cores with the given factorization and ranks (r_0..r_d).
    static TTMatrix zeros(const Shape& row_factors, const Shape& col_factors,
                          std::span<const std::size_t> ranks);

    const std::vector<TTMatrixCore>& cores() const noexcept { return cores_; }
    /// Core values are mutable; the core structure is not.
    std::span<double> core_values(std::size_t k) { return cores_[k].data; }

    std::size_t order() const noexcept { return cores_.size(); }
    Shape row_factors() const;
    Shape col_factors() const;
    std::vector<std::size_t> ranks() const;
    std::size_t num_rows() const;
    std::size_t num_cols() const;
    std::size_t param_count() const;

    bool operator==(const TTMatrix&) const = default;

  private:
    std::vector<TTMatrixCore> cores_;
};

/// Factorize a dense [N, M] matrix into TT-matrix form.
TTMatrix to_tt_matrix(const DenseTensor& w, const Shape& row_factors, const Shape& col_factors,
                      const TTTruncation& truncation);

/// Full ranks of the fused tensor for these factorizations.
std::vector<std::size_t> full_tt_matrix_ranks(const Shape& row_factors, const Shape& col_factors);

/// Fused-mode view: core k becomes (r_{k-1}, n_k*m_k, r_k).
TTTensor as_fused_tt(const TTMatrix& w);

/// Dense [N, M] reconstruction (reference path; refuses above `max_elements`).
DenseTensor tt_matrix_to_dense(const TTMatrix& w, std::size_t max_elements = kDefaultReconstructCap);

double tt_matrix_element(const TTMatrix& w, std::size_t row, std::size_t col);

enum class Precision { f64, f32 };

/// Scratch buffers reused across contractions.
struct TTWorkspace {
    std::vector<double> ping, pong;
    std::vector<float> ping32, pong32, x32;
    std::vector<std::vector<double>> stages;
};

/// y += W x, contracting core by core without forming W. `macs`, when given,
/// is incremented by the number of multiply-accumulates performed.
void tt_matvec_accumulate(const TTMatrix& w, std::span<const double> x, std::span<double> y,
                          TTWorkspace& ws, std::uint64_t* macs = nullptr,
                          Precision precision = Precision::f64);

/// Y = W X + B over tensor-shaped operands: x has shape col_factors, b has shape row_factors.
DenseTensor tt_matvec(const TTMatrix& w, const DenseTensor& x, const DenseTensor& b,
                      std::uint64_t* macs = nullptr);

/// Reverse mode of y = W x: accumulates dL/dcores into `grad` (same structure
/// as `w`) and, when `dx` is non-empty, dL/dx into `dx`.
void tt_matvec_backward(const TTMatrix& w, std::span<const double> x, std::span<const double> dy,
                        TTMatrix& grad, std::span<double> dx, TTWorkspace& ws);

struct ComplexityStats {
    std::size_t d = 0;
    std::size_t r_max = 0;
    std::size_t n_m = 0;  // max n_k * m_k
    std::uint64_t tt_param_count = 0;
    std::uint64_t dense_param_count = 0;
    std::uint64_t tt_mac_count = 0;
    std::uint64_t dense_mac_count = 0;
};

/// Parameter and multiply-accumulate counts. tt_mac_count is
/// sum_k (n_1..n_{k-1}) (m_{k+1}..m_d) n_k m_k r_{k-1} r_k, which is exactly
/// what tt_matvec_accumulate performs.
ComplexityStats stats(const TTMatrix& w);

}  // namespace s3net
