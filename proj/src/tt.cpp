// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/tt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "s3net/error.hpp"

namespace s3net {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_boundary_ranks(std::span<const std::size_t> ranks, std::size_t d) {
    if (ranks.size() != d + 1)
        fail(Errc::shape, "expected " + std::to_string(d + 1) + " ranks, got " + std::to_string(ranks.size()));
    if (ranks.front() != 1 || ranks.back() != 1) fail(Errc::shape, "boundary ranks must be 1");
    for (auto r : ranks)
        if (r == 0) fail(Errc::shape, "ranks must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------
// TTTensor
// ---------------------------------------------------------------------------

TTTensor::TTTensor(std::vector<TTCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) fail(Errc::shape, "tensor train needs at least one core");
    if (cores_.front().rank_in != 1 || cores_.back().rank_out != 1)
        fail(Errc::shape, "boundary ranks must be 1");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        const auto& c = cores_[k];
        if (c.mode == 0 || c.rank_in == 0 || c.rank_out == 0) fail(Errc::shape, "degenerate core");
        if (c.data.size() != c.rank_in * c.mode * c.rank_out) fail(Errc::shape, "core data length mismatch");
        if (k > 0 && cores_[k - 1].rank_out != c.rank_in)
            fail(Errc::shape, "rank mismatch between cores " + std::to_string(k - 1) + " and " + std::to_string(k));
    }
}

Shape TTTensor::mode_sizes() const {
    Shape s;
    for (const auto& c : cores_) s.push_back(c.mode);
    return s;
}

std::vector<std::size_t> TTTensor::ranks() const {
    std::vector<std::size_t> r{1};
    for (const auto& c : cores_) r.push_back(c.rank_out);
    return r;
}

std::size_t TTTensor::param_count() const {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.data.size();
    return n;
}

std::vector<std::size_t> uniform_ranks(std::size_t d, std::size_t r) {
    std::vector<std::size_t> ranks(d + 1, r);
    ranks.front() = ranks.back() = 1;
    return ranks;
}

std::vector<std::size_t> full_ranks(std::span<const std::size_t> mode_sizes) {
    const std::size_t d = mode_sizes.size();
    std::vector<std::size_t> ranks(d + 1, 1);
    const std::size_t total = shape_product(mode_sizes);
    std::size_t left = 1;
    for (std::size_t k = 1; k < d; ++k) {
        left *= mode_sizes[k - 1];
        ranks[k] = std::min(left, total / left);
    }
    return ranks;
}

TTTensor tt_decompose(const DenseTensor& t, const TTTruncation& truncation) {
    const Shape& l = t.shape();
    const std::size_t d = l.size();
    if (!truncation.max_ranks.empty()) check_boundary_ranks(truncation.max_ranks, d);
    if (truncation.tolerance < 0.0 || truncation.tolerance >= 1.0)
        fail(Errc::domain, "tolerance must lie in (0, 1)");

    std::vector<TTCore> cores;
    if (d == 1) {
        cores.push_back({1, l[0], 1, {t.data().begin(), t.data().end()}});
        return TTTensor(std::move(cores));
    }

    const double delta = truncation.tolerance > 0.0
                             ? truncation.tolerance / std::sqrt(static_cast<double>(d - 1)) * t.norm()
                             : -1.0;

    // Remainder, always viewed row-major as (r_{k-1} * l_k, rest).
    std::vector<double> rem(t.data().begin(), t.data().end());
    std::size_t rank_in = 1;
    std::size_t rest = t.size();
    for (std::size_t k = 0; k + 1 < d; ++k) {
        rest /= l[k];
        const auto rows = static_cast<Eigen::Index>(rank_in * l[k]);
        const auto cols = static_cast<Eigen::Index>(rest);
        const Eigen::MatrixXd unfolding = Eigen::Map<const RowMatrix>(rem.data(), rows, cols);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(unfolding, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sigma = svd.singularValues();

        std::size_t rank = static_cast<std::size_t>(sigma.size());
        if (delta >= 0.0) {
            // Smallest rank whose discarded tail stays within delta.
            double tail = 0.0;
            std::size_t keep = rank;
            while (keep > 1) {
                const double s = sigma(static_cast<Eigen::Index>(keep - 1));
                if (tail + s * s > delta * delta) break;
                tail += s * s;
                --keep;
            }
            rank = keep;
        }
        if (!truncation.max_ranks.empty()) rank = std::min(rank, truncation.max_ranks[k + 1]);
        rank = std::max<std::size_t>(rank, 1);
        const auto r = static_cast<Eigen::Index>(rank);

        TTCore core{rank_in, l[k], rank, std::vector<double>(rank_in * l[k] * rank)};
        Eigen::Map<RowMatrix>(core.data.data(), rows, r) = svd.matrixU().leftCols(r);
        cores.push_back(std::move(core));

        RowMatrix next = sigma.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
        rem.assign(next.data(), next.data() + next.size());
        rank_in = rank;
    }
    cores.push_back({rank_in, l[d - 1], 1, std::move(rem)});
    return TTTensor(std::move(cores));
}

TTTensor tt_decompose(const DenseTensor& t, std::span<const std::size_t> max_ranks) {
    return tt_decompose(t, TTTruncation{{max_ranks.begin(), max_ranks.end()}, 0.0});
}

TTTensor tt_decompose(const DenseTensor& t, double tolerance) {
    if (!(tolerance > 0.0 && tolerance < 1.0)) fail(Errc::domain, "tolerance must lie in (0, 1)");
    return tt_decompose(t, TTTruncation{{}, tolerance});
}

double tt_element(const TTTensor& tt, std::span<const std::size_t> index) {
    const auto& cores = tt.cores();
    if (index.size() != cores.size()) fail(Errc::index, "index arity mismatch");
    std::vector<double> row{1.0}, next;
    for (std::size_t k = 0; k < cores.size(); ++k) {
        const auto& c = cores[k];
        if (index[k] >= c.mode) fail(Errc::index, "index out of bounds in mode " + std::to_string(k));
        next.assign(c.rank_out, 0.0);
        for (std::size_t a = 0; a < c.rank_in; ++a)
            for (std::size_t b = 0; b < c.rank_out; ++b) next[b] += row[a] * c(a, index[k], b);
        row.swap(next);
    }
    return row[0];
}

DenseTensor tt_reconstruct(const TTTensor& tt, std::size_t max_elements) {
    const Shape modes = tt.mode_sizes();
    std::size_t total = 1;
    for (auto l : modes) {
        if (total > max_elements / l) fail(Errc::capacity, "reconstruction exceeds element cap");
        total *= l;
    }
    // cur is (prefix, r_k) row-major.
    std::vector<double> cur{1.0}, next;
    std::size_t prefix = 1;
    for (const auto& c : tt.cores()) {
        next.assign(prefix * c.mode * c.rank_out, 0.0);
        for (std::size_t p = 0; p < prefix; ++p)
            for (std::size_t a = 0; a < c.rank_in; ++a) {
                const double v = cur[p * c.rank_in + a];
                if (v == 0.0) continue;
                for (std::size_t h = 0; h < c.mode; ++h) {
                    const double* g = &c.data[(a * c.mode + h) * c.rank_out];
                    double* out = &next[(p * c.mode + h) * c.rank_out];
                    for (std::size_t b = 0; b < c.rank_out; ++b) out[b] += v * g[b];
                }
            }
        cur.swap(next);
        prefix *= c.mode;
    }
    return DenseTensor(modes, std::move(cur));
}

// ---------------------------------------------------------------------------
// TTMatrix
// ---------------------------------------------------------------------------

TTMatrix::TTMatrix(std::vector<TTMatrixCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) fail(Errc::shape, "TT-matrix needs at least one core");
    if (cores_.front().rank_in != 1 || cores_.back().rank_out != 1)
        fail(Errc::shape, "boundary ranks must be 1");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        const auto& c = cores_[k];
        if (c.rows == 0 || c.cols == 0 || c.rank_in == 0 || c.rank_out == 0)
            fail(Errc::shape, "degenerate TT-matrix core");
        if (c.data.size() != c.rows * c.cols * c.rank_in * c.rank_out)
            fail(Errc::shape, "TT-matrix core data length mismatch");
        if (k > 0 && cores_[k - 1].rank_out != c.rank_in)
            fail(Errc::shape, "rank mismatch between cores " + std::to_string(k - 1) + " and " + std::to_string(k));
    }
}

TTMatrix TTMatrix::zeros(const Shape& row_factors, const Shape& col_factors,
                         std::span<const std::size_t> ranks) {
    const std::size_t d = row_factors.size();
    if (d == 0 || col_factors.size() != d) fail(Errc::shape, "row/col factor counts differ");
    check_boundary_ranks(ranks, d);
    std::vector<TTMatrixCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        TTMatrixCore c{row_factors[k], col_factors[k], ranks[k], ranks[k + 1], {}};
        c.data.assign(c.rows * c.cols * c.rank_in * c.rank_out, 0.0);
        cores.push_back(std::move(c));
    }
    return TTMatrix(std::move(cores));
}

Shape TTMatrix::row_factors() const {
    Shape s;
    for (const auto& c : cores_) s.push_back(c.rows);
    return s;
}

Shape TTMatrix::col_factors() const {
    Shape s;
    for (const auto& c : cores_) s.push_back(c.cols);
    return s;
}

std::vector<std::size_t> TTMatrix::ranks() const {
    std::vector<std::size_t> r{1};
    for (const auto& c : cores_) r.push_back(c.rank_out);
    return r;
}

std::size_t TTMatrix::num_rows() const { return shape_product(row_factors()); }
std::size_t TTMatrix::num_cols() const { return shape_product(col_factors()); }

std::size_t TTMatrix::param_count() const {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.data.size();
    return n;
}

namespace {

// Offsets of W(j, :) and W(:, i) inside the fused tensor of shape (n_k * m_k).
void fused_offsets(const Shape& rows, const Shape& cols, std::vector<std::size_t>& row_off,
                   std::vector<std::size_t>& col_off) {
    const std::size_t d = rows.size();
    Shape fused(d);
    for (std::size_t k = 0; k < d; ++k) fused[k] = rows[k] * cols[k];
    const Shape stride = row_major_strides(fused);

    row_off.assign(shape_product(rows), 0);
    for (std::size_t j = 0; j < row_off.size(); ++j) {
        std::size_t rem = j, off = 0;
        for (std::size_t k = d; k-- > 0;) {
            off += (rem % rows[k]) * cols[k] * stride[k];
            rem /= rows[k];
        }
        row_off[j] = off;
    }
    col_off.assign(shape_product(cols), 0);
    for (std::size_t i = 0; i < col_off.size(); ++i) {
        std::size_t rem = i, off = 0;
        for (std::size_t k = d; k-- > 0;) {
            off += (rem % cols[k]) * stride[k];
            rem /= cols[k];
        }
        col_off[i] = off;
    }
}

void check_factors(const Shape& rows, const Shape& cols) {
    if (rows.empty() || rows.size() != cols.size()) fail(Errc::shape, "row/col factor counts differ");
    for (auto v : rows)
        if (v == 0) fail(Errc::shape, "zero row factor");
    for (auto v : cols)
        if (v == 0) fail(Errc::shape, "zero column factor");
}

}  // namespace

std::vector<std::size_t> full_tt_matrix_ranks(const Shape& row_factors, const Shape& col_factors) {
    check_factors(row_factors, col_factors);
    Shape fused(row_factors.size());
    for (std::size_t k = 0; k < fused.size(); ++k) fused[k] = row_factors[k] * col_factors[k];
    return full_ranks(fused);
}

TTMatrix to_tt_matrix(const DenseTensor& w, const Shape& row_factors, const Shape& col_factors,
                      const TTTruncation& truncation) {
    check_factors(row_factors, col_factors);
    if (w.order() != 2) fail(Errc::shape, "to_tt_matrix expects an [N, M] matrix");
    const std::size_t n = w.shape()[0], m = w.shape()[1];
    if (shape_product(row_factors) != n || shape_product(col_factors) != m)
        fail(Errc::shape, "factorization does not match matrix dimensions");

    const std::size_t d = row_factors.size();
    Shape fused(d);
    for (std::size_t k = 0; k < d; ++k) fused[k] = row_factors[k] * col_factors[k];

    std::vector<std::size_t> row_off, col_off;
    fused_offsets(row_factors, col_factors, row_off, col_off);
    std::vector<double> data(n * m);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) data[row_off[j] + col_off[i]] = w[j * m + i];

    const TTTensor tt = tt_decompose(DenseTensor(fused, std::move(data)), truncation);

    std::vector<TTMatrixCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        const TTCore& src = tt.cores()[k];
        TTMatrixCore c{row_factors[k], col_factors[k], src.rank_in, src.rank_out, {}};
        c.data.resize(src.data.size());
        for (std::size_t j = 0; j < c.rows; ++j)
            for (std::size_t i = 0; i < c.cols; ++i)
                for (std::size_t a = 0; a < c.rank_in; ++a)
                    for (std::size_t b = 0; b < c.rank_out; ++b)
                        c.data[c.offset(j, i, a, b)] = src(a, j * c.cols + i, b);
        cores.push_back(std::move(c));
    }
    return TTMatrix(std::move(cores));
}

TTTensor as_fused_tt(const TTMatrix& w) {
    std::vector<TTCore> cores;
    for (const auto& c : w.cores()) {
        TTCore f{c.rank_in, c.rows * c.cols, c.rank_out, std::vector<double>(c.data.size())};
        for (std::size_t j = 0; j < c.rows; ++j)
            for (std::size_t i = 0; i < c.cols; ++i)
                for (std::size_t a = 0; a < c.rank_in; ++a)
                    for (std::size_t b = 0; b < c.rank_out; ++b)
                        f.data[(a * f.mode + j * c.cols + i) * f.rank_out + b] = c(j, i, a, b);
        cores.push_back(std::move(f));
    }
    return TTTensor(std::move(cores));
}

DenseTensor tt_matrix_to_dense(const TTMatrix& w, std::size_t max_elements) {
    const DenseTensor fused = tt_reconstruct(as_fused_tt(w), max_elements);
    const Shape rows = w.row_factors(), cols = w.col_factors();
    std::vector<std::size_t> row_off, col_off;
    fused_offsets(rows, cols, row_off, col_off);
    const std::size_t n = row_off.size(), m = col_off.size();
    std::vector<double> data(n * m);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) data[j * m + i] = fused[row_off[j] + col_off[i]];
    return DenseTensor({n, m}, std::move(data));
}

double tt_matrix_element(const TTMatrix& w, std::size_t row, std::size_t col) {
    const auto& cores = w.cores();
    const std::size_t d = cores.size();
    if (row >= w.num_rows() || col >= w.num_cols()) fail(Errc::index, "matrix index out of bounds");
    std::vector<std::size_t> j(d), i(d);
    for (std::size_t k = d; k-- > 0;) {
        j[k] = row % cores[k].rows;
        row /= cores[k].rows;
        i[k] = col % cores[k].cols;
        col /= cores[k].cols;
    }
    std::vector<double> vec{1.0}, next;
    for (std::size_t k = 0; k < d; ++k) {
        const auto& c = cores[k];
        next.assign(c.rank_out, 0.0);
        for (std::size_t a = 0; a < c.rank_in; ++a)
            for (std::size_t b = 0; b < c.rank_out; ++b) next[b] += vec[a] * c(j[k], i[k], a, b);
        vec.swap(next);
    }
    return vec[0];
}

// ---------------------------------------------------------------------------
// Contraction.
//
// Stage k consumes Z of layout (P, r_{k-1}, m_k, Q) with P = n_1..n_{k-1} and
// Q = m_{k+1}..m_d, and produces (P, n_k, r_k, Q). Stage 0 input is x itself
// (P = r_0 = 1); the last stage output is y (r_d = Q = 1).
// ---------------------------------------------------------------------------

namespace {

struct StageDims {
    std::size_t p, q;
};

std::vector<StageDims> stage_dims(const TTMatrix& w) {
    const auto& cores = w.cores();
    const std::size_t d = cores.size();
    std::vector<StageDims> dims(d);
    std::size_t p = 1;
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t q = 1;
        for (std::size_t l = k + 1; l < d; ++l) q *= cores[l].cols;
        dims[k] = {p, q};
        p *= cores[k].rows;
    }
    return dims;
}

template <typename Real>
std::uint64_t contract_stage(const TTMatrixCore& g, const Real* in, Real* out, StageDims dims) {
    const std::size_t n = g.rows, m = g.cols, ra = g.rank_in, rb = g.rank_out, q_len = dims.q;
    std::fill(out, out + dims.p * n * rb * q_len, Real(0));
    std::uint64_t macs = 0;
    for (std::size_t p = 0; p < dims.p; ++p)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t a = 0; a < ra; ++a)
                for (std::size_t i = 0; i < m; ++i) {
                    const Real* z = in + ((p * ra + a) * m + i) * q_len;
                    const double* gv = &g.data[g.offset(j, i, a, 0)];
                    for (std::size_t b = 0; b < rb; ++b) {
                        const Real coeff = static_cast<Real>(gv[b]);
                        Real* o = out + ((p * n + j) * rb + b) * q_len;
                        for (std::size_t q = 0; q < q_len; ++q) o[q] += coeff * z[q];
                        macs += q_len;
                    }
                }
    return macs;
}

std::size_t max_stage_size(const TTMatrix& w, const std::vector<StageDims>& dims) {
    std::size_t sz = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const auto& c = w.cores()[k];
        sz = std::max(sz, dims[k].p * c.rank_in * c.cols * dims[k].q);
        sz = std::max(sz, dims[k].p * c.rows * c.rank_out * dims[k].q);
    }
    return sz;
}

template <typename Real>
void contract_all(const TTMatrix& w, const std::vector<StageDims>& dims, const Real* x,
                  std::vector<Real>& ping, std::vector<Real>& pong, std::uint64_t* macs) {
    const std::size_t sz = max_stage_size(w, dims);
    ping.resize(sz);
    pong.resize(sz);
    const Real* in = x;
    std::uint64_t count = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        count += contract_stage<Real>(w.cores()[k], in, ping.data(), dims[k]);
        in = ping.data();
        ping.swap(pong);
    }
    // Result now sits in pong.
    if (macs) *macs += count;
}

}  // namespace

void tt_matvec_accumulate(const TTMatrix& w, std::span<const double> x, std::span<double> y,
                          TTWorkspace& ws, std::uint64_t* macs, Precision precision) {
    const std::size_t n = w.num_rows(), m = w.num_cols();
    if (x.size() != m || y.size() != n) fail(Errc::shape, "tt_matvec operand size mismatch");
    const auto dims = stage_dims(w);
    if (precision == Precision::f64) {
        contract_all<double>(w, dims, x.data(), ws.ping, ws.pong, macs);
        for (std::size_t j = 0; j < n; ++j) y[j] += ws.pong[j];
    } else {
        ws.x32.assign(x.begin(), x.end());
        contract_all<float>(w, dims, ws.x32.data(), ws.ping32, ws.pong32, macs);
        for (std::size_t j = 0; j < n; ++j) y[j] += static_cast<double>(ws.pong32[j]);
    }
}

DenseTensor tt_matvec(const TTMatrix& w, const DenseTensor& x, const DenseTensor& b, std::uint64_t* macs) {
    if (x.shape() != w.col_factors()) fail(Errc::shape, "x shape must equal the column factors");
    if (b.shape() != w.row_factors()) fail(Errc::shape, "b shape must equal the row factors");
    DenseTensor y = b;
    TTWorkspace ws;
    tt_matvec_accumulate(w, x.data(), y.data(), ws, macs);
    return y;
}

void tt_matvec_backward(const TTMatrix& w, std::span<const double> x, std::span<const double> dy,
                        TTMatrix& grad, std::span<double> dx, TTWorkspace& ws) {
    const std::size_t n = w.num_rows(), m = w.num_cols();
    if (x.size() != m || dy.size() != n) fail(Errc::shape, "tt_matvec_backward operand size mismatch");
    if (!dx.empty() && dx.size() != m) fail(Errc::shape, "dx size mismatch");
    const auto& cores = w.cores();
    const std::size_t d = cores.size();
    const auto dims = stage_dims(w);

    // Forward again, keeping every stage input.
    ws.stages.resize(d);
    ws.stages[0].assign(x.begin(), x.end());
    for (std::size_t k = 0; k + 1 < d; ++k) {
        const auto& c = cores[k];
        ws.stages[k + 1].resize(dims[k].p * c.rows * c.rank_out * dims[k].q);
        contract_stage<double>(c, ws.stages[k].data(), ws.stages[k + 1].data(), dims[k]);
    }

    std::vector<double>& dout = ws.ping;
    std::vector<double>& din = ws.pong;
    dout.assign(dy.begin(), dy.end());
    for (std::size_t k = d; k-- > 0;) {
        const auto& c = cores[k];
        auto g_grad = grad.core_values(k);
        const std::size_t nn = c.rows, mm = c.cols, ra = c.rank_in, rb = c.rank_out;
        const std::size_t pp = dims[k].p, qq = dims[k].q;
        const std::vector<double>& zin = ws.stages[k];
        const bool need_input_grad = k > 0 || !dx.empty();
        if (need_input_grad) din.assign(pp * ra * mm * qq, 0.0);
        for (std::size_t p = 0; p < pp; ++p)
            for (std::size_t j = 0; j < nn; ++j)
                for (std::size_t a = 0; a < ra; ++a)
                    for (std::size_t i = 0; i < mm; ++i) {
                        const double* z = &zin[((p * ra + a) * mm + i) * qq];
                        double* dz = need_input_grad ? &din[((p * ra + a) * mm + i) * qq] : nullptr;
                        const std::size_t goff = c.offset(j, i, a, 0);
                        for (std::size_t b = 0; b < rb; ++b) {
                            const double* go = &dout[((p * nn + j) * rb + b) * qq];
                            double acc = 0.0;
                            for (std::size_t q = 0; q < qq; ++q) acc += z[q] * go[q];
                            g_grad[goff + b] += acc;
                            if (dz) {
                                const double gv = c.data[goff + b];
                                for (std::size_t q = 0; q < qq; ++q) dz[q] += gv * go[q];
                            }
                        }
                    }
        if (need_input_grad) dout.swap(din);
    }
    if (!dx.empty())
        for (std::size_t i = 0; i < m; ++i) dx[i] += dout[i];
}

ComplexityStats stats(const TTMatrix& w) {
    ComplexityStats s;
    const auto& cores = w.cores();
    s.d = cores.size();
    const auto dims = stage_dims(w);
    for (std::size_t k = 0; k < cores.size(); ++k) {
        const auto& c = cores[k];
        s.r_max = std::max({s.r_max, c.rank_in, c.rank_out});
        s.n_m = std::max(s.n_m, c.rows * c.cols);
        s.tt_param_count += c.rows * c.cols * c.rank_in * c.rank_out;
        s.tt_mac_count += static_cast<std::uint64_t>(dims[k].p) * dims[k].q * c.rows * c.cols * c.rank_in * c.rank_out;
    }
    s.dense_param_count = static_cast<std::uint64_t>(w.num_rows()) * w.num_cols();
    s.dense_mac_count = s.dense_param_count;
    return s;
}

}  // namespace s3net
