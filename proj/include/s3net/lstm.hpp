// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "s3net/features.hpp"
#include "s3net/quant.hpp"
#include "s3net/tt.hpp"

namespace s3net {

/// Weight representation and whether the forward pass runs on the 8-bit lattice.
enum class Mode : std::uint8_t { dense = 0, tt = 1, tt_quant = 2, dense_quant = 3 };

const char* mode_name(Mode mode) noexcept;
Mode parse_mode(std::string_view name);  // Errc::config on unknown names
inline bool is_tensorized(Mode m) noexcept { return m == Mode::tt || m == Mode::tt_quant; }
inline bool is_quantized(Mode m) noexcept { return m == Mode::tt_quant || m == Mode::dense_quant; }

/// Row-major [rows, cols].
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<double>(rows * cols)}; }
    bool operator==(const Matrix&) const = default;
};

struct Workspace {
    TTWorkspace tt;
};

/// A weight matrix that is either dense or a TT-matrix.
class WeightMatrix {
  public:
    WeightMatrix() = default;
    explicit WeightMatrix(Matrix m) : rep_(std::move(m)) {}
    explicit WeightMatrix(TTMatrix t) : rep_(std::move(t)) {}

    bool is_tt() const noexcept { return std::holds_alternative<TTMatrix>(rep_); }
    const Matrix& dense() const { return std::get<Matrix>(rep_); }
    Matrix& dense() { return std::get<Matrix>(rep_); }
    const TTMatrix& tt() const { return std::get<TTMatrix>(rep_); }
    TTMatrix& tt() { return std::get<TTMatrix>(rep_); }

    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t param_count() const;

    /// Dense: one block. TT: one block per core.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;

    WeightMatrix zeros_like() const;

    /// y += W x
    void apply(std::span<const double> x, std::span<double> y, Workspace& ws, std::uint64_t* macs = nullptr,
               Precision precision = Precision::f64) const;
    /// grad += dL/dW; dx += W^T dy when dx is non-empty.
    void backward(std::span<const double> x, std::span<const double> dy, WeightMatrix& grad, std::span<double> dx,
                  Workspace& ws) const;

    /// Multiply-accumulates of one apply().
    std::uint64_t mac_count() const;

    bool operator==(const WeightMatrix&) const = default;

  private:
    std::variant<Matrix, TTMatrix> rep_;
};

/// Gate order everywhere: e (forget), z (input), d (output), c (candidate).
enum Gate : std::size_t { kGateE = 0, kGateZ = 1, kGateD = 2, kGateC = 3 };
inline constexpr std::array<const char*, 4> kGateNames{"e", "z", "d", "c"};

struct GateParams {
    WeightMatrix W;  // N x M
    WeightMatrix U;  // N x N
    std::vector<double> B;
    bool operator==(const GateParams&) const = default;
};

struct LstmParams {
    std::array<GateParams, 4> gates;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    bool operator==(const LstmParams&) const = default;
};

struct CellState {
    std::vector<double> H;
    std::vector<double> C;
    bool operator==(const CellState&) const = default;
};

struct ClassifierHead {
    Matrix projection;  // N x num_classes
    std::vector<double> bias;
    bool operator==(const ClassifierHead&) const = default;
};

struct ModelShape {
    FrameDims frame;
    std::size_t hidden_size = 0;
    std::size_t num_classes = 0;
    Shape input_factors;
    Shape hidden_factors;
    std::vector<std::size_t> ranks;  // r_0..r_d shared by every TT-matrix

    std::size_t input_size() const noexcept { return frame.flat_size(); }
    /// Errc::shape on inconsistent factorizations or ranks.
    void validate(Mode mode) const;
    bool operator==(const ModelShape&) const = default;
};

struct QuantOptions {
    bool quantize_state = true;
    quant::FloorMode floor = quant::FloorMode::sign_magnitude;
    bool operator==(const QuantOptions&) const = default;
};

struct ParamRef {
    std::string name;
    std::span<double> values;
};

struct Model {
    Mode mode = Mode::dense;
    ModelShape shape;
    LstmParams lstm;
    ClassifierHead head;
    QuantOptions quant;

    /// Every trainable tensor, in serialization order.
    std::vector<ParamRef> parameters();
    std::vector<std::span<const double>> parameter_values() const;
    std::size_t param_count() const;
    /// Same structure, all values zero (used as a gradient accumulator).
    Model zeros_like() const;

    bool operator==(const Model&) const = default;
};

/// Gaussian initialization. Dense matrices use variance 2/(fan_in + fan_out);
/// TT cores share one standard deviation chosen so the reconstructed matrix
/// has that variance: sigma = (v / prod_k r_k)^(1/(2d)). Values are rounded
/// to float32 so storage round trips are exact.
Model init_model(const ModelShape& shape, Mode mode, std::uint64_t seed, QuantOptions quant = {});

/// Same parameters with every weight and bias replaced by its 8-bit value.
Model fake_quantized(const Model& model);

/// Hidden value zero in the representation used by `mode` (0.5 on the
/// state lattice when hidden states are quantized).
CellState initial_state(const Model& model);

/// One recurrence step. Dense/tt modes evaluate the gate equations directly;
/// quantized modes use 8-bit weights, quantize x_t onto the feature lattice
/// and store H_t as the lattice code of (h + 1) / 2.
CellState cell_step(const LstmParams& params, std::span<const double> x, const CellState& state, Mode mode,
                    QuantOptions quant = {});

struct ForwardResult {
    std::vector<double> scores;
    std::vector<CellState> states;  // after each frame
    std::size_t prediction = 0;
};

/// Zero initial state, cell_step over frames in order, head on the final hidden value.
/// `macs` counts gate matvec multiply-accumulates.
ForwardResult forward_sequence(const Model& model, const FeatureSequence& seq, std::uint64_t* macs = nullptr,
                               Precision precision = Precision::f64);

/// Lowest index among maxima.
std::size_t argmax(std::span<const double> v);

/// Softmax cross-entropy.
double cross_entropy(std::span<const double> scores, std::size_t target);

/// Reverse-mode gradients of the cross-entropy loss through time. Accumulates
/// into `grad` (structure of model.zeros_like()) and returns the loss. In
/// quantized modes the result is with respect to the 8-bit effective values;
/// callers apply the weight straight-through mask.
double backward(const Model& model, const FeatureSequence& seq, std::size_t target, Model& grad);

/// Loss and gradient for models already in effective form (internal fast path).
double backward_effective(const Model& effective, const FeatureSequence& seq, std::size_t target, Model& grad,
                          Workspace& ws, std::size_t* prediction = nullptr);
ForwardResult forward_effective(const Model& effective, const FeatureSequence& seq, Workspace& ws,
                                std::uint64_t* macs = nullptr, Precision precision = Precision::f64);

}  // namespace s3net
