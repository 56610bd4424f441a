// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/lstm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "s3net/error.hpp"
#include "s3net/rng.hpp"

namespace s3net {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Map<const Eigen::VectorXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

const char* mode_name(Mode mode) noexcept {
    switch (mode) {
        case Mode::dense: return "dense";
        case Mode::tt: return "tt";
        case Mode::tt_quant: return "tt_quant";
        case Mode::dense_quant: return "dense_quant";
    }
    return "unknown";
}

Mode parse_mode(std::string_view name) {
    for (Mode m : {Mode::dense, Mode::tt, Mode::tt_quant, Mode::dense_quant})
        if (name == mode_name(m)) return m;
    fail(Errc::config, "unknown mode '" + std::string(name) + "' (dense, tt, tt_quant, dense_quant)");
}

// ---------------------------------------------------------------------------
// WeightMatrix
// ---------------------------------------------------------------------------

std::size_t WeightMatrix::rows() const { return is_tt() ? tt().num_rows() : dense().rows; }
std::size_t WeightMatrix::cols() const { return is_tt() ? tt().num_cols() : dense().cols; }
std::size_t WeightMatrix::param_count() const { return is_tt() ? tt().param_count() : dense().data.size(); }

std::vector<std::span<double>> WeightMatrix::blocks() {
    std::vector<std::span<double>> out;
    if (is_tt()) {
        for (std::size_t k = 0; k < tt().order(); ++k) out.push_back(tt().core_values(k));
    } else {
        out.push_back(dense().data);
    }
    return out;
}

std::vector<std::span<const double>> WeightMatrix::blocks() const {
    std::vector<std::span<const double>> out;
    if (is_tt()) {
        for (const auto& c : tt().cores()) out.push_back(c.data);
    } else {
        out.push_back(dense().data);
    }
    return out;
}

WeightMatrix WeightMatrix::zeros_like() const {
    if (is_tt()) return WeightMatrix(TTMatrix::zeros(tt().row_factors(), tt().col_factors(), tt().ranks()));
    return WeightMatrix(Matrix::zeros(dense().rows, dense().cols));
}

void WeightMatrix::apply(std::span<const double> x, std::span<double> y, Workspace& ws, std::uint64_t* macs,
                         Precision precision) const {
    if (is_tt()) {
        tt_matvec_accumulate(tt(), x, y, ws.tt, macs, precision);
        return;
    }
    const Matrix& m = dense();
    if (x.size() != m.cols || y.size() != m.rows) fail(Errc::shape, "dense matvec operand size mismatch");
    Eigen::Map<const RowMatrix> w(m.data.data(), idx(m.rows), idx(m.cols));
    MutVec(y.data(), idx(m.rows)).noalias() += w * Vec(x.data(), idx(m.cols));
    if (macs) *macs += static_cast<std::uint64_t>(m.rows) * m.cols;
}

void WeightMatrix::backward(std::span<const double> x, std::span<const double> dy, WeightMatrix& grad,
                            std::span<double> dx, Workspace& ws) const {
    if (is_tt()) {
        tt_matvec_backward(tt(), x, dy, grad.tt(), dx, ws.tt);
        return;
    }
    const Matrix& m = dense();
    Eigen::Map<const RowMatrix> w(m.data.data(), idx(m.rows), idx(m.cols));
    Eigen::Map<RowMatrix> g(grad.dense().data.data(), idx(m.rows), idx(m.cols));
    const Vec dyv(dy.data(), idx(m.rows));
    g.noalias() += dyv * Vec(x.data(), idx(m.cols)).transpose();
    if (!dx.empty()) MutVec(dx.data(), idx(m.cols)).noalias() += w.transpose() * dyv;
}

std::uint64_t WeightMatrix::mac_count() const {
    return is_tt() ? stats(tt()).tt_mac_count : static_cast<std::uint64_t>(rows()) * cols();
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void ModelShape::validate(Mode mode) const {
    if (frame.s == 0 || frame.f == 0 || frame.c == 0) fail(Errc::shape, "frame dimensions must be positive");
    if (hidden_size == 0) fail(Errc::shape, "hidden size must be positive");
    if (num_classes < 2) fail(Errc::shape, "classifier needs at least 2 classes");
    if (!is_tensorized(mode)) return;
    if (input_factors.empty() || input_factors.size() != hidden_factors.size())
        fail(Errc::shape, "input and hidden factorizations need the same number of modes");
    if (shape_product(input_factors) != input_size())
        fail(Errc::shape, "input factors do not multiply to s*f*c");
    if (shape_product(hidden_factors) != hidden_size) fail(Errc::shape, "hidden factors do not multiply to N");
    const std::size_t d = input_factors.size();
    if (ranks.size() != d + 1 || ranks.front() != 1 || ranks.back() != 1)
        fail(Errc::shape, "ranks must list r_0..r_d with r_0 = r_d = 1");
    for (auto r : ranks)
        if (r == 0) fail(Errc::shape, "ranks must be positive");
}

std::vector<ParamRef> Model::parameters() {
    std::vector<ParamRef> out;
    auto add_matrix = [&](const std::string& name, WeightMatrix& w) {
        auto blocks = w.blocks();
        if (blocks.size() == 1 && !w.is_tt()) {
            out.push_back({name, blocks[0]});
            return;
        }
        for (std::size_t k = 0; k < blocks.size(); ++k) out.push_back({name + ".core" + std::to_string(k), blocks[k]});
    };
    for (std::size_t g = 0; g < 4; ++g) {
        const std::string prefix = std::string("gate_") + kGateNames[g];
        add_matrix(prefix + ".W", lstm.gates[g].W);
        add_matrix(prefix + ".U", lstm.gates[g].U);
        out.push_back({prefix + ".B", lstm.gates[g].B});
    }
    out.push_back({"head.projection", head.projection.data});
    out.push_back({"head.bias", head.bias});
    return out;
}

std::vector<std::span<const double>> Model::parameter_values() const {
    auto refs = const_cast<Model*>(this)->parameters();
    std::vector<std::span<const double>> out;
    for (auto& r : refs) out.emplace_back(r.values);
    return out;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (auto v : parameter_values()) n += v.size();
    return n;
}

Model Model::zeros_like() const {
    Model z;
    z.mode = mode;
    z.shape = shape;
    z.quant = quant;
    z.lstm.input_size = lstm.input_size;
    z.lstm.hidden_size = lstm.hidden_size;
    for (std::size_t g = 0; g < 4; ++g) {
        z.lstm.gates[g].W = lstm.gates[g].W.zeros_like();
        z.lstm.gates[g].U = lstm.gates[g].U.zeros_like();
        z.lstm.gates[g].B.assign(lstm.gates[g].B.size(), 0.0);
    }
    z.head.projection = Matrix::zeros(head.projection.rows, head.projection.cols);
    z.head.bias.assign(head.bias.size(), 0.0);
    return z;
}

namespace {

double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

WeightMatrix init_weight(std::size_t rows, std::size_t cols, const Shape& row_factors, const Shape& col_factors,
                         const std::vector<std::size_t>& ranks, bool tensorized, Rng& rng) {
    const double variance = 2.0 / static_cast<double>(rows + cols);
    if (!tensorized) {
        Matrix m = Matrix::zeros(rows, cols);
        const double sd = std::sqrt(variance);
        for (auto& v : m.data) v = f32_round(sd * rng.normal());
        return WeightMatrix(std::move(m));
    }
    TTMatrix t = TTMatrix::zeros(row_factors, col_factors, ranks);
    const std::size_t d = t.order();
    double paths = 1.0;
    for (std::size_t k = 1; k < d; ++k) paths *= static_cast<double>(ranks[k]);
    const double sd = std::pow(variance / paths, 1.0 / (2.0 * static_cast<double>(d)));
    for (std::size_t k = 0; k < d; ++k)
        for (auto& v : t.core_values(k)) v = f32_round(sd * rng.normal());
    return WeightMatrix(std::move(t));
}

}  // namespace

Model init_model(const ModelShape& shape, Mode mode, std::uint64_t seed, QuantOptions quant) {
    shape.validate(mode);
    Model m;
    m.mode = mode;
    m.shape = shape;
    m.quant = quant;
    const std::size_t n = shape.hidden_size, in = shape.input_size();
    m.lstm.input_size = in;
    m.lstm.hidden_size = n;
    const bool tt = is_tensorized(mode);
    Rng rng(seed);
    for (auto& gate : m.lstm.gates) {
        gate.W = init_weight(n, in, shape.hidden_factors, shape.input_factors, shape.ranks, tt, rng);
        gate.U = init_weight(n, n, shape.hidden_factors, shape.hidden_factors, shape.ranks, tt, rng);
        gate.B.assign(n, 0.0);
    }
    m.head.projection = Matrix::zeros(n, shape.num_classes);
    const double sd = std::sqrt(2.0 / static_cast<double>(n + shape.num_classes));
    for (auto& v : m.head.projection.data) v = f32_round(sd * rng.normal());
    m.head.bias.assign(shape.num_classes, 0.0);
    return m;
}

Model fake_quantized(const Model& model) {
    Model q = model;
    for (auto& p : q.parameters())
        for (auto& v : p.values) v = quant::fake_quantize_weight(v, model.quant.floor);
    return q;
}

CellState initial_state(const Model& model) {
    const std::size_t n = model.shape.hidden_size;
    const bool lattice = is_quantized(model.mode) && model.quant.quantize_state;
    return CellState{std::vector<double>(n, lattice ? 0.5 : 0.0), std::vector<double>(n, 0.0)};
}

// ---------------------------------------------------------------------------
// Recurrence
// ---------------------------------------------------------------------------

namespace {

struct StepTape {
    std::vector<double> x;          // effective input
    std::vector<double> h_in_prev;  // hidden value fed to U
    std::vector<double> c_prev;
    std::array<std::vector<double>, 4> act;  // E, Z, D, C~
    std::vector<double> c;
    std::vector<double> tanh_c;
    std::vector<double> h_raw;
    std::vector<double> h_state;  // stored H
    std::vector<double> h_in;     // hidden value passed on
};

struct IoRules {
    bool quantize_input = false;
    bool lattice_state = false;
};

IoRules io_rules(Mode mode, const QuantOptions& q) {
    return {is_quantized(mode), is_quantized(mode) && q.quantize_state};
}

void hidden_value_from_state(std::span<const double> h_state, bool lattice, std::vector<double>& h_in) {
    h_in.resize(h_state.size());
    for (std::size_t i = 0; i < h_state.size(); ++i) h_in[i] = lattice ? 2.0 * h_state[i] - 1.0 : h_state[i];
}

void step_forward(const LstmParams& p, IoRules io, std::span<const double> x_raw, std::span<const double> h_in_prev,
                  std::span<const double> c_prev, StepTape& tape, Workspace& ws, std::uint64_t* macs,
                  Precision precision) {
    const std::size_t n = p.hidden_size;
    if (x_raw.size() != p.input_size) fail(Errc::shape, "input frame length differs from M");
    if (h_in_prev.size() != n || c_prev.size() != n) fail(Errc::shape, "state length differs from N");

    tape.x.resize(x_raw.size());
    for (std::size_t i = 0; i < x_raw.size(); ++i)
        tape.x[i] = io.quantize_input ? quant::fake_quantize_feature(x_raw[i]) : x_raw[i];
    tape.h_in_prev.assign(h_in_prev.begin(), h_in_prev.end());
    tape.c_prev.assign(c_prev.begin(), c_prev.end());

    for (std::size_t g = 0; g < 4; ++g) {
        const GateParams& gp = p.gates[g];
        auto& a = tape.act[g];
        a.assign(gp.B.begin(), gp.B.end());
        gp.W.apply(tape.x, a, ws, macs, precision);
        gp.U.apply(tape.h_in_prev, a, ws, macs, precision);
        if (g == kGateC) {
            for (auto& v : a) v = std::tanh(v);
        } else {
            for (auto& v : a) v = sigmoid(v);
        }
    }
    tape.c.resize(n);
    tape.tanh_c.resize(n);
    tape.h_raw.resize(n);
    tape.h_state.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tape.c[i] = tape.act[kGateE][i] * c_prev[i] + tape.act[kGateZ][i] * tape.act[kGateC][i];
        tape.tanh_c[i] = std::tanh(tape.c[i]);
        tape.h_raw[i] = tape.act[kGateD][i] * tape.tanh_c[i];
        tape.h_state[i] = io.lattice_state ? quant::fake_quantize_feature(0.5 * (tape.h_raw[i] + 1.0)) : tape.h_raw[i];
        if (!std::isfinite(tape.c[i]) || !std::isfinite(tape.h_raw[i])) fail(Errc::numeric, "non-finite cell state");
    }
    hidden_value_from_state(tape.h_state, io.lattice_state, tape.h_in);
}

void head_scores(const ClassifierHead& head, std::span<const double> h, std::vector<double>& scores) {
    const Matrix& p = head.projection;
    scores.assign(head.bias.begin(), head.bias.end());
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.cols; ++c) scores[c] += p.data[r * p.cols + c] * h[r];
}

void check_sequence(const Model& model, const FeatureSequence& seq) {
    if (seq.frames.empty()) fail(Errc::input, "empty sequence");
    for (const auto& fr : seq.frames)
        if (fr.tensor.size() != model.shape.input_size()) fail(Errc::shape, "frame size differs from model input size");
}

}  // namespace

CellState cell_step(const LstmParams& params, std::span<const double> x, const CellState& state, Mode mode,
                    QuantOptions quant) {
    const IoRules io = io_rules(mode, quant);
    if (state.H.size() != params.hidden_size || state.C.size() != params.hidden_size)
        fail(Errc::shape, "state length differs from N");
    for (std::size_t i = 0; i < state.H.size(); ++i)
        if (!std::isfinite(state.H[i]) || !std::isfinite(state.C[i])) fail(Errc::numeric, "non-finite state");

    LstmParams effective;
    const LstmParams* p = &params;
    if (is_quantized(mode)) {
        effective = params;
        for (auto& gate : effective.gates) {
            for (auto* w : {&gate.W, &gate.U})
                for (auto block : w->blocks())
                    for (auto& v : block) v = quant::fake_quantize_weight(v, quant.floor);
            for (auto& v : gate.B) v = quant::fake_quantize_weight(v, quant.floor);
        }
        p = &effective;
    }
    std::vector<double> h_in;
    hidden_value_from_state(state.H, io.lattice_state, h_in);
    StepTape tape;
    Workspace ws;
    step_forward(*p, io, x, h_in, state.C, tape, ws, nullptr, Precision::f64);
    return CellState{std::move(tape.h_state), std::move(tape.c)};
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double cross_entropy(std::span<const double> scores, std::size_t target) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    return std::log(z) + mx - scores[target];
}

ForwardResult forward_effective(const Model& eff, const FeatureSequence& seq, Workspace& ws, std::uint64_t* macs,
                                Precision precision) {
    check_sequence(eff, seq);
    const IoRules io = io_rules(eff.mode, eff.quant);
    CellState state = initial_state(eff);
    std::vector<double> h_in;
    hidden_value_from_state(state.H, io.lattice_state, h_in);
    ForwardResult out;
    StepTape tape;
    for (const auto& fr : seq.frames) {
        step_forward(eff.lstm, io, flat_frame(fr), h_in, state.C, tape, ws, macs, precision);
        state.H = tape.h_state;
        state.C = tape.c;
        h_in = tape.h_in;
        out.states.push_back(state);
    }
    head_scores(eff.head, h_in, out.scores);
    out.prediction = argmax(out.scores);
    return out;
}

ForwardResult forward_sequence(const Model& model, const FeatureSequence& seq, std::uint64_t* macs,
                               Precision precision) {
    Workspace ws;
    if (is_quantized(model.mode)) return forward_effective(fake_quantized(model), seq, ws, macs, precision);
    return forward_effective(model, seq, ws, macs, precision);
}

double backward_effective(const Model& eff, const FeatureSequence& seq, std::size_t target, Model& grad,
                          Workspace& ws, std::size_t* prediction) {
    check_sequence(eff, seq);
    if (target >= eff.shape.num_classes) fail(Errc::input, "target class out of range");
    const IoRules io = io_rules(eff.mode, eff.quant);
    const std::size_t n = eff.shape.hidden_size, steps = seq.frames.size();

    std::vector<StepTape> tapes(steps);
    {
        CellState state = initial_state(eff);
        std::vector<double> h_in;
        hidden_value_from_state(state.H, io.lattice_state, h_in);
        std::vector<double> c = state.C;
        for (std::size_t t = 0; t < steps; ++t) {
            step_forward(eff.lstm, io, flat_frame(seq.frames[t]), h_in, c, tapes[t], ws, nullptr, Precision::f64);
            h_in = tapes[t].h_in;
            c = tapes[t].c;
        }
    }
    const std::vector<double>& h_last = tapes.back().h_in;
    std::vector<double> scores;
    head_scores(eff.head, h_last, scores);
    const double loss = cross_entropy(scores, target);
    if (prediction) *prediction = argmax(scores);
    if (!std::isfinite(loss)) fail(Errc::numeric, "non-finite loss");

    // Softmax gradient.
    const std::size_t classes = scores.size();
    std::vector<double> ds(classes);
    {
        const double mx = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (std::size_t k = 0; k < classes; ++k) z += (ds[k] = std::exp(scores[k] - mx));
        for (std::size_t k = 0; k < classes; ++k) ds[k] = ds[k] / z - (k == target ? 1.0 : 0.0);
    }
    std::vector<double> dh(n, 0.0);
    const Matrix& proj = eff.head.projection;
    for (std::size_t k = 0; k < classes; ++k) grad.head.bias[k] += ds[k];
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < classes; ++k) {
            grad.head.projection.data[r * classes + k] += h_last[r] * ds[k];
            dh[r] += proj.data[r * classes + k] * ds[k];
        }

    std::vector<double> dc(n, 0.0), dh_prev(n);
    std::array<std::vector<double>, 4> da;
    for (auto& v : da) v.resize(n);
    for (std::size_t t = steps; t-- > 0;) {
        const StepTape& tp = tapes[t];
        const auto& e = tp.act[kGateE];
        const auto& z = tp.act[kGateZ];
        const auto& d = tp.act[kGateD];
        const auto& ct = tp.act[kGateC];
        for (std::size_t i = 0; i < n; ++i) {
            // Lattice mapping h -> 2 q((h + 1) / 2) - 1 passes straight through.
            const double dh_raw =
                io.lattice_state ? dh[i] * quant::feature_ste_mask(0.5 * (tp.h_raw[i] + 1.0)) : dh[i];
            const double tc = tp.tanh_c[i];
            const double dd = dh_raw * tc;
            const double dci = dc[i] + dh_raw * d[i] * (1.0 - tc * tc);
            da[kGateE][i] = dci * tp.c_prev[i] * e[i] * (1.0 - e[i]);
            da[kGateZ][i] = dci * ct[i] * z[i] * (1.0 - z[i]);
            da[kGateD][i] = dd * d[i] * (1.0 - d[i]);
            da[kGateC][i] = dci * z[i] * (1.0 - ct[i] * ct[i]);
            dc[i] = dci * e[i];
        }
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        for (std::size_t g = 0; g < 4; ++g) {
            const GateParams& gp = eff.lstm.gates[g];
            GateParams& gg = grad.lstm.gates[g];
            for (std::size_t i = 0; i < n; ++i) gg.B[i] += da[g][i];
            gp.W.backward(tp.x, da[g], gg.W, {}, ws);
            gp.U.backward(tp.h_in_prev, da[g], gg.U, dh_prev, ws);
        }
        dh.swap(dh_prev);
    }
    return loss;
}

double backward(const Model& model, const FeatureSequence& seq, std::size_t target, Model& grad) {
    Workspace ws;
    if (is_quantized(model.mode)) return backward_effective(fake_quantized(model), seq, target, grad, ws);
    return backward_effective(model, seq, target, grad, ws);
}

}  // namespace s3net
