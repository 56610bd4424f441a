// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "s3net/checkpoint.hpp"
#include "s3net/error.hpp"
#include "s3net/presets.hpp"
#include "s3net/train.hpp"

namespace s3net {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kDenseMaterializeCap = 50'000'000;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string joined(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

QuantOptions quant_options(const RunConfig& cfg) {
    QuantOptions q;
    q.quantize_state = cfg.quantize_state;
    q.floor = cfg.literal_floor ? quant::FloorMode::literal : quant::FloorMode::sign_magnitude;
    return q;
}

Precision precision(const RunConfig& cfg) { return cfg.f32 ? Precision::f32 : Precision::f64; }

ModelShape shape_for(const RunConfig& cfg, const Preset& p) {
    ModelShape s = p.shape;
    if (!cfg.ranks.empty()) s.ranks = parse_ranks(cfg.ranks, s.hidden_factors.size());
    return s;
}

TrainConfig train_config(const RunConfig& cfg, const Preset& p) {
    TrainConfig t = p.train;
    if (cfg.epochs) t.epochs = *cfg.epochs;
    if (cfg.learning_rate) t.learning_rate = *cfg.learning_rate;
    if (cfg.momentum) t.momentum = *cfg.momentum;
    if (cfg.batch_size) t.batch_size = *cfg.batch_size;
    t.seed = cfg.seed;
    t.threads = cfg.threads;
    t.deterministic = cfg.deterministic || cfg.threads == 1;
    t.validate();
    return t;
}

void require_dims(const DecodedSequences& d, FrameDims want, const std::string& path) {
    if (!d.sequences.empty() && d.dims != want)
        fail(Errc::shape, path + ": frame dims (" + std::to_string(d.dims.s) + "," + std::to_string(d.dims.f) + "," +
                              std::to_string(d.dims.c) + ") differ from the model's (" + std::to_string(want.s) + "," +
                              std::to_string(want.f) + "," + std::to_string(want.c) + ")");
}

struct Datasets {
    std::vector<FeatureSequence> train;
    std::vector<FeatureSequence> eval;
    std::string source;
};

/// Feature files when given (every fifth sequence held out when no eval file
/// is given), the preset's synthetic task otherwise.
Datasets datasets_for(const RunConfig& cfg, const Preset& p, FrameDims frame, std::size_t classes) {
    Datasets d;
    if (cfg.data.empty()) {
        SyntheticSpec tr = p.train_data, ev = p.eval_data;
        tr.dims = ev.dims = frame;
        tr.num_classes = ev.num_classes = classes;
        d.train = generate_synthetic(tr);
        d.eval = generate_synthetic(ev);
        d.source = "synthetic";
        return d;
    }
    auto loaded = load_sequences(cfg.data);
    require_dims(loaded, frame, cfg.data);
    d.source = cfg.data;
    if (!cfg.eval_data.empty()) {
        auto ev = load_sequences(cfg.eval_data);
        require_dims(ev, frame, cfg.eval_data);
        d.train = std::move(loaded.sequences);
        d.eval = std::move(ev.sequences);
    } else {
        for (std::size_t i = 0; i < loaded.sequences.size(); ++i)
            (i % 5 == 4 ? d.eval : d.train).push_back(std::move(loaded.sequences[i]));
    }
    for (const auto* set : {&d.train, &d.eval})
        for (const auto& s : *set)
            if (s.label >= classes) fail(Errc::data, "label " + std::to_string(s.label) + " exceeds the class count");
    return d;
}

std::vector<FeatureSequence> eval_set_for(const RunConfig& cfg, const Preset& p, const ModelShape& shape) {
    if (cfg.data.empty()) {
        SyntheticSpec ev = p.eval_data;
        ev.dims = shape.frame;
        ev.num_classes = shape.num_classes;
        return generate_synthetic(ev);
    }
    auto loaded = load_sequences(cfg.data);
    require_dims(loaded, shape.frame, cfg.data);
    return std::move(loaded.sequences);
}

void guard_dense_size(const ModelShape& shape, Mode mode) {
    if (is_tensorized(mode)) return;
    const std::uint64_t n = shape.hidden_size, m = shape.input_size();
    if (n * m > kDenseMaterializeCap)
        fail(Errc::capacity, "dense " + std::to_string(n) + "x" + std::to_string(m) +
                                 " weights exceed the materialization cap; use the tt modes or `stats`");
}

std::uint64_t save_and_measure(const fs::path& path, const Checkpoint& ckpt) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_checkpoint(path, ckpt);
    return fs::file_size(path);
}

void describe_model(Report& r, const Model& m) {
    r.set("mode", mode_name(m.mode));
    r.set("input_size", m.shape.input_size());
    r.set("hidden_size", m.shape.hidden_size);
    r.set("classes", m.shape.num_classes);
    if (is_tensorized(m.mode)) {
        r.set("input_factors", joined(m.shape.input_factors));
        r.set("hidden_factors", joined(m.shape.hidden_factors));
        r.set("ranks", joined(m.shape.ranks));
    }
    r.set("param_count", m.param_count());
}

void finish(Report& r, const RunConfig& cfg) {
    if (!cfg.report.empty()) r.write_json(cfg.report);
}

Mode default_mode(const RunConfig& cfg) { return cfg.mode.value_or(Mode::tt); }

/// Trains one mode on the given data and returns the snapped result.
struct TrainedModel {
    Checkpoint ckpt;
    std::vector<EpochMetrics> history;
    EvalResult eval;
    double eval_seconds = 0.0;
};

TrainedModel train_mode(const RunConfig& cfg, const Preset& p, Mode mode, const Datasets& data) {
    const ModelShape shape = shape_for(cfg, p);
    guard_dense_size(shape, mode);
    const TrainConfig tc = train_config(cfg, p);
    Model model = init_model(shape, mode, cfg.seed, quant_options(cfg));
    TrainResult result = train(std::move(model), data.train, {}, tc);
    TrainedModel out;
    out.ckpt.model = std::move(result.model);
    snap_to_storage(out.ckpt.model);
    const auto t0 = Clock::now();
    out.eval = evaluate(out.ckpt.model, data.eval, cfg.threads, precision(cfg));
    out.eval_seconds = seconds_since(t0);
    out.history = std::move(result.history);
    out.ckpt.meta.seed = cfg.seed;
    out.ckpt.meta.epochs = tc.epochs;
    out.ckpt.meta.train_loss = out.history.empty() ? 0.0 : out.history.back().train_loss;
    out.ckpt.meta.eval_accuracy = out.eval.accuracy();
    return out;
}

TTMatrix pad_ranks(const TTMatrix& w, const std::vector<std::size_t>& ranks) {
    TTMatrix out = TTMatrix::zeros(w.row_factors(), w.col_factors(), ranks);
    for (std::size_t k = 0; k < w.order(); ++k) {
        const TTMatrixCore& src = w.cores()[k];
        const TTMatrixCore& shape = out.cores()[k];
        auto dst = out.core_values(k);
        for (std::size_t j = 0; j < src.rows; ++j)
            for (std::size_t i = 0; i < src.cols; ++i)
                for (std::size_t a = 0; a < src.rank_in; ++a)
                    for (std::size_t b = 0; b < src.rank_out; ++b) dst[shape.offset(j, i, a, b)] = src(j, i, a, b);
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (preset.empty()) fail(Errc::config, "preset: must not be empty");
    if (tolerance && (!std::isfinite(*tolerance) || *tolerance <= 0.0 || *tolerance >= 1.0))
        fail(Errc::config, "tolerance: must lie in (0, 1)");
    if (tolerance && !ranks.empty()) fail(Errc::config, "ranks/tolerance: give at most one");
    if (epochs && *epochs > 100000) fail(Errc::config, "epochs: must be at most 100000");
    if (learning_rate && (!std::isfinite(*learning_rate) || *learning_rate < 0.0 || *learning_rate > 10.0))
        fail(Errc::config, "lr: must lie in [0, 10]");
    if (momentum && (!std::isfinite(*momentum) || *momentum < 0.0 || *momentum >= 1.0))
        fail(Errc::config, "momentum: must lie in [0, 1)");
    if (batch_size && (*batch_size == 0 || *batch_size > 65536)) fail(Errc::config, "batch-size: must lie in [1, 65536]");
    if (threads == 0 || threads > 256) fail(Errc::config, "threads: must lie in [1, 256]");
    if (repetitions == 0 || repetitions > 1000000) fail(Errc::config, "reps: must lie in [1, 1000000]");
    if (count && (*count == 0 || *count > 10000000)) fail(Errc::config, "count: must lie in [1, 10000000]");
}

Report cmd_train(const RunConfig& cfg) {
    cfg.validate();
    const Preset p = find_preset(cfg.preset);
    const Mode mode = default_mode(cfg);
    const ModelShape shape = shape_for(cfg, p);
    const Datasets data = datasets_for(cfg, p, shape.frame, shape.num_classes);
    const auto t0 = Clock::now();
    TrainedModel tm = train_mode(cfg, p, mode, data);
    const double train_seconds = seconds_since(t0);

    const fs::path out = cfg.out.empty() ? fs::path("model.s3nt") : fs::path(cfg.out);
    const std::uint64_t file_bytes = save_and_measure(out, tm.ckpt);
    const std::uint64_t dense_bytes = dense_equivalent_bytes(shape);

    Report r;
    r.set("command", "train");
    r.set("preset", p.name);
    describe_model(r, tm.ckpt.model);
    r.set("seed", static_cast<std::uint64_t>(cfg.seed));
    r.set("epochs", static_cast<std::uint64_t>(tm.ckpt.meta.epochs));
    r.set("data", data.source);
    r.set("train_sequences", data.train.size());
    r.set("eval_sequences", data.eval.size());
    r.set("final_train_loss", tm.ckpt.meta.train_loss);
    r.set("final_eval_loss", tm.eval.loss);
    r.set("final_eval_accuracy", tm.eval.accuracy());
    r.set("checkpoint", out.string());
    r.set("file_bytes", file_bytes);
    r.set("dense_equivalent_bytes", dense_bytes);
    r.set("storage_reduction", static_cast<double>(dense_bytes) / static_cast<double>(file_bytes));
    r.set("train_seconds", train_seconds);
    for (const auto& m : tm.history)
        r.add_row("epoch", {{"epoch", static_cast<std::uint64_t>(m.epoch)},
                            {"train_loss", m.train_loss},
                            {"train_accuracy", m.train_accuracy}});
    finish(r, cfg);
    return r;
}

Report cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint.empty()) fail(Errc::config, "checkpoint: eval needs --checkpoint");
    const Preset p = find_preset(cfg.preset);
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const auto data = eval_set_for(cfg, p, ckpt.model.shape);
    const auto t0 = Clock::now();
    const EvalResult e = evaluate(ckpt.model, data, cfg.threads, precision(cfg));
    const double secs = seconds_since(t0);
    Report r;
    r.set("command", "eval");
    describe_model(r, ckpt.model);
    r.set("sequences", e.count);
    r.set("correct", e.correct);
    r.set("accuracy", e.accuracy());
    r.set("loss", e.loss);
    r.set("sequences_per_second", secs > 0 ? static_cast<double>(e.count) / secs : 0.0);
    finish(r, cfg);
    return r;
}

Report cmd_compress(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint.empty()) fail(Errc::config, "checkpoint: compress needs --checkpoint");
    const Checkpoint in = load_checkpoint(cfg.checkpoint);
    if (is_tensorized(in.model.mode) || is_quantized(in.model.mode))
        fail(Errc::config, "checkpoint: compress expects a dense-mode checkpoint");
    ModelShape shape = in.model.shape;
    const std::size_t d = shape.hidden_factors.size();
    if (d == 0 || shape.input_factors.size() != d || shape_product(shape.input_factors) != shape.input_size() ||
        shape_product(shape.hidden_factors) != shape.hidden_size)
        fail(Errc::shape, "checkpoint dims have no usable factorization for TT compression");

    const bool full = cfg.ranks == "full";
    std::vector<std::size_t> cap;
    if (!full && !cfg.tolerance) cap = cfg.ranks.empty() ? shape.ranks : parse_ranks(cfg.ranks, d);

    Report r;
    r.set("command", "compress");
    std::vector<TTMatrix> tts;
    std::vector<std::size_t> shared(d + 1, 1);
    for (std::size_t g = 0; g < 4; ++g) {
        for (int which = 0; which < 2; ++which) {
            const Matrix& w = which == 0 ? in.model.lstm.gates[g].W.dense() : in.model.lstm.gates[g].U.dense();
            const Shape& cols = which == 0 ? shape.input_factors : shape.hidden_factors;
            TTTruncation trunc;
            if (cfg.tolerance)
                trunc.tolerance = *cfg.tolerance;
            else
                trunc.max_ranks = full ? full_tt_matrix_ranks(shape.hidden_factors, cols) : cap;
            const DenseTensor dense({w.rows, w.cols}, w.data);
            TTMatrix t = to_tt_matrix(dense, shape.hidden_factors, cols, trunc);
            const double err = relative_error(tt_matrix_to_dense(t, w.rows * w.cols).data(), dense.data());
            const auto rk = t.ranks();
            for (std::size_t k = 0; k <= d; ++k) shared[k] = std::max(shared[k], rk[k]);
            r.add_row("matrix", {{"name", std::string("gate_") + kGateNames[g] + (which == 0 ? ".W" : ".U")},
                                 {"ranks", joined(rk)},
                                 {"reconstruction_error", err},
                                 {"dense_params", static_cast<std::uint64_t>(w.data.size())},
                                 {"tt_params", static_cast<std::uint64_t>(t.param_count())},
                                 {"compression_factor",
                                  static_cast<double>(w.data.size()) / static_cast<double>(t.param_count())}});
            tts.push_back(std::move(t));
        }
    }

    shape.ranks = shared;
    Checkpoint out;
    out.model = zero_model(shape, Mode::tt, in.model.quant);
    for (std::size_t g = 0; g < 4; ++g) {
        out.model.lstm.gates[g].W = WeightMatrix(pad_ranks(tts[2 * g], shared));
        out.model.lstm.gates[g].U = WeightMatrix(pad_ranks(tts[2 * g + 1], shared));
        out.model.lstm.gates[g].B = in.model.lstm.gates[g].B;
    }
    out.model.head = in.model.head;
    snap_to_storage(out.model);

    const Preset p = find_preset(cfg.preset);
    const auto data = eval_set_for(cfg, p, shape);
    const double dense_acc = evaluate(in.model, data, cfg.threads).accuracy();
    const double tt_acc = evaluate(out.model, data, cfg.threads).accuracy();
    out.meta = in.meta;
    out.meta.eval_accuracy = tt_acc;

    const fs::path path = cfg.out.empty() ? fs::path("compressed.s3nt") : fs::path(cfg.out);
    const std::uint64_t bytes_out = save_and_measure(path, out);
    describe_model(r, out.model);
    r.set("dense_param_count", in.model.param_count());
    r.set("dense_eval_accuracy", dense_acc);
    r.set("tt_eval_accuracy", tt_acc);
    r.set("accuracy_drop", dense_acc - tt_acc);
    r.set("checkpoint", path.string());
    r.set("file_bytes", bytes_out);
    finish(r, cfg);
    return r;
}

Report cmd_quantize(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint.empty()) fail(Errc::config, "checkpoint: quantize needs --checkpoint");
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const Mode from = ckpt.model.mode;
    if (from == Mode::tt) ckpt.model.mode = Mode::tt_quant;
    if (from == Mode::dense) ckpt.model.mode = Mode::dense_quant;
    if (cfg.literal_floor) ckpt.model.quant.floor = quant::FloorMode::literal;
    snap_to_storage(ckpt.model);
    const fs::path path = cfg.out.empty() ? fs::path("quantized.s3nt") : fs::path(cfg.out);
    const std::uint64_t bytes_out = save_and_measure(path, ckpt);
    const std::uint64_t dense_bytes = dense_equivalent_bytes(ckpt.model.shape);
    Report r;
    r.set("command", "quantize");
    r.set("from_mode", mode_name(from));
    describe_model(r, ckpt.model);
    r.set("input_bytes", static_cast<std::uint64_t>(fs::file_size(cfg.checkpoint)));
    r.set("checkpoint", path.string());
    r.set("file_bytes", bytes_out);
    r.set("dense_equivalent_bytes", dense_bytes);
    r.set("storage_reduction", static_cast<double>(dense_bytes) / static_cast<double>(bytes_out));
    finish(r, cfg);
    return r;
}

Report cmd_bench(const RunConfig& cfg) {
    cfg.validate();
    const Preset p = find_preset(cfg.preset);
    Model model;
    if (!cfg.checkpoint.empty()) {
        model = load_checkpoint(cfg.checkpoint).model;
    } else {
        const ModelShape shape = shape_for(cfg, p);
        const Mode mode = default_mode(cfg);
        guard_dense_size(shape, mode);
        model = init_model(shape, mode, cfg.seed, quant_options(cfg));
    }
    const ModelShape& shape = model.shape;
    SyntheticSpec spec = p.eval_data;
    spec.dims = shape.frame;
    spec.num_classes = shape.num_classes;
    spec.count = cfg.repetitions;
    spec.seed = cfg.seed;
    const auto seqs = generate_synthetic(spec);

    std::uint64_t per_step = 0;
    for (const auto& g : model.lstm.gates) per_step += g.W.mac_count() + g.U.mac_count();
    const std::uint64_t n = shape.hidden_size, m = shape.input_size();
    const std::uint64_t dense_per_step = 4 * (n * m + n * n);

    const Model quantized = is_quantized(model.mode) ? fake_quantized(model) : Model{};
    const Model& eff = is_quantized(model.mode) ? quantized : model;
    Workspace ws;
    std::uint64_t macs = 0, expected = 0, steps = 0;
    const auto t0 = Clock::now();
    for (const auto& s : seqs) {
        forward_effective(eff, s, ws, &macs, precision(cfg));
        expected += per_step * s.frames.size();
        steps += s.frames.size();
    }
    const double secs = seconds_since(t0);

    // Single input-gate matvec against its closed form.
    const WeightMatrix& w = model.lstm.gates[kGateE].W;
    std::vector<double> x(w.cols(), 0.5), y(w.rows(), 0.0);
    std::uint64_t w_macs = 0;
    w.apply(x, y, ws, &w_macs, precision(cfg));
    const std::uint64_t w_formula = w.mac_count();
    const std::uint64_t w_dense = n * m;

    Report r;
    r.set("command", "bench");
    describe_model(r, model);
    r.set("precision", cfg.f32 ? "f32" : "f64");
    r.set("repetitions", cfg.repetitions);
    r.set("steps", static_cast<std::uint64_t>(steps));
    r.set("seconds", secs);
    r.set("sequences_per_second", secs > 0 ? static_cast<double>(seqs.size()) / secs : 0.0);
    r.set("step_microseconds", steps ? 1e6 * secs / static_cast<double>(steps) : 0.0);
    r.set("mac_count", macs);
    r.set("mac_formula", expected);
    r.set("mac_match", macs == expected);
    r.set("macs_per_step", per_step);
    r.set("dense_macs_per_step", dense_per_step);
    r.set("mac_reduction", static_cast<double>(dense_per_step) / static_cast<double>(per_step));
    r.set("w_mac_count", w_macs);
    r.set("w_mac_formula", w_formula);
    r.set("w_dense_mac_count", w_dense);
    r.set("w_mac_reduction", static_cast<double>(w_dense) / static_cast<double>(w_macs));
    if (macs != expected || w_macs != w_formula) r.set_failure(Errc::numeric);
    finish(r, cfg);
    return r;
}

Report cmd_ablate(const RunConfig& cfg) {
    cfg.validate();
    const Preset p = find_preset(cfg.preset);
    const ModelShape shape = shape_for(cfg, p);
    const Datasets data = datasets_for(cfg, p, shape.frame, shape.num_classes);
    Report r;
    r.set("command", "ablate");
    r.set("preset", p.name);
    r.set("seed", static_cast<std::uint64_t>(cfg.seed));
    r.set("dense_equivalent_bytes", dense_equivalent_bytes(shape));
    for (Mode mode : {Mode::dense, Mode::dense_quant, Mode::tt, Mode::tt_quant}) {
        TrainedModel tm = train_mode(cfg, p, mode, data);
        std::uint64_t bytes_out = 0;
        if (!cfg.out.empty()) {
            bytes_out = save_and_measure(fs::path(cfg.out) / (std::string("ablate_") + mode_name(mode) + ".s3nt"), tm.ckpt);
        } else {
            bytes_out = serialize(tm.ckpt).size();
        }
        r.add_row("row", {{"mode", std::string(mode_name(mode))},
                          {"tensorization", is_tensorized(mode)},
                          {"quantization", is_quantized(mode)},
                          {"accuracy", tm.eval.accuracy()},
                          {"storage_bytes", bytes_out},
                          {"param_count", static_cast<std::uint64_t>(tm.ckpt.model.param_count())},
                          {"sequences_per_second",
                           tm.eval_seconds > 0 ? static_cast<double>(tm.eval.count) / tm.eval_seconds : 0.0}});
    }
    finish(r, cfg);
    return r;
}

Report cmd_gradcheck(const RunConfig& cfg) {
    cfg.validate();
    std::vector<Mode> modes;
    if (cfg.mode)
        modes.push_back(*cfg.mode);
    else
        modes = {Mode::dense, Mode::tt};
    Report r;
    r.set("command", "gradcheck");
    r.set("seed", static_cast<std::uint64_t>(cfg.seed));
    bool pass = true;
    double worst = 0.0;
    for (Mode mode : modes) {
        const GradcheckReport g = gradcheck(mode, cfg.seed);
        for (const auto& t : g.tensors)
            r.add_row("tensor", {{"mode", std::string(mode_name(mode))},
                                 {"name", t.name},
                                 {"size", static_cast<std::uint64_t>(t.size)},
                                 {"max_rel_error", t.max_rel_error}});
        r.set(std::string(mode_name(mode)) + ".max_rel_error", g.max_rel_error);
        r.set(std::string(mode_name(mode)) + ".zero_params", g.zero_params_ok);
        r.set(std::string(mode_name(mode)) + ".batch_linearity", g.batch_linearity_ok);
        worst = std::max(worst, g.max_rel_error);
        pass = pass && g.pass();
        r.set("threshold", g.threshold);
    }
    r.set("max_rel_error", worst);
    r.set("pass", pass);
    if (!pass) r.set_failure(Errc::numeric);
    finish(r, cfg);
    return r;
}

Report cmd_gen(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.out.empty()) fail(Errc::config, "out: gen needs --out");
    const Preset p = find_preset(cfg.preset);
    SyntheticSpec spec = p.train_data;
    spec.seed = cfg.seed;
    if (cfg.count) spec.count = *cfg.count;
    const auto seqs = generate_synthetic(spec);
    const fs::path path(cfg.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_sequences(path, seqs, spec.dims);
    std::size_t frames = 0;
    for (const auto& s : seqs) frames += s.frames.size();
    Report r;
    r.set("command", "gen");
    r.set("preset", p.name);
    r.set("seed", static_cast<std::uint64_t>(spec.seed));
    r.set("sequences", seqs.size());
    r.set("frames", frames);
    r.set("classes", spec.num_classes);
    r.set("s", spec.dims.s);
    r.set("f", spec.dims.f);
    r.set("c", spec.dims.c);
    r.set("out", path.string());
    r.set("file_bytes", static_cast<std::uint64_t>(fs::file_size(path)));
    finish(r, cfg);
    return r;
}

Report cmd_stats(const RunConfig& cfg) {
    cfg.validate();
    const Preset p = find_preset(cfg.preset);
    const ModelShape shape = shape_for(cfg, p);
    Report r;
    r.set("command", "stats");
    r.set("preset", p.name);
    r.set("input_size", shape.input_size());
    r.set("hidden_size", shape.hidden_size);
    r.set("input_factors", joined(shape.input_factors));
    r.set("hidden_factors", joined(shape.hidden_factors));
    r.set("ranks", joined(shape.ranks));
    auto add = [&](const std::string& name, const TTMatrix& w) {
        const ComplexityStats s = stats(w);
        r.add_row("matrix", {{"name", name},
                             {"d", static_cast<std::uint64_t>(s.d)},
                             {"r_max", static_cast<std::uint64_t>(s.r_max)},
                             {"n_m", static_cast<std::uint64_t>(s.n_m)},
                             {"tt_params", s.tt_param_count},
                             {"dense_params", s.dense_param_count},
                             {"compression_factor",
                              static_cast<double>(s.dense_param_count) / static_cast<double>(s.tt_param_count)},
                             {"tt_macs", s.tt_mac_count},
                             {"dense_macs", s.dense_mac_count},
                             {"mac_reduction",
                              static_cast<double>(s.dense_mac_count) / static_cast<double>(s.tt_mac_count)}});
    };
    add("W", TTMatrix::zeros(shape.hidden_factors, shape.input_factors, shape.ranks));
    add("U", TTMatrix::zeros(shape.hidden_factors, shape.hidden_factors, shape.ranks));

    Checkpoint ckpt;
    ckpt.model = zero_model(shape, Mode::tt_quant, quant_options(cfg));
    const std::uint64_t tq = serialized_size(ckpt);
    ckpt.model = zero_model(shape, Mode::tt, quant_options(cfg));
    const std::uint64_t tf = serialized_size(ckpt);
    const std::uint64_t dense = dense_equivalent_bytes(shape);
    r.set("tt_param_count", ckpt.model.param_count());
    r.set("tt_checkpoint_bytes", tf);
    r.set("tt_quant_checkpoint_bytes", tq);
    r.set("dense_equivalent_bytes", dense);
    r.set("storage_reduction_tt_quant", static_cast<double>(dense) / static_cast<double>(tq));
    finish(r, cfg);
    return r;
}

Report run_command(const std::string& name, const RunConfig& cfg) {
    if (name == "train") return cmd_train(cfg);
    if (name == "eval") return cmd_eval(cfg);
    if (name == "compress") return cmd_compress(cfg);
    if (name == "quantize") return cmd_quantize(cfg);
    if (name == "bench") return cmd_bench(cfg);
    if (name == "ablate") return cmd_ablate(cfg);
    if (name == "gradcheck") return cmd_gradcheck(cfg);
    if (name == "gen") return cmd_gen(cfg);
    if (name == "stats") return cmd_stats(cfg);
    fail(Errc::config, "unknown command '" + name + "'");
}

}  // namespace s3net
