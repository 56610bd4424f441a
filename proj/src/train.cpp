// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "s3net/error.hpp"
#include "s3net/rng.hpp"

namespace s3net {

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first failure
/// (lowest index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            try {
                fn(i, w);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
        run(0);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void fill_zero(Model& m) {
    for (auto& p : m.parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
}

void add_into(Model& dst, Model& src) {
    auto d = dst.parameters();
    auto s = src.parameters();
    for (std::size_t k = 0; k < d.size(); ++k)
        for (std::size_t i = 0; i < d[k].values.size(); ++i) d[k].values[i] += s[k].values[i];
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs > 100000) fail(Errc::config, "epochs: must be at most 100000");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0 || learning_rate > 10.0)
        fail(Errc::config, "lr: must lie in [0, 10]");
    if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) fail(Errc::config, "momentum: must lie in [0, 1)");
    if (batch_size == 0 || batch_size > 65536) fail(Errc::config, "batch_size: must lie in [1, 65536]");
    if (threads == 0 || threads > 256) fail(Errc::config, "threads: must lie in [1, 256]");
    if (!std::isfinite(clip_norm) || clip_norm <= 0.0) fail(Errc::config, "clip: must be positive");
}

EvalResult evaluate(const Model& model, std::span<const FeatureSequence> data, std::size_t threads,
                    Precision precision) {
    const Model quantized = is_quantized(model.mode) ? fake_quantized(model) : Model{};
    const Model& eff = is_quantized(model.mode) ? quantized : model;
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(data.size(), 1));
    std::vector<Workspace> ws(workers);
    std::vector<double> losses(data.size());
    EvalResult out;
    out.count = data.size();
    out.predictions.resize(data.size());
    parallel_for(data.size(), workers, [&](std::size_t i, std::size_t w) {
        const ForwardResult r = forward_effective(eff, data[i], ws[w], nullptr, precision);
        if (data[i].label >= r.scores.size()) fail(Errc::data, "label exceeds the number of classes");
        losses[i] = cross_entropy(r.scores, data[i].label);
        out.predictions[i] = r.prediction;
    });
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.loss += losses[i];
        if (out.predictions[i] == data[i].label) ++out.correct;
    }
    if (out.count) out.loss /= static_cast<double>(out.count);
    return out;
}

double batch_gradient(const Model& model, std::span<const FeatureSequence* const> batch, Model& grad,
                      std::size_t threads, std::vector<std::size_t>* predictions, bool deterministic) {
    const Model quantized = is_quantized(model.mode) ? fake_quantized(model) : Model{};
    const Model& eff = is_quantized(model.mode) ? quantized : model;
    grad = model.zeros_like();
    const std::size_t wave = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(batch.size(), 1));
    std::vector<Model> buffers(wave, grad);
    std::vector<Workspace> ws(wave);
    std::vector<double> losses(batch.size());
    std::vector<std::size_t> preds(batch.size());
    auto example = [&](std::size_t i, Model& into, Workspace& w) {
        const FeatureSequence& seq = *batch[i];
        losses[i] = backward_effective(eff, seq, seq.label, into, w, &preds[i]);
    };
    if (deterministic) {
        for (std::size_t start = 0; start < batch.size(); start += wave) {
            const std::size_t count = std::min(wave, batch.size() - start);
            parallel_for(count, wave, [&](std::size_t i, std::size_t) {
                fill_zero(buffers[i]);
                example(start + i, buffers[i], ws[i]);
            });
            for (std::size_t i = 0; i < count; ++i) add_into(grad, buffers[i]);
        }
    } else {
        parallel_for(batch.size(), wave, [&](std::size_t i, std::size_t w) { example(i, buffers[w], ws[w]); });
        for (auto& b : buffers) add_into(grad, b);
    }
    if (predictions) *predictions = std::move(preds);
    double total = 0.0;
    for (double l : losses) total += l;
    return total;
}

TrainResult train(Model model, std::span<const FeatureSequence> train_set, std::span<const FeatureSequence> eval_set,
                  const TrainConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch) {
    config.validate();
    model.shape.validate(model.mode);
    for (const auto& seq : train_set)
        if (seq.label >= model.shape.num_classes) fail(Errc::data, "training label exceeds the number of classes");

    TrainResult result;
    Model velocity = model.zeros_like();
    Model grad;
    Rng rng = Rng::derive(config.seed, 0x5eed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const bool quantized = is_quantized(model.mode);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            std::vector<const FeatureSequence*> batch(count);
            for (std::size_t i = 0; i < count; ++i) batch[i] = &train_set[order[start + i]];
            std::vector<std::size_t> preds;
            const double loss = batch_gradient(model, batch, grad, config.threads, &preds, config.deterministic);
            if (!std::isfinite(loss)) fail(Errc::numeric, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += loss;
            for (std::size_t i = 0; i < count; ++i)
                if (preds[i] == batch[i]->label) ++correct;

            auto params = model.parameters();
            auto grads = grad.parameters();
            auto vel = velocity.parameters();
            const double inv = 1.0 / static_cast<double>(count);
            double norm2 = 0.0;
            for (std::size_t k = 0; k < params.size(); ++k) {
                for (std::size_t i = 0; i < grads[k].values.size(); ++i) {
                    double g = grads[k].values[i] * inv;
                    if (quantized) g *= quant::weight_ste_mask(params[k].values[i]);
                    grads[k].values[i] = g;
                    norm2 += g * g;
                }
            }
            const double norm = std::sqrt(norm2);
            if (!std::isfinite(norm)) fail(Errc::numeric, "training diverged: non-finite gradient at epoch " + std::to_string(epoch));
            const double scale = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
            for (std::size_t k = 0; k < params.size(); ++k) {
                for (std::size_t i = 0; i < params[k].values.size(); ++i) {
                    double& v = vel[k].values[i];
                    v = config.momentum * v + scale * grads[k].values[i];
                    params[k].values[i] -= config.learning_rate * v;
                }
            }
        }

        EpochMetrics m;
        m.epoch = epoch;
        if (!train_set.empty()) {
            m.train_loss = loss_sum / static_cast<double>(train_set.size());
            m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        }
        if (!eval_set.empty()) {
            const EvalResult e = evaluate(model, eval_set, config.threads);
            m.eval_loss = e.loss;
            m.eval_accuracy = e.accuracy();
        }
        result.history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

ModelShape tiny_shape() {
    ModelShape s;
    s.frame = FrameDims{1, 3, 4};
    s.hidden_size = 8;
    s.num_classes = 3;
    s.input_factors = {3, 4};
    s.hidden_factors = {2, 4};
    s.ranks = {1, 3, 1};
    return s;
}

namespace {

FeatureSequence tiny_sequence(const ModelShape& shape, Rng& rng, std::size_t frames) {
    FeatureSequence seq;
    seq.label = static_cast<std::uint16_t>(rng.below(shape.num_classes));
    seq.provenance = Provenance::synthetic;
    const FrameDims d = shape.frame;
    for (std::size_t t = 0; t < frames; ++t) {
        FrameFeatures f;
        f.tensor = DenseTensor({d.s, d.f, d.c});
        for (auto& v : f.tensor.data()) v = rng.uniform(0.05, 0.95);
        f.frame_index = static_cast<std::uint32_t>(t);
        f.subscene_count = static_cast<std::uint16_t>(d.s);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

double loss_of(const Model& m, const FeatureSequence& seq) {
    return cross_entropy(forward_sequence(m, seq).scores, seq.label);
}

}  // namespace

GradcheckReport gradcheck(Mode mode, std::uint64_t seed, double step) {
    if (is_quantized(mode)) fail(Errc::config, "gradcheck runs on float modes (dense, tt)");
    if (!(step > 0.0) || step > 1e-2) fail(Errc::config, "gradcheck step must lie in (0, 1e-2]");
    GradcheckReport report;
    report.mode = mode;
    const ModelShape shape = tiny_shape();
    Rng rng = Rng::derive(seed, 0x9c);
    Model model = init_model(shape, mode, seed);
    for (auto& p : model.parameters())
        if (p.name.ends_with(".B") || p.name == "head.bias")
            for (auto& v : p.values) v = 0.2 * rng.normal();
    const FeatureSequence seq = tiny_sequence(shape, rng, 3);

    Model grad = model.zeros_like();
    backward(model, seq, seq.label, grad);

    auto params = model.parameters();
    auto grads = grad.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        TensorCheck check{params[k].name, params[k].values.size(), 0.0};
        for (std::size_t i = 0; i < params[k].values.size(); ++i) {
            double& p = params[k].values[i];
            const double saved = p;
            p = saved + step;
            const double up = loss_of(model, seq);
            p = saved - step;
            const double down = loss_of(model, seq);
            p = saved;
            const double fd = (up - down) / (2.0 * step);
            const double g = grads[k].values[i];
            const double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-6});
            check.max_rel_error = std::max(check.max_rel_error, rel);
        }
        report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
        report.tensors.push_back(std::move(check));
    }

    // Zero model: hidden states stay zero, scores are uniform, so only the
    // head bias receives gradient (softmax mass minus the target indicator).
    {
        Model zero = model.zeros_like();
        Model zgrad = zero.zeros_like();
        backward(zero, seq, seq.label, zgrad);
        bool ok = true;
        const double mass = 1.0 / static_cast<double>(shape.num_classes);
        for (auto& p : zgrad.parameters()) {
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                double expected = 0.0;
                if (p.name == "head.bias") expected = mass - (i == seq.label ? 1.0 : 0.0);
                if (std::fabs(p.values[i] - expected) > 1e-15) ok = false;
            }
        }
        report.zero_params_ok = ok;
    }

    // Batch linearity.
    {
        Model single, doubled;
        const FeatureSequence* one[] = {&seq};
        const FeatureSequence* two[] = {&seq, &seq};
        const double l1 = batch_gradient(model, one, single);
        const double l2 = batch_gradient(model, two, doubled);
        bool ok = l2 == 2.0 * l1;
        auto a = single.parameters();
        auto b = doubled.parameters();
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t i = 0; i < a[k].values.size(); ++i)
                if (b[k].values[i] != 2.0 * a[k].values[i]) ok = false;
        report.batch_linearity_ok = ok;
    }
    return report;
}

}  // namespace s3net
