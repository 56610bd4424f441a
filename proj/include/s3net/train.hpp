// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "s3net/lstm.hpp"

namespace s3net {

struct TrainConfig {
    std::size_t epochs = 30;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool deterministic = true;  // fixed-order reduction independent of `threads`
    double clip_norm = 5.0;

    void validate() const;  // Errc::config naming the offending field
};

struct EvalResult {
    std::size_t count = 0;
    std::size_t correct = 0;
    double loss = 0.0;  // mean cross-entropy
    std::vector<std::size_t> predictions;

    double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> history;
};

/// Mean loss and accuracy. Results do not depend on `threads`.
EvalResult evaluate(const Model& model, std::span<const FeatureSequence> data, std::size_t threads = 1,
                    Precision precision = Precision::f64);

/// Summed-loss gradient over `batch` with respect to the effective (possibly
/// 8-bit) values. Deterministic mode reduces per-example gradients in batch
/// order, so the result does not depend on `threads`; otherwise each worker
/// accumulates its own share and results depend on the thread count.
/// Returns the summed loss; `grad` is overwritten and `predictions`, when
/// given, receives one entry per example.
double batch_gradient(const Model& model, std::span<const FeatureSequence* const> batch, Model& grad,
                      std::size_t threads = 1, std::vector<std::size_t>* predictions = nullptr,
                      bool deterministic = true);

/// Mini-batch momentum descent: v = mu v + g; p -= lr v, with global-norm
/// clipping. Quantized modes run the forward pass on 8-bit values and update a
/// full-precision shadow copy through the straight-through estimator.
/// Non-finite loss or gradients are Errc::numeric.
TrainResult train(Model model, std::span<const FeatureSequence> train_set, std::span<const FeatureSequence> eval_set,
                  const TrainConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct TensorCheck {
    std::string name;
    std::size_t size = 0;
    double max_rel_error = 0.0;
};

struct GradcheckReport {
    Mode mode = Mode::dense;
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0.0;
    bool zero_params_ok = false;     // zero model: gradients match the closed form
    bool batch_linearity_ok = false;  // duplicated example doubles the gradient exactly
    double threshold = 1e-4;

    bool pass() const { return max_rel_error < threshold && zero_params_ok && batch_linearity_ok; }
};

/// Tiny model (frame 1x3x4 so M = 12, N = 8, T = 3). Every parameter is
/// compared against central differences; relative error is
/// |g - fd| / max(|g|, |fd|, 1e-6).
GradcheckReport gradcheck(Mode mode, std::uint64_t seed, double step = 1e-5);

/// Tiny-model shape used by gradcheck.
ModelShape tiny_shape();

}  // namespace s3net
