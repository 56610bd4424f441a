// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "s3net/lstm.hpp"
#include "s3net/report.hpp"

namespace s3net {

/// Parameters shared by every command. Unset optionals fall back to the preset.
struct RunConfig {
    std::string preset = "desk";
    std::optional<Mode> mode;
    std::string ranks;               // "" = preset ranks
    std::optional<double> tolerance;  // compress: relative TT-SVD tolerance
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    std::optional<double> momentum;
    std::optional<std::size_t> batch_size;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool deterministic = false;
    std::string data;        // feature file (train/eval input)
    std::string eval_data;   // optional held-out feature file
    std::string checkpoint;  // input checkpoint
    std::string out;         // output checkpoint, dataset or directory
    std::string report;      // optional JSON report path
    bool literal_floor = false;
    bool quantize_state = true;
    bool f32 = false;  // single-precision contraction path
    std::size_t repetitions = 4;
    std::optional<std::size_t> count;  // gen: sequences to emit

    /// Errc::config naming the offending field.
    void validate() const;
};

Report cmd_train(const RunConfig& cfg);
Report cmd_eval(const RunConfig& cfg);
Report cmd_compress(const RunConfig& cfg);
Report cmd_quantize(const RunConfig& cfg);
Report cmd_bench(const RunConfig& cfg);
Report cmd_ablate(const RunConfig& cfg);
Report cmd_gradcheck(const RunConfig& cfg);  // Errc::numeric when the check fails
Report cmd_gen(const RunConfig& cfg);
Report cmd_stats(const RunConfig& cfg);

/// Dispatches by command name; Errc::config for unknown names.
Report run_command(const std::string& name, const RunConfig& cfg);

}  // namespace s3net
