// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
//
// Command-line front end. All work goes through the C interface.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "s3net/s3net.h"

namespace {

struct Setting {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
    const char* flag_value = nullptr;  // for flags: value passed when present
};

int fail_with(s3_status status) {
    std::fprintf(stderr, "s3net: error (%s): %s\n", s3_last_error_kind(), s3_last_error());
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-train compressed LSTM: training, compression, quantization and benchmarking", "s3net"};
    app.set_config("--config", "", "Read options from a TOML/INI file (unknown keys are rejected)");
    app.allow_config_extras(false);
    app.set_version_flag("--version", std::string(s3_version()));

    std::string command;
    app.add_option("command", command, "train | eval | compress | quantize | bench | ablate | gradcheck | gen | stats")
        ->required()
        ->check(CLI::IsMember({"train", "eval", "compress", "quantize", "bench", "ablate", "gradcheck", "gen", "stats"}));

    std::vector<Setting> settings;
    settings.reserve(32);
    auto opt = [&](const std::string& key, const std::string& help) {
        settings.push_back({key, {}, nullptr, nullptr});
        settings.back().option = app.add_option("--" + key, settings.back().value, help);
    };
    auto flag = [&](const std::string& name, const std::string& key, const char* value, const std::string& help) {
        settings.push_back({key, {}, nullptr, value});
        settings.back().option = app.add_flag("--" + name, help);
    };

    opt("preset", "desk | paper-shape | tiny (default desk)");
    opt("mode", "dense | tt | tt_quant | dense_quant (default tt)");
    opt("ranks", "TT ranks: one interior value, a full list r0..rd, or 'full' for compress");
    opt("tolerance", "compress: relative TT-SVD tolerance in (0, 1)");
    opt("epochs", "training epochs");
    opt("lr", "learning rate");
    opt("momentum", "momentum coefficient in [0, 1)");
    opt("batch-size", "mini-batch size");
    opt("seed", "random seed (default 1)");
    opt("threads", "worker threads (default 1)");
    flag("deterministic", "deterministic", "true", "fixed-order gradient reduction for any thread count");
    opt("data", "feature file (S3FT)");
    opt("eval-data", "held-out feature file");
    opt("checkpoint", "input checkpoint (S3NT)");
    opt("out", "output path");
    opt("report", "write a JSON report to this path");
    flag("literal-floor", "literal-floor", "true", "round negative weights toward minus infinity");
    flag("no-state-quant", "state-quant", "false", "keep hidden states in full precision in quantized modes");
    opt("precision", "contraction precision: f64 | f32");
    opt("reps", "bench: sequences to time");
    opt("count", "gen: sequences to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(S3_ERR_CONFIG);
    }

    s3_config* cfg = nullptr;
    if (s3_status st = s3_config_create(&cfg); st != S3_OK) return fail_with(st);
    for (const auto& s : settings) {
        if (s.option->count() == 0) continue;
        const std::string value = s.flag_value ? s.flag_value : s.value;
        if (s3_status st = s3_config_set(cfg, s.key.c_str(), value.c_str()); st != S3_OK) {
            s3_config_destroy(cfg);
            return fail_with(st);
        }
    }

    s3_report* report = nullptr;
    const s3_status st = s3_run(command.c_str(), cfg, &report);
    s3_config_destroy(cfg);
    if (report) std::fputs(s3_report_text(report), stdout);
    s3_report_destroy(report);
    return st == S3_OK ? 0 : fail_with(st);
}
