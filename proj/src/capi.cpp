// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include "s3net/s3net.h"

#include <charconv>
#include <filesystem>
#include <new>
#include <string>

#include "s3net/checkpoint.hpp"
#include "s3net/commands.hpp"
#include "s3net/error.hpp"
#include "s3net/train.hpp"

struct s3_config {
    s3net::RunConfig cfg;
};

struct s3_report {
    s3net::Report report;
    std::string text;
    std::string json;
};

struct s3_model {
    s3net::Checkpoint ckpt;
};

struct s3_dataset {
    s3net::DecodedSequences data;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_kind = "none";

s3_status status_of(s3net::Errc code) {
    switch (code) {
        case s3net::Errc::config: return S3_ERR_CONFIG;
        case s3net::Errc::numeric: return S3_ERR_NUMERIC;
        default: return S3_ERR_DATA;
    }
}

s3_status record(s3_status status, const std::string& kind, const std::string& msg) {
    g_kind = kind;
    g_error = msg;
    return status;
}

template <typename Fn>
s3_status guarded(Fn&& fn) {
    try {
        g_error.clear();
        g_kind = "none";
        return fn();
    } catch (const s3net::Error& e) {
        return record(status_of(e.code()), s3net::errc_name(e.code()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return record(S3_ERR_DATA, "io", e.what());
    } catch (const std::bad_alloc&) {
        return record(S3_ERR_DATA, "capacity", "out of memory");
    } catch (const std::exception& e) {
        return record(S3_ERR_INTERNAL, "internal", e.what());
    } catch (...) {
        return record(S3_ERR_INTERNAL, "internal", "unknown exception");
    }
}

s3_status null_arg(const char* what) { return record(S3_ERR_CONFIG, "config", std::string(what) + " is null"); }

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
        s3net::fail(s3net::Errc::config, key + ": '" + text + "' is not a valid number");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
    if (text == "0" || text == "false" || text == "off" || text == "no") return false;
    s3net::fail(s3net::Errc::config, key + ": '" + text + "' is not a boolean");
}

void apply(s3net::RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "preset") c.preset = value;
    else if (key == "mode") c.mode = s3net::parse_mode(value);
    else if (key == "ranks") c.ranks = value;
    else if (key == "tolerance") c.tolerance = parse_number<double>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "lr") c.learning_rate = parse_number<double>(key, value);
    else if (key == "momentum") c.momentum = parse_number<double>(key, value);
    else if (key == "batch-size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") c.threads = parse_number<std::size_t>(key, value);
    else if (key == "deterministic") c.deterministic = parse_bool(key, value);
    else if (key == "data") c.data = value;
    else if (key == "eval-data") c.eval_data = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "out") c.out = value;
    else if (key == "report") c.report = value;
    else if (key == "literal-floor") c.literal_floor = parse_bool(key, value);
    else if (key == "state-quant") c.quantize_state = parse_bool(key, value);
    else if (key == "precision") {
        if (value != "f32" && value != "f64") s3net::fail(s3net::Errc::config, "precision: expected f32 or f64");
        c.f32 = value == "f32";
    } else if (key == "reps") c.repetitions = parse_number<std::size_t>(key, value);
    else if (key == "count") c.count = parse_number<std::size_t>(key, value);
    else s3net::fail(s3net::Errc::config, "unknown configuration key '" + key + "'");
}

}  // namespace

extern "C" {

const char* s3_version(void) { return "1.0.0"; }
const char* s3_last_error(void) { return g_error.c_str(); }
const char* s3_last_error_kind(void) { return g_kind.c_str(); }

s3_status s3_config_create(s3_config** out) {
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new s3_config{};
        return S3_OK;
    });
}

void s3_config_destroy(s3_config* cfg) { delete cfg; }

s3_status s3_config_set(s3_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return null_arg("config, key or value");
    return guarded([&] {
        apply(cfg->cfg, key, value);
        return S3_OK;
    });
}

s3_status s3_run(const char* command, const s3_config* cfg, s3_report** out) {
    if (!command || !cfg || !out) return null_arg("command, config or out");
    *out = nullptr;
    return guarded([&] {
        auto* r = new s3_report{s3net::run_command(command, cfg->cfg), {}, {}};
        r->text = r->report.text();
        r->json = r->report.json();
        *out = r;
        if (auto f = r->report.failure())
            return record(status_of(*f), s3net::errc_name(*f), std::string(command) + ": check failed");
        return S3_OK;
    });
}

const char* s3_report_text(const s3_report* report) { return report ? report->text.c_str() : ""; }
const char* s3_report_json(const s3_report* report) { return report ? report->json.c_str() : ""; }

s3_status s3_report_number(const s3_report* report, const char* key, double* value) {
    if (!report || !key || !value) return null_arg("report, key or value");
    return guarded([&] {
        *value = report->report.number(key);
        return S3_OK;
    });
}

void s3_report_destroy(s3_report* report) { delete report; }

s3_status s3_model_load(const char* path, s3_model** out) {
    if (!path || !out) return null_arg("path or out");
    *out = nullptr;
    return guarded([&] {
        *out = new s3_model{s3net::load_checkpoint(path)};
        return S3_OK;
    });
}

void s3_model_destroy(s3_model* model) { delete model; }

s3_status s3_model_info(const s3_model* model, size_t* input_size, size_t* hidden_size, size_t* num_classes,
                        s3_mode* mode) {
    if (!model) return null_arg("model");
    const auto& m = model->ckpt.model;
    if (input_size) *input_size = m.shape.input_size();
    if (hidden_size) *hidden_size = m.shape.hidden_size;
    if (num_classes) *num_classes = m.shape.num_classes;
    if (mode) *mode = static_cast<s3_mode>(m.mode);
    return S3_OK;
}

s3_status s3_model_predict(const s3_model* model, const float* frames, size_t num_frames, double* scores,
                           size_t scores_len, size_t* prediction) {
    if (!model || !frames || !scores) return null_arg("model, frames or scores");
    return guarded([&] {
        const auto& m = model->ckpt.model;
        const s3net::FrameDims d = m.shape.frame;
        if (scores_len != m.shape.num_classes) s3net::fail(s3net::Errc::shape, "scores_len must equal num_classes");
        s3net::FeatureSequence seq;
        for (size_t t = 0; t < num_frames; ++t) {
            s3net::FrameFeatures f;
            f.tensor = s3net::DenseTensor({d.s, d.f, d.c});
            auto data = f.tensor.data();
            for (size_t i = 0; i < data.size(); ++i) data[i] = frames[t * data.size() + i];
            f.frame_index = static_cast<std::uint32_t>(t);
            f.subscene_count = static_cast<std::uint16_t>(d.s);
            seq.frames.push_back(std::move(f));
        }
        const auto r = s3net::forward_sequence(m, seq);
        for (size_t k = 0; k < scores_len; ++k) scores[k] = r.scores[k];
        if (prediction) *prediction = r.prediction;
        return S3_OK;
    });
}

s3_status s3_dataset_load(const char* path, s3_dataset** out) {
    if (!path || !out) return null_arg("path or out");
    *out = nullptr;
    return guarded([&] {
        *out = new s3_dataset{s3net::load_sequences(path)};
        return S3_OK;
    });
}

void s3_dataset_destroy(s3_dataset* data) { delete data; }
size_t s3_dataset_size(const s3_dataset* data) { return data ? data->data.sequences.size() : 0; }

s3_status s3_model_evaluate(const s3_model* model, const s3_dataset* data, size_t threads, double* accuracy) {
    if (!model || !data || !accuracy) return null_arg("model, data or accuracy");
    return guarded([&] {
        if (!data->data.sequences.empty() && data->data.dims != model->ckpt.model.shape.frame)
            s3net::fail(s3net::Errc::shape, "dataset frame dims differ from the model's");
        *accuracy = s3net::evaluate(model->ckpt.model, data->data.sequences, threads == 0 ? 1 : threads).accuracy();
        return S3_OK;
    });
}

}  // extern "C"
