// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <random>
#include <sstream>

#include "s3net/checkpoint.hpp"
#include "s3net/commands.hpp"
#include "s3net/error.hpp"
#include "s3net/presets.hpp"
#include "s3net/train.hpp"

using namespace s3net;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
Errc error_code(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an s3net::Error";
    return Errc::io;
}

class TempDir {
  public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("s3net_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    const fs::path& path() const { return path_; }

  private:
    fs::path path_;
};

std::vector<std::uint8_t> file_bytes(const std::string& path) { return bytes::read_file(path); }

Checkpoint trained_like(Mode mode, std::uint64_t seed) {
    Checkpoint c;
    c.model = init_model(tiny_shape(), mode, seed);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto& g : c.model.lstm.gates)
        for (auto& b : g.B) b = nd(gen);
    for (auto& b : c.model.head.bias) b = nd(gen);
    snap_to_storage(c.model);
    c.meta = {seed, 3, 0.25, 0.5};
    return c;
}

// Replace the metadata block and recompute the trailing CRC.
std::vector<std::uint8_t> with_meta(const std::vector<std::uint8_t>& bytes, const std::string& meta) {
    std::uint32_t old_len = 0;
    std::memcpy(&old_len, bytes.data() + 7, 4);
    std::vector<std::uint8_t> out(bytes.begin(), bytes.begin() + 7);
    const auto len = static_cast<std::uint32_t>(meta.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.insert(out.end(), meta.begin(), meta.end());
    out.insert(out.end(), bytes.begin() + 11 + old_len, bytes.end() - 4);
    const auto crc = static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return out;
}

std::string meta_of(const std::vector<std::uint8_t>& bytes) {
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 7, 4);
    return std::string(bytes.begin() + 11, bytes.begin() + 11 + len);
}

void rewrite_crc(std::vector<std::uint8_t>& bytes) {
    const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
    for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
}

RunConfig tiny_config() {
    RunConfig c;
    c.preset = "tiny";
    return c;
}

std::uint64_t row_u64(const ReportFields& row, const std::string& key) {
    for (const auto& [k, v] : row)
        if (k == key) return std::get<std::uint64_t>(v);
    ADD_FAILURE() << key;
    return 0;
}

double row_double(const ReportFields& row, const std::string& key) {
    for (const auto& [k, v] : row)
        if (k == key) return std::get<double>(v);
    ADD_FAILURE() << key;
    return 0;
}

const std::vector<ReportFields>& table(const Report& r, const std::string& name) {
    for (const auto& [n, rows] : r.tables())
        if (n == name) return rows;
    throw std::runtime_error("missing table " + name);
}

}  // namespace

// --- checkpoint format ---------------------------------------------------------

TEST(Checkpoint, RoundTripIsByteIdentical) {
    for (Mode mode : {Mode::dense, Mode::tt, Mode::tt_quant, Mode::dense_quant}) {
        const Checkpoint c = trained_like(mode, 2);
        const auto bytes = serialize(c);
        EXPECT_EQ(bytes.size(), serialized_size(c));
        const Checkpoint back = deserialize(bytes);
        EXPECT_EQ(back.model, c.model) << mode_name(mode);
        EXPECT_EQ(back.meta, c.meta);
        EXPECT_EQ(serialize(back), bytes);
        EXPECT_EQ(std::memcmp(bytes.data(), "S3NT", 4), 0);
        EXPECT_EQ(bytes[4], 1);
        EXPECT_EQ(bytes[5], 0);
        EXPECT_EQ(bytes[6], static_cast<std::uint8_t>(mode));
    }
}

TEST(Checkpoint, PayloadSizesFollowStorageWidth) {
    for (Mode mode : {Mode::dense, Mode::tt, Mode::tt_quant, Mode::dense_quant}) {
        const Checkpoint c = trained_like(mode, 3);
        const auto bytes = serialize(c);
        const std::size_t header = 11 + meta_of(bytes).size();
        const std::size_t width = is_quantized(mode) ? 1 : 4;
        EXPECT_EQ(bytes.size(), header + width * c.model.param_count() + 4) << mode_name(mode);
    }
}

TEST(Checkpoint, ForwardOutputsSurviveSaveAndLoad) {
    TempDir dir;
    std::mt19937_64 gen(4);
    const auto data = generate_synthetic({3, tiny_shape().frame, 8, 6, 4});
    for (Mode mode : {Mode::dense, Mode::tt, Mode::tt_quant, Mode::dense_quant}) {
        const Checkpoint c = trained_like(mode, 4);
        const std::string path = dir / (std::string(mode_name(mode)) + ".s3nt");
        save_checkpoint(path, c);
        const Checkpoint back = load_checkpoint(path);
        for (const auto& seq : data) EXPECT_EQ(forward_sequence(back.model, seq).scores, forward_sequence(c.model, seq).scores);
    }
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
    EXPECT_EQ(files, 4u);  // no temporaries left behind
}

TEST(Checkpoint, SnapPutsQuantizedValuesOnLattice) {
    const Checkpoint c = trained_like(Mode::tt_quant, 5);
    for (const auto& p : c.model.parameter_values())
        for (double v : p) {
            EXPECT_EQ(v * 128.0, std::round(v * 128.0));
            EXPECT_LE(std::abs(v), 127.0 / 128.0);
        }
    const Checkpoint f = trained_like(Mode::tt, 5);
    for (const auto& p : f.model.parameter_values())
        for (double v : p) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Checkpoint, CorruptionIsDetected) {
    const auto good = serialize(trained_like(Mode::tt, 6));

    auto magic = good;
    magic[1] = 'X';
    EXPECT_EQ(error_code([&] { deserialize(magic); }), Errc::format);

    auto version = good;
    version[4] = 2;
    EXPECT_EQ(error_code([&] { deserialize(version); }), Errc::version);

    auto flipped = good;
    flipped[good.size() / 2] ^= 0x10;
    EXPECT_EQ(error_code([&] { deserialize(flipped); }), Errc::checksum);

    const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 1);
    EXPECT_EQ(error_code([&] { deserialize(truncated); }), Errc::checksum);

    const std::vector<std::uint8_t> stub(good.begin(), good.begin() + 8);
    EXPECT_EQ(error_code([&] { deserialize(stub); }), Errc::format);

    auto mode_tag = good;
    mode_tag[6] = 9;
    rewrite_crc(mode_tag);
    EXPECT_EQ(error_code([&] { deserialize(mode_tag); }), Errc::format);
}

TEST(Checkpoint, MetadataIsStrict) {
    const auto good = serialize(trained_like(Mode::tt, 7));
    const std::string meta = meta_of(good);
    EXPECT_EQ(deserialize(with_meta(good, meta)).model, deserialize(good).model);
    EXPECT_NE(meta.find("ranks=1,3,1\n"), std::string::npos);

    EXPECT_EQ(error_code([&] { deserialize(with_meta(good, meta + "colour=blue\n")); }), Errc::format);
    EXPECT_EQ(error_code([&] { deserialize(with_meta(good, meta + "seed=1\n")); }), Errc::format);
    std::string missing = meta;
    missing.erase(0, missing.find('\n') + 1);
    EXPECT_EQ(error_code([&] { deserialize(with_meta(good, missing)); }), Errc::format);
}

TEST(Checkpoint, RejectsCodeMinus128) {
    auto bytes = serialize(trained_like(Mode::tt_quant, 8));
    bytes[11 + meta_of(bytes).size()] = 0x80;
    rewrite_crc(bytes);
    EXPECT_EQ(error_code([&] { deserialize(bytes); }), Errc::format);
}

TEST(Checkpoint, MissingFileIsIoError) {
    EXPECT_EQ(error_code([] { load_checkpoint("/nonexistent/s3net/model.s3nt"); }), Errc::io);
}

TEST(Checkpoint, DenseEquivalentBytes) {
    EXPECT_EQ(dense_equivalent_bytes(find_preset("desk").shape), 2'449'424u);
    EXPECT_EQ(dense_equivalent_bytes(find_preset("paper-shape").shape), 5'839'126'544u);
    const ModelShape t = tiny_shape();
    EXPECT_EQ(dense_equivalent_bytes(t), (4u * (8 * 12 + 8 * 8 + 8) + 8 * 3 + 3) * 4u);
}

TEST(Checkpoint, ZeroModelHasOnlyZeros) {
    const Model m = zero_model(tiny_shape(), Mode::tt);
    EXPECT_EQ(m.mode, Mode::tt);
    for (const auto& p : m.parameter_values())
        for (double v : p) EXPECT_EQ(v, 0.0);
}

// --- presets ------------------------------------------------------------------

TEST(Presets, Shapes) {
    const Preset desk = find_preset("desk");
    EXPECT_EQ(desk.shape.input_factors, (Shape{5, 17, 2, 2}));
    EXPECT_EQ(desk.shape.hidden_size, 256u);
    const Preset large = find_preset("paper-shape");
    EXPECT_EQ(large.shape.input_factors, (Shape{25, 25, 17, 8}));
    EXPECT_EQ(large.shape.hidden_factors, (Shape{8, 8, 8, 8}));
    EXPECT_EQ(large.shape.ranks, (std::vector<std::size_t>{1, 8, 8, 8, 1}));
    EXPECT_EQ(error_code([] { find_preset("huge"); }), Errc::config);
    EXPECT_EQ(preset_names().size(), 3u);
}

TEST(Presets, ParseRanks) {
    EXPECT_EQ(parse_ranks("3", 4), (std::vector<std::size_t>{1, 3, 3, 3, 1}));
    EXPECT_EQ(parse_ranks("1,2,5,1", 3), (std::vector<std::size_t>{1, 2, 5, 1}));
    for (const char* bad : {"", "0", "1,2", "2,2,2,2", "a", "1,,1", "-3"})
        EXPECT_EQ(error_code([&] { parse_ranks(bad, 3); }), Errc::config) << bad;
}

// --- report -------------------------------------------------------------------

TEST(Report, TextAndJson) {
    Report r;
    r.set("command", "demo");
    r.set("flag", true);
    r.set("count", 3u);
    r.set("delta", -2);
    r.set("ratio", 0.5);
    r.add_row("row", {{"mode", std::string("tt")}, {"bytes", std::uint64_t{10}}});
    r.add_row("row", {{"mode", std::string("dense")}, {"bytes", std::uint64_t{40}}});
    std::istringstream lines(r.text());
    std::vector<std::string> got;
    for (std::string l; std::getline(lines, l);) got.push_back(l);
    const std::vector<std::string> expect{"command=demo", "flag=true",       "count=3",         "delta=-2",
                                          "ratio=0.5",    "row.0.mode=tt",   "row.0.bytes=10",  "row.1.mode=dense",
                                          "row.1.bytes=40"};
    EXPECT_EQ(got, expect);
    const auto j = nlohmann::json::parse(r.json());
    EXPECT_EQ(j["command"], "demo");
    EXPECT_EQ(j["row"][1]["bytes"], 40);
    EXPECT_EQ(r.number("count"), 3.0);
    EXPECT_EQ(error_code([&] { (void)r.number("command"); }), Errc::input);
    EXPECT_EQ(error_code([&] { (void)r.number("absent"); }), Errc::input);
}

// --- commands -------------------------------------------------------------------

TEST(Commands, ZeroEpochCheckpointEqualsInitialization) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.epochs = 0;
    cfg.seed = 11;
    cfg.out = dir / "init.s3nt";
    const Report r = run_command("train", cfg);
    Model expect = init_model(tiny_shape(), Mode::tt, 11);
    snap_to_storage(expect);
    const Checkpoint c = load_checkpoint(cfg.out);
    EXPECT_EQ(c.model, expect);
    EXPECT_EQ(c.meta.seed, 11u);
    EXPECT_EQ(c.meta.epochs, 0u);
    EXPECT_EQ(r.number("file_bytes"), static_cast<double>(fs::file_size(cfg.out)));
}

TEST(Commands, TrainIsReproducibleAcrossRunsAndThreads) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.seed = 7;
    cfg.deterministic = true;
    cfg.out = dir / "a.s3nt";
    run_command("train", cfg);
    cfg.out = dir / "b.s3nt";
    run_command("train", cfg);
    cfg.out = dir / "c.s3nt";
    cfg.threads = 3;
    run_command("train", cfg);
    cfg.out = dir / "d.s3nt";
    cfg.threads = 1;
    cfg.seed = 8;
    run_command("train", cfg);
    EXPECT_EQ(file_bytes(dir / "a.s3nt"), file_bytes(dir / "b.s3nt"));
    EXPECT_EQ(file_bytes(dir / "a.s3nt"), file_bytes(dir / "c.s3nt"));
    EXPECT_NE(file_bytes(dir / "a.s3nt"), file_bytes(dir / "d.s3nt"));
}

TEST(Commands, EvalMatchesTrainingReport) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.mode = Mode::tt_quant;
    cfg.out = dir / "q.s3nt";
    const Report tr = run_command("train", cfg);
    RunConfig ev = tiny_config();
    ev.checkpoint = cfg.out;
    const Report er = run_command("eval", ev);
    EXPECT_EQ(er.number("accuracy"), tr.number("final_eval_accuracy"));
    EXPECT_EQ(er.number("sequences"), 48.0);
    EXPECT_EQ(load_checkpoint(cfg.out).meta.eval_accuracy, er.number("accuracy"));
}

TEST(Commands, TrainOnFeatureFileHoldsOutEveryFifthSequence) {
    TempDir dir;
    RunConfig gen = tiny_config();
    gen.out = dir / "data.s3ft";
    gen.count = 20;
    run_command("gen", gen);
    RunConfig cfg = tiny_config();
    cfg.data = gen.out;
    cfg.epochs = 1;
    cfg.out = dir / "m.s3nt";
    const Report r = run_command("train", cfg);
    EXPECT_EQ(r.number("train_sequences"), 16.0);
    EXPECT_EQ(r.number("eval_sequences"), 4.0);
}

TEST(Commands, CompressAtFullRankIsExact) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.mode = Mode::dense;
    cfg.epochs = 2;
    cfg.out = dir / "dense.s3nt";
    run_command("train", cfg);

    RunConfig cc = tiny_config();
    cc.checkpoint = cfg.out;
    cc.ranks = "full";
    cc.out = dir / "full.s3nt";
    const Report r = run_command("compress", cc);
    const auto& rows = table(r, "matrix");
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& row : rows) {
        EXPECT_LT(row_double(row, "reconstruction_error"), 1e-9);
        EXPECT_LE(row_double(row, "compression_factor"), 1.0);
    }
    EXPECT_LE(std::abs(r.number("accuracy_drop")), 1.0 / 48.0);
    EXPECT_EQ(load_checkpoint(cc.out).model.mode, Mode::tt);

    cc.ranks.clear();
    cc.tolerance = 0.3;
    cc.out = dir / "tol.s3nt";
    const Report t = run_command("compress", cc);
    for (const auto& row : table(t, "matrix")) EXPECT_LE(row_double(row, "reconstruction_error"), 0.3 + 1e-12);

    cc.tolerance.reset();
    cc.ranks = "2";
    cc.out = dir / "r2.s3nt";
    run_command("compress", cc);
    EXPECT_EQ(load_checkpoint(cc.out).model.shape.ranks, (std::vector<std::size_t>{1, 2, 1}));

    cc.checkpoint = cc.out;  // a tt checkpoint is not accepted
    EXPECT_EQ(error_code([&] { run_command("compress", cc); }), Errc::config);
}

TEST(Commands, QuantizeIsIdempotentAndShrinksStorage) {
    TempDir dir;
    RunConfig cfg;
    cfg.epochs = 0;
    cfg.out = dir / "desk_tt.s3nt";
    run_command("train", cfg);

    RunConfig q;
    q.checkpoint = cfg.out;
    q.out = dir / "q1.s3nt";
    const Report r1 = run_command("quantize", q);
    EXPECT_EQ(load_checkpoint(q.out).model.mode, Mode::tt_quant);
    EXPECT_GE(r1.number("storage_reduction"), 100.0);
    EXPECT_LT(r1.number("file_bytes"), r1.number("input_bytes"));

    q.checkpoint = q.out;
    q.out = dir / "q2.s3nt";
    run_command("quantize", q);
    EXPECT_EQ(file_bytes(dir / "q1.s3nt"), file_bytes(dir / "q2.s3nt"));
}

TEST(Commands, BenchCountsMatchFormula) {
    RunConfig cfg = tiny_config();
    cfg.repetitions = 5;
    const Report r = run_command("bench", cfg);
    EXPECT_FALSE(r.failure().has_value());
    EXPECT_EQ(std::get<bool>(*r.find("mac_match")), true);
    EXPECT_EQ(r.number("mac_count"), r.number("macs_per_step") * r.number("steps"));
    EXPECT_EQ(r.number("w_mac_count"), r.number("w_mac_formula"));

    RunConfig large;
    large.preset = "paper-shape";
    large.repetitions = 1;
    const Report p = run_command("bench", large);
    EXPECT_EQ(p.failure(), std::nullopt);
    EXPECT_EQ(p.number("w_mac_count"), 24'084'992.0);
    EXPECT_EQ(p.number("w_dense_mac_count"), 348'160'000.0);
}

TEST(Commands, AblateOrdersStorage) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.epochs = 1;
    cfg.out = dir.path().string();
    const Report r = run_command("ablate", cfg);
    const auto& rows = table(r, "row");
    ASSERT_EQ(rows.size(), 4u);
    std::map<std::string, std::uint64_t> bytes;
    for (const auto& row : rows) {
        const auto mode = std::get<std::string>(row[0].second);
        bytes[mode] = row_u64(row, "storage_bytes");
        EXPECT_EQ(bytes[mode], fs::file_size(dir / ("ablate_" + mode + ".s3nt")));
    }
    EXPECT_LT(bytes["dense_quant"], bytes["dense"]);
    EXPECT_LT(bytes["tt"], bytes["dense"]);
    EXPECT_LT(bytes["tt_quant"], bytes["tt"]);
    EXPECT_LT(bytes["tt_quant"], bytes["dense_quant"]);
}

TEST(Commands, GradcheckReportsPass) {
    RunConfig cfg = tiny_config();
    const Report r = run_command("gradcheck", cfg);
    EXPECT_TRUE(std::get<bool>(*r.find("pass")));
    EXPECT_FALSE(r.failure().has_value());
    EXPECT_LT(r.number("max_rel_error"), 1e-4);
    cfg.mode = Mode::tt_quant;
    EXPECT_EQ(error_code([&] { run_command("gradcheck", cfg); }), Errc::config);
}

TEST(Commands, GenWritesDeterministicFile) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.count = 10;
    cfg.seed = 3;
    cfg.out = dir / "a.s3ft";
    run_command("gen", cfg);
    cfg.out = dir / "b.s3ft";
    const Report r = run_command("gen", cfg);
    EXPECT_EQ(file_bytes(dir / "a.s3ft"), file_bytes(dir / "b.s3ft"));
    EXPECT_EQ(load_sequences(dir / "a.s3ft").sequences.size(), 10u);
    EXPECT_EQ(r.number("file_bytes"), static_cast<double>(fs::file_size(dir / "a.s3ft")));
}

TEST(Commands, StatsAtPaperShape) {
    RunConfig cfg;
    cfg.preset = "paper-shape";
    const Report r = run_command("stats", cfg);
    const auto& rows = table(r, "matrix");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(row_u64(rows[0], "tt_params"), 23'616u);
    EXPECT_EQ(row_u64(rows[0], "tt_macs"), 24'084'992u);
    EXPECT_EQ(r.number("dense_equivalent_bytes"), 5'839'126'544.0);
    EXPECT_GE(r.number("storage_reduction_tt_quant"), 6.9);
}

TEST(Commands, ConfigErrors) {
    auto code_of = [](const std::string& cmd, RunConfig cfg) { return error_code([&] { run_command(cmd, cfg); }); };
    RunConfig c = tiny_config();
    EXPECT_EQ(code_of("fly", c), Errc::config);
    c.preset = "huge";
    EXPECT_EQ(code_of("stats", c), Errc::config);
    c = tiny_config();
    c.ranks = "1,2";
    EXPECT_EQ(code_of("stats", c), Errc::config);
    c = tiny_config();
    c.tolerance = 1.5;
    EXPECT_EQ(code_of("stats", c), Errc::config);
    c = tiny_config();
    c.tolerance = 0.1;
    c.ranks = "2";
    EXPECT_EQ(code_of("stats", c), Errc::config);
    c = tiny_config();
    c.momentum = 1.0;
    EXPECT_EQ(code_of("train", c), Errc::config);
    c = tiny_config();
    c.threads = 0;
    EXPECT_EQ(code_of("train", c), Errc::config);
    EXPECT_EQ(code_of("eval", tiny_config()), Errc::config);
    EXPECT_EQ(code_of("gen", tiny_config()), Errc::config);
}

TEST(Commands, DataErrors) {
    TempDir dir;
    RunConfig c = tiny_config();
    c.data = dir / "missing.s3ft";
    EXPECT_EQ(error_code([&] { run_command("train", c); }), Errc::io);

    RunConfig gen;  // desk-shaped data does not fit the tiny model
    gen.count = 4;
    gen.out = dir / "desk.s3ft";
    run_command("gen", gen);
    c.data = gen.out;
    EXPECT_EQ(error_code([&] { run_command("train", c); }), Errc::shape);

    RunConfig dense;
    dense.preset = "paper-shape";
    dense.mode = Mode::dense;
    EXPECT_EQ(error_code([&] { run_command("bench", dense); }), Errc::capacity);
}

TEST(Commands, JsonReportFile) {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.report = dir / "stats.json";
    const Report r = run_command("stats", cfg);
    std::ifstream in(cfg.report);
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["command"], "stats");
    EXPECT_EQ(j["tt_param_count"].get<double>(), r.number("tt_param_count"));
}
