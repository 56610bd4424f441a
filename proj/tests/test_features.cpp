// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "s3net/error.hpp"
#include "s3net/features.hpp"
#include "s3net/presets.hpp"
#include "s3net/train.hpp"

using namespace s3net;

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

Detection detection(std::size_t f, std::size_t c, double feature, double score) {
    return Detection{std::vector<double>(f, feature), std::vector<double>(c, score)};
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("s3net_test_features_" + name);
}

// Multinomial logistic regression trained by full-batch gradient descent.
struct Softmax {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;

    void fit(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes, int iterations, double lr) {
        w = Eigen::MatrixXd::Zero(x.cols(), classes);
        b = Eigen::VectorXd::Zero(classes);
        const double n = static_cast<double>(x.rows());
        for (int it = 0; it < iterations; ++it) {
            Eigen::MatrixXd p = (x * w).rowwise() + b.transpose();
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                p.row(r).array() -= p.row(r).maxCoeff();
                p.row(r) = p.row(r).array().exp();
                p.row(r) /= p.row(r).sum();
                p(r, y[static_cast<std::size_t>(r)]) -= 1.0;
            }
            w -= lr * (x.transpose() * p) / n;
            b -= lr * p.colwise().sum().transpose() / n;
        }
    }
    double accuracy(const Eigen::MatrixXd& x, const std::vector<int>& y) const {
        const Eigen::MatrixXd s = (x * w).rowwise() + b.transpose();
        std::size_t ok = 0;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            Eigen::Index best;
            s.row(r).maxCoeff(&best);
            ok += best == y[static_cast<std::size_t>(r)];
        }
        return static_cast<double>(ok) / static_cast<double>(s.rows());
    }
};

void frame_matrix(const std::vector<FeatureSequence>& seqs, Eigen::MatrixXd& x, std::vector<int>& y) {
    std::size_t rows = 0;
    for (const auto& s : seqs) rows += s.frames.size();
    const std::size_t m = seqs.front().dims().flat_size();
    x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
    y.clear();
    Eigen::Index r = 0;
    for (const auto& s : seqs)
        for (const auto& fr : s.frames) {
            for (std::size_t i = 0; i < m; ++i) x(r, static_cast<Eigen::Index>(i)) = fr.tensor[i];
            y.push_back(s.label);
            ++r;
        }
}

void pooled_matrix(const std::vector<FeatureSequence>& seqs, Eigen::MatrixXd& x, std::vector<int>& y) {
    const std::size_t m = seqs.front().dims().flat_size();
    x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(seqs.size()), static_cast<Eigen::Index>(m));
    y.clear();
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        for (const auto& fr : seqs[n].frames)
            for (std::size_t i = 0; i < m; ++i)
                x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) +=
                    fr.tensor[i] / static_cast<double>(seqs[n].frames.size());
        y.push_back(seqs[n].label);
    }
}

}  // namespace

// --- structure_frame -------------------------------------------------------------

TEST(StructureFrame, NoDetectionsIsSkipped) {
    EXPECT_FALSE(structure_frame({}, {25, 4, 2}, 0).has_value());
}

TEST(StructureFrame, SingleDetectionPadsWithZeros) {
    const std::vector<Detection> dets{detection(4, 2, 0.5, 0.8)};
    const auto fr = structure_frame(dets, {25, 4, 2}, 3);
    ASSERT_TRUE(fr.has_value());
    EXPECT_EQ(fr->subscene_count, 1);
    EXPECT_EQ(fr->frame_index, 3u);
    EXPECT_EQ(fr->tensor.shape(), (Shape{25, 4, 2}));
    for (std::size_t e = 0; e < fr->tensor.size(); ++e) EXPECT_EQ(fr->tensor[e], e < 8 ? 0.5 * 0.8 : 0.0);
}

TEST(StructureFrame, LayoutIsSubsceneFeatureScore) {
    const std::vector<Detection> dets{{{0.1, 0.2, 0.3}, {0.5, 1.0}}, {{0.4, 0.6, 0.8}, {0.25, 0.75}}};
    const auto fr = structure_frame(dets, {3, 3, 2}, 0);
    ASSERT_TRUE(fr.has_value());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 2; ++k) {
                const std::size_t idx[] = {i, j, k};
                EXPECT_EQ(fr->tensor.at(idx), dets[i].features[j] * dets[i].scores[k]);
            }
}

TEST(StructureFrame, OverCapTruncatesByConfidence) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Detection> dets;
    for (int i = 0; i < 26; ++i) dets.push_back(Detection{{u(gen), u(gen)}, {u(gen), u(gen), u(gen)}});
    dets[7].scores = dets[3].scores;  // a confidence tie

    EXPECT_EQ(error_code([&] { structure_frame(dets, {25, 2, 3}, 0); }), Errc::capacity);

    // Oracle: stable sort by descending confidence, keep 25, restore detection order.
    std::vector<std::size_t> idx(26);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return *std::max_element(dets[a].scores.begin(), dets[a].scores.end()) >
               *std::max_element(dets[b].scores.begin(), dets[b].scores.end());
    });
    idx.resize(25);
    std::sort(idx.begin(), idx.end());

    const auto kept = truncate_by_confidence(dets, 25);
    ASSERT_EQ(kept.size(), 25u);
    for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(kept[i].features, dets[idx[i]].features);
    const auto fr = structure_frame(kept, {25, 2, 3}, 0);
    ASSERT_TRUE(fr.has_value());
    EXPECT_EQ(fr->subscene_count, 25);
}

TEST(StructureFrame, RejectsOutOfRangeScores) {
    const std::vector<Detection> dets{detection(2, 2, 0.5, 1.5)};
    EXPECT_EQ(error_code([&] { structure_frame(dets, {2, 2, 2}, 0); }), Errc::domain);
    const std::vector<Detection> wrong{detection(3, 2, 0.5, 0.5)};
    EXPECT_EQ(error_code([&] { structure_frame(wrong, {2, 2, 2}, 0); }), Errc::shape);
}

// --- factorize_dims --------------------------------------------------------------

TEST(FactorizeDims, PaperShapeAnchor) {
    const std::size_t axes[] = {25, 425, 8};
    const auto f = factorize_dims(axes, 4);
    EXPECT_EQ(f.factors, (Shape{25, 25, 17, 8}));
    EXPECT_EQ(f.flat_size, 85000u);
    EXPECT_FALSE(f.degraded);
}

TEST(FactorizeDims, AlreadyFactored) {
    const std::size_t axes[] = {4, 4, 4};
    EXPECT_EQ(factorize_dims(axes, 3).factors, (Shape{4, 4, 4}));
}

TEST(FactorizeDims, BruteForceMinimalMaxFactor) {
    const std::size_t axes[] = {6, 35, 1};
    std::vector<Shape> all;
    Shape prefix;
    oracle::factorizations(210, 4, prefix, all);
    std::size_t best = SIZE_MAX;
    for (const auto& f : all) best = std::min(best, *std::max_element(f.begin(), f.end()));
    Shape expect;
    for (const auto& f : all)
        if (*std::max_element(f.begin(), f.end()) == best && (expect.empty() || f < expect)) expect = f;
    EXPECT_EQ(expect, (Shape{2, 3, 5, 7}));
    EXPECT_EQ(factorize_dims(axes, 4).factors, expect);
}

TEST(FactorizeDims, ProductAlwaysPreserved) {
    std::mt19937_64 gen(9);
    std::uniform_int_distribution<std::size_t> axis(1, 40), order(1, 5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t axes[] = {axis(gen), axis(gen), axis(gen)};
        const std::size_t d = order(gen);
        const auto f = factorize_dims(axes, d);
        EXPECT_EQ(f.factors.size(), d);
        EXPECT_EQ(oracle::product(f.factors), axes[0] * axes[1] * axes[2]);
        std::vector<Shape> all;
        Shape prefix;
        oracle::factorizations(axes[0] * axes[1] * axes[2], d, prefix, all);
        EXPECT_EQ(f.degraded, all.empty());
        if (!all.empty()) {
            std::size_t best = SIZE_MAX;
            for (const auto& g : all) best = std::min(best, *std::max_element(g.begin(), g.end()));
            EXPECT_EQ(*std::max_element(f.factors.begin(), f.factors.end()), best);
        }
    }
}

TEST(FactorizeDims, PrimeIsDegraded) {
    const std::size_t axes[] = {7, 1, 1};
    const auto f = factorize_dims(axes, 2);
    EXPECT_TRUE(f.degraded);
    EXPECT_EQ(oracle::product(f.factors), 7u);
}

// --- feature files --------------------------------------------------------------

TEST(FeatureFile, RoundTripIsBitExact) {
    const auto seqs = generate_synthetic({3, {4, 3, 2}, 10, 9, 5});
    const FrameDims dims{4, 3, 2};
    const auto bytes = encode_sequences(seqs, dims);
    const auto decoded = decode_sequences(bytes);
    EXPECT_EQ(decoded.dims, dims);
    ASSERT_EQ(decoded.sequences.size(), seqs.size());
    for (std::size_t n = 0; n < seqs.size(); ++n) {
        EXPECT_EQ(decoded.sequences[n].label, seqs[n].label);
        EXPECT_EQ(decoded.sequences[n].frames, seqs[n].frames);
    }
    EXPECT_EQ(encode_sequences(decoded.sequences, dims), bytes);

    const auto path = temp_file("roundtrip.s3ft");
    save_sequences(path, seqs, dims);
    const auto loaded = load_sequences(path);
    EXPECT_EQ(encode_sequences(loaded.sequences, dims), bytes);
    std::filesystem::remove(path);
}

TEST(FeatureFile, EmptyPayload) {
    const auto bytes = encode_sequences({}, {2, 2, 2});
    const auto decoded = decode_sequences(bytes);
    EXPECT_TRUE(decoded.sequences.empty());
    EXPECT_EQ(decoded.dims, (FrameDims{2, 2, 2}));
}

TEST(FeatureFile, CorruptionsHaveDistinctCodes) {
    const FrameDims dims{2, 2, 2};
    const auto seqs = generate_synthetic({2, dims, 8, 2, 3});
    const auto good = encode_sequences(seqs, dims);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(error_code([&] { decode_sequences(bad_magic); }), Errc::format);

    auto bad_version = good;
    bad_version[4] = 9;
    EXPECT_EQ(error_code([&] { decode_sequences(bad_version); }), Errc::version);

    const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 3);
    EXPECT_EQ(error_code([&] { decode_sequences(truncated); }), Errc::format);

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_EQ(error_code([&] { decode_sequences(trailing); }), Errc::format);

    // First float of the first frame: header 16 + label 2 + T 4 + index 4 + count 2.
    auto nan = good;
    const std::uint8_t qnan[] = {0x00, 0x00, 0xC0, 0x7F};
    std::copy(std::begin(qnan), std::end(qnan), nan.begin() + 28);
    EXPECT_EQ(error_code([&] { decode_sequences(nan); }), Errc::domain);

    auto out_of_range = good;
    const std::uint8_t two[] = {0x00, 0x00, 0x00, 0x40};
    std::copy(std::begin(two), std::end(two), out_of_range.begin() + 28);
    EXPECT_EQ(error_code([&] { decode_sequences(out_of_range); }), Errc::data);
}

TEST(FeatureFile, SubsceneCapNeedsOverride) {
    const FrameDims dims{26, 1, 1};
    FeatureSequence seq;
    seq.frames.push_back({DenseTensor({26, 1, 1}), 0, 1});
    seq.frames[0].tensor[0] = 0.5;
    const auto bytes = encode_sequences(std::span(&seq, 1), dims);
    EXPECT_EQ(error_code([&] { decode_sequences(bytes); }), Errc::capacity);
    EXPECT_EQ(decode_sequences(bytes, {.allow_oversize = true}).sequences.size(), 1u);
}

TEST(FeatureFile, RejectsNonIncreasingIndicesAndZeroFrames) {
    const FrameDims dims{1, 1, 1};
    FeatureSequence seq;
    seq.frames.push_back({DenseTensor({1, 1, 1}, {0.5}), 4, 1});
    seq.frames.push_back({DenseTensor({1, 1, 1}, {0.5}), 4, 1});
    EXPECT_EQ(error_code([&] { validate_sequence(seq, dims); }), Errc::data);
    seq.frames[1].frame_index = 9;  // gaps are fine
    validate_sequence(seq, dims);
    seq.frames[1].tensor[0] = 0.0;
    EXPECT_EQ(error_code([&] { validate_sequence(seq, dims); }), Errc::data);
}

// --- synthetic generator --------------------------------------------------------

TEST(Generator, DeterministicForFixedSeed) {
    const SyntheticSpec spec{4, {5, 17, 4}, 16, 32, 11};
    const FrameDims dims = spec.dims;
    EXPECT_EQ(encode_sequences(generate_synthetic(spec), dims), encode_sequences(generate_synthetic(spec), dims));
    SyntheticSpec other = spec;
    other.seed = 12;
    EXPECT_NE(encode_sequences(generate_synthetic(other), dims), encode_sequences(generate_synthetic(spec), dims));
}

TEST(Generator, SequencesSatisfyInvariants) {
    const SyntheticSpec spec{4, {5, 17, 4}, 16, 64, 2};
    std::array<int, 4> per_class{};
    for (const auto& s : generate_synthetic(spec)) {
        validate_sequence(s, spec.dims);
        EXPECT_EQ(s.provenance, Provenance::synthetic);
        ++per_class[s.label];
    }
    for (int n : per_class) EXPECT_EQ(n, 16);
}

// Classes 2k and 2k+1 show the same two events in opposite order. The time at
// which each event's confidence channel peaks separates them by a fixed margin.
TEST(Generator, EventOrderMargin) {
    constexpr double kMarginFrames = 4.0;
    const SyntheticSpec spec{4, {5, 17, 4}, 16, 1000, 21};
    const auto seqs = generate_synthetic(spec);
    const std::size_t f = spec.dims.f, c = spec.dims.c;
    auto peak_time = [&](const FeatureSequence& s, std::size_t channel) {
        double best = -1.0;
        std::uint32_t when = 0;
        for (const auto& fr : s.frames)
            for (std::size_t j = 0; j < f; ++j)
                if (fr.tensor[j * c + channel] > best) best = fr.tensor[j * c + channel], when = fr.frame_index;
        return static_cast<double>(when);
    };
    for (std::size_t pair = 0; pair < 2; ++pair) {
        double lag[2] = {0.0, 0.0};
        int n[2] = {0, 0};
        for (const auto& s : seqs) {
            if (s.label / 2 != pair) continue;
            const std::size_t o = s.label % 2;
            lag[o] += peak_time(s, 2 * pair + 1) - peak_time(s, 2 * pair);
            ++n[o];
        }
        const double forward = lag[0] / n[0], reverse = lag[1] / n[1];
        EXPECT_GE(forward - reverse, 2 * kMarginFrames) << "pair " << pair;
        EXPECT_GT(forward, kMarginFrames);
        EXPECT_LT(reverse, -kMarginFrames);
    }
}

TEST(Generator, SingleFrameAndOrderFreeClassifiersStayBelowSixtyPercent) {
    const Preset p = find_preset("desk");
    const auto train_set = generate_synthetic(p.train_data);
    const auto eval_set = generate_synthetic(p.eval_data);

    Eigen::MatrixXd xtr, xev;
    std::vector<int> ytr, yev;
    frame_matrix(train_set, xtr, ytr);
    frame_matrix(eval_set, xev, yev);
    Softmax per_frame;
    per_frame.fit(xtr, ytr, 4, 300, 2.0);
    const double frame_acc = per_frame.accuracy(xev, yev);
    EXPECT_LT(frame_acc, 0.60);

    pooled_matrix(train_set, xtr, ytr);
    pooled_matrix(eval_set, xev, yev);
    Softmax pooled;
    pooled.fit(xtr, ytr, 4, 2000, 5.0);
    EXPECT_GT(pooled.accuracy(xtr, ytr), 0.45);  // learns the event pair
    EXPECT_LT(pooled.accuracy(xev, yev), 0.60);
}

// Dense LSTM oracle: learns the task, then fails once frame order is destroyed.
TEST(Generator, DenseOracleLearnsAndShufflingDestroysSignal) {
    Preset p = find_preset("desk");
    const auto train_set = generate_synthetic(p.train_data);
    const auto eval_set = generate_synthetic(p.eval_data);
    TrainConfig cfg = p.train;
    cfg.epochs = 8;
    const Model init = init_model(p.shape, Mode::dense, cfg.seed);
    const TrainResult r = train(init, train_set, eval_set, cfg);
    const double acc = evaluate(r.model, eval_set).accuracy();
    EXPECT_GE(acc, 0.95);

    std::mt19937_64 gen(99);
    auto shuffled = eval_set;
    for (auto& s : shuffled) {
        std::vector<std::uint32_t> idx;
        for (const auto& fr : s.frames) idx.push_back(fr.frame_index);
        std::shuffle(s.frames.begin(), s.frames.end(), gen);
        for (std::size_t t = 0; t < idx.size(); ++t) s.frames[t].frame_index = idx[t];
    }
    EXPECT_LT(evaluate(r.model, shuffled).accuracy(), 0.70);
}
