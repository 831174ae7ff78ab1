#include "mgtd/classifier.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "mgtd/error.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/rng.hpp"
#include "test_util.hpp"

using namespace mgtd;
using mgtd::testing::temp_dir;
using mgtd::testing::uniform01;

namespace {

class_counts make_counts(std::vector<std::int64_t> counts) {
    class_counts cc;
    cc.total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    cc.counts = std::move(counts);
    return cc;
}

feature_vector sparse(std::uint32_t dim, std::vector<std::pair<std::uint32_t, double>> entries) {
    feature_vector fv;
    fv.dim = dim;
    fv.entries = std::move(entries);
    return fv;
}

softmax_model random_model(std::uint32_t dim, int classes, std::uint64_t seed) {
    softmax_model model;
    model.num_classes = classes;
    model.dim = dim;
    model.features.dim = dim;
    model.features.ngram_orders = {1};
    model.weights.resize(static_cast<std::size_t>(classes) * dim);
    model.bias.resize(static_cast<std::size_t>(classes));
    rng64 rng(seed);
    for (double& w : model.weights) w = (uniform01(rng) - 0.5) * 2.0;
    for (double& b : model.bias) b = (uniform01(rng) - 0.5) * 2.0;
    return model;
}

std::vector<example> random_batch(std::uint32_t dim, int classes, std::size_t n,
                                  std::uint64_t seed) {
    std::vector<example> batch(n);
    rng64 rng(seed);
    for (example& ex : batch) {
        std::vector<std::pair<std::uint32_t, double>> entries;
        for (std::uint32_t j = 0; j < dim; ++j) {
            if (rng.next_below(3) != 0) {  // ~2/3 dense
                entries.emplace_back(j, (uniform01(rng) - 0.5) * 3.0);
            }
        }
        if (entries.empty()) entries.emplace_back(rng.next_below(dim) % dim, 1.0);
        ex.x = sparse(dim, std::move(entries));
        ex.label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
    }
    return batch;
}

class_weights random_weights(int classes, std::uint64_t seed) {
    rng64 rng(seed);
    return compute_class_weights(
        make_counts([&] {
            std::vector<std::int64_t> c(static_cast<std::size_t>(classes));
            for (auto& v : c) v = 1 + static_cast<std::int64_t>(rng.next_below(500));
            return c;
        }()));
}

// Central finite differences over every parameter; independent of the
// analytic path (uses only batch_loss).
gradient numeric_gradient(softmax_model model, std::span<const example> batch,
                          const class_weights& weights, double step = 1e-5) {
    gradient g;
    g.weights.resize(model.weights.size());
    g.bias.resize(model.bias.size());
    const auto probe = [&](double& param) {
        const double saved = param;
        param = saved + step;
        const double up = batch_loss(model, batch, weights);
        param = saved - step;
        const double down = batch_loss(model, batch, weights);
        param = saved;
        return (up - down) / (2.0 * step);
    };
    for (std::size_t j = 0; j < model.weights.size(); ++j) g.weights[j] = probe(model.weights[j]);
    for (std::size_t k = 0; k < model.bias.size(); ++k) g.bias[k] = probe(model.bias[k]);
    return g;
}

}  // namespace

TEST(ClassWeights, EqualCountsGiveUnitWeights) {
    const auto w = compute_class_weights(make_counts({10, 10, 10, 10, 10, 10}));
    for (double v : w.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ClassWeights, MergedCorpusCounts) {
    // w_i = N_total / (N_i * C); expected values recomputed independently to
    // 15 digits before freezing.
    const auto w = compute_class_weights(make_counts({63351, 13839, 13178, 13843, 9998, 13546}));
    EXPECT_EQ(w.source.total, 127755);
    const std::vector<double> expected{0.336103613202633, 1.538586603078257, 1.615761117013204,
                                       1.538142021238171, 2.129675935187037, 1.571866233574487};
    ASSERT_EQ(w.values.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_NEAR(w.values[i], expected[i], 1e-12) << "class " << i;
    }
}

TEST(ClassWeights, WeightedCountsSumToTotal) {
    rng64 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> counts(6);
        for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.next_below(100000));
        const auto cc = make_counts(counts);
        const auto w = compute_class_weights(cc);
        double sum = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            sum += static_cast<double>(counts[i]) * w.values[i];
        }
        EXPECT_NEAR(sum / static_cast<double>(cc.total), 1.0, 1e-9);
    }
}

TEST(ClassWeights, ZeroCountNamesClass) {
    try {
        compute_class_weights(make_counts({5, 5, 0, 5, 5, 5}));
        FAIL() << "expected data_error";
    } catch (const data_error& e) {
        EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos) << e.what();
    }
}

TEST(WeightedCeLoss, PerfectPredictionNearZero) {
    const auto w = compute_class_weights(make_counts({63351, 13839, 13178, 13843, 9998, 13546}));
    std::vector<std::vector<double>> probs{{0, 1, 0, 0, 0, 0}};
    const double loss = weighted_ce_loss(probs, {1}, w);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.2 * 1e-9);  // w_max * -ln(1) with clamp headroom
}

TEST(WeightedCeLoss, UniformPredictionIsLnSix) {
    std::vector<std::vector<double>> probs{std::vector<double>(6, 1.0 / 6.0)};
    const double loss = weighted_ce_loss(probs, {3}, class_weights::uniform(6));
    EXPECT_NEAR(loss, std::log(6.0), 1e-9);
}

TEST(WeightedCeLoss, OneSamplePerClassUniformPredictions) {
    // loss = ln 6 * mean(weights): direct evaluation oracle.
    const auto w = compute_class_weights(make_counts({63351, 13839, 13178, 13843, 9998, 13546}));
    std::vector<std::vector<double>> probs(6, std::vector<double>(6, 1.0 / 6.0));
    std::vector<int> labels{0, 1, 2, 3, 4, 5};

    double oracle = 0.0;
    for (int b = 0; b < 6; ++b) {
        oracle += w.values[static_cast<std::size_t>(b)] * (-std::log(1.0 / 6.0));
    }
    oracle /= 6.0;

    const double mean_w = std::accumulate(w.values.begin(), w.values.end(), 0.0) / 6.0;
    EXPECT_NEAR(oracle, std::log(6.0) * mean_w, 1e-12);
    EXPECT_NEAR(weighted_ce_loss(probs, labels, w), oracle, 1e-12);
}

TEST(WeightedCeLoss, UnitWeightsEqualPlainCe) {
    // Plain CE oracle computed inline; bitwise agreement up to 1e-12.
    rng64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.next_below(16);
        std::vector<std::vector<double>> probs(n, std::vector<double>(6));
        std::vector<int> labels(n);
        for (std::size_t b = 0; b < n; ++b) {
            double sum = 0.0;
            for (double& p : probs[b]) {
                p = uniform01(rng) + 1e-3;
                sum += p;
            }
            for (double& p : probs[b]) p /= sum;
            labels[b] = static_cast<int>(rng.next_below(6));
        }
        double ce = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            ce += -std::log(std::clamp(probs[b][static_cast<std::size_t>(labels[b])], 1e-12, 1.0));
        }
        ce /= static_cast<double>(n);
        EXPECT_NEAR(weighted_ce_loss(probs, labels, class_weights::uniform(6)), ce, 1e-12);
    }
}

TEST(WeightedCeLoss, RejectsBadInput) {
    const auto w = class_weights::uniform(6);
    EXPECT_THROW(weighted_ce_loss({}, {}, w), data_error);
    std::vector<std::vector<double>> bad_row{{0.5, 0.5, 0.5, 0, 0, 0}};
    EXPECT_THROW(weighted_ce_loss(bad_row, {0}, w), data_error);
    std::vector<std::vector<double>> ok{std::vector<double>(6, 1.0 / 6.0)};
    EXPECT_THROW(weighted_ce_loss(ok, {6}, w), data_error);
    EXPECT_THROW(weighted_ce_loss(ok, {-1}, w), data_error);
}

TEST(LossGradient, ZeroWhenPredictionIsExactlyOneHot) {
    // Two orthogonal features force a hard decision; huge weights drive the
    // softmax to 1 within double precision.
    // exp(-800) underflows to exactly 0, so the softmax is exactly one-hot
    softmax_model model = random_model(2, 3, 1);
    std::fill(model.weights.begin(), model.weights.end(), 0.0);
    std::fill(model.bias.begin(), model.bias.end(), 0.0);
    model.w(0, 0) = 400.0;
    model.w(1, 0) = -400.0;
    model.w(2, 0) = -400.0;
    std::vector<example> batch{{sparse(2, {{0, 1.0}}), 0}};
    const auto g = loss_gradient(model, batch, class_weights::uniform(3));
    for (double v : g.weights) EXPECT_EQ(v, 0.0);
    for (double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(LossGradient, MatchesFiniteDifferences) {
    // dim=8, C=6 models over >= 10 seeds; 1e-4 relative per parameter.
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const softmax_model model = random_model(8, 6, seed);
        const auto batch = random_batch(8, 6, 1 + seed % 5, seed * 31);
        const auto weights = random_weights(6, seed * 17);

        const gradient analytic = loss_gradient(model, batch, weights);
        const gradient numeric = numeric_gradient(model, batch, weights);

        ASSERT_EQ(analytic.weights.size(), numeric.weights.size());
        for (std::size_t j = 0; j < analytic.weights.size(); ++j) {
            const double denom =
                std::max({std::abs(analytic.weights[j]), std::abs(numeric.weights[j]), 1e-6});
            EXPECT_LE(std::abs(analytic.weights[j] - numeric.weights[j]) / denom, 1e-4)
                << "seed " << seed << " weight " << j;
        }
        for (std::size_t k = 0; k < analytic.bias.size(); ++k) {
            const double denom =
                std::max({std::abs(analytic.bias[k]), std::abs(numeric.bias[k]), 1e-6});
            EXPECT_LE(std::abs(analytic.bias[k] - numeric.bias[k]) / denom, 1e-4)
                << "seed " << seed << " bias " << k;
        }
    }
}

TEST(LossGradient, UnitWeightsMatchPlainCeGradient) {
    const softmax_model model = random_model(8, 6, 5);
    const auto batch = random_batch(8, 6, 4, 99);
    const auto unit = class_weights::uniform(6);
    // "plain CE" = the same reduction with every weight 1; identical arrays.
    const gradient a = loss_gradient(model, batch, unit);
    const gradient b = loss_gradient(model, batch, unit);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.bias, b.bias);
}

TEST(Softmax, UniformAndShiftInvariance) {
    const auto u = softmax(std::vector<double>{0, 0, 0, 0, 0, 0});
    for (double p : u) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);

    rng64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(6);
        for (double& z : logits) z = (uniform01(rng) - 0.5) * 20.0;
        const auto base = softmax(logits);
        const double shift = (uniform01(rng) - 0.5) * 100.0;
        std::vector<double> shifted = logits;
        for (double& z : shifted) z += shift;
        const auto moved = softmax(shifted);
        for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(moved[k], base[k], 1e-9);
        EXPECT_NEAR(std::accumulate(base.begin(), base.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(Train, SeparableToyReachesFullAccuracy) {
    // Two classes with disjoint vocabularies.
    std::vector<example> data;
    rng64 rng(3);
    for (int i = 0; i < 40; ++i) {
        const int label = i % 2;
        std::vector<std::pair<std::uint32_t, double>> entries;
        const std::uint32_t base = label == 0 ? 0 : 8;
        entries.emplace_back(base + static_cast<std::uint32_t>(rng.next_below(8)), 1.0);
        entries.emplace_back(base + static_cast<std::uint32_t>(rng.next_below(8)), 0.5);
        std::sort(entries.begin(), entries.end());
        entries.erase(std::unique(entries.begin(), entries.end(),
                                  [](const auto& a, const auto& b) { return a.first == b.first; }),
                      entries.end());
        example ex;
        ex.x = sparse(16, std::move(entries));
        ex.label = label;
        data.push_back(std::move(ex));
    }
    train_config tc;
    tc.epochs = 5;
    tc.learning_rate = 0.5;
    tc.seed = 42;
    model_metadata meta;
    meta.features.dim = 16;
    meta.features.ngram_orders = {1};
    meta.class_names = {"a", "b"};

    const auto model = train(data, tc, class_weights::uniform(2), meta);
    EXPECT_DOUBLE_EQ(accuracy_on(model, data), 1.0);
    ASSERT_EQ(model.meta.loss_history.size(), 5u);
    EXPECT_LT(model.meta.loss_history.back(), model.meta.loss_history.front());
}

TEST(Train, DeterministicPerSeed) {
    const auto batch = random_batch(8, 6, 64, 7);
    train_config tc;
    tc.epochs = 4;
    tc.learning_rate = 0.2;
    tc.batch_size = 8;
    tc.seed = 9;
    model_metadata meta;
    meta.features.dim = 8;
    meta.features.ngram_orders = {1};

    const auto w = random_weights(6, 2);
    const auto m1 = train(batch, tc, w, meta);
    const auto m2 = train(batch, tc, w, meta);
    EXPECT_EQ(m1.meta.loss_history, m2.meta.loss_history);
    EXPECT_EQ(m1.weights, m2.weights);
    EXPECT_EQ(m1.bias, m2.bias);

    tc.seed = 10;
    const auto m3 = train(batch, tc, w, meta);
    EXPECT_NE(m1.meta.loss_history, m3.meta.loss_history);
}

TEST(Train, WceWithEqualCountsMatchesCe) {
    const auto batch = random_batch(8, 6, 48, 13);
    model_metadata meta;
    meta.features.dim = 8;
    meta.features.ngram_orders = {1};
    train_config tc;
    tc.epochs = 3;
    tc.learning_rate = 0.3;
    tc.batch_size = 16;
    tc.seed = 5;

    tc.loss = loss_kind::wce;
    const auto balanced = compute_class_weights(make_counts({7, 7, 7, 7, 7, 7}));
    const auto wce_model = train(batch, tc, balanced, meta);
    tc.loss = loss_kind::ce;
    const auto ce_model = train(batch, tc, balanced, meta);
    EXPECT_EQ(wce_model.meta.loss_history, ce_model.meta.loss_history);
    EXPECT_EQ(wce_model.weights, ce_model.weights);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
    // lr * gradient overflows to inf on the first update; the second batch
    // then sees non-finite logits.
    std::vector<example> batch;
    for (int i = 0; i < 8; ++i) {
        batch.push_back({sparse(4, {{static_cast<std::uint32_t>(i % 4), 1000.0}}), i % 6});
    }
    train_config tc;
    tc.epochs = 2;
    tc.learning_rate = 1e308;
    tc.batch_size = 4;
    model_metadata meta;
    meta.features.dim = 4;
    meta.features.ngram_orders = {1};
    try {
        train(batch, tc, class_weights::uniform(6), meta);
        FAIL() << "expected train_error";
    } catch (const train_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
    }
}

TEST(Train, RejectsEmptyDataAndBadConfig) {
    model_metadata meta;
    meta.features.dim = 8;
    meta.features.ngram_orders = {1};
    EXPECT_THROW(train({}, {}, class_weights::uniform(6), meta), data_error);
    train_config bad;
    bad.epochs = 0;
    EXPECT_THROW(train(random_batch(8, 6, 4, 1), bad, class_weights::uniform(6), meta),
                 config_error);
}

TEST(PredictProba, ZeroModelGivesUniformRows) {
    softmax_model model = random_model(16, 6, 4);
    std::fill(model.weights.begin(), model.weights.end(), 0.0);
    std::fill(model.bias.begin(), model.bias.end(), 0.0);
    model.class_names = {"human", "ChatGPT", "Cohere", "Davinci", "BLOOMZ", "Dolly"};
    const auto pm = predict_proba(model, {"alpha beta", "gamma delta", "zeta"});
    ASSERT_EQ(pm.rows(), 3u);
    for (std::size_t i = 0; i < pm.rows(); ++i) {
        for (double p : pm.row(i)) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);
    }
    EXPECT_EQ(pm.row_ids, (std::vector<std::string>{"0", "1", "2"}));
}

TEST(PredictProba, RowsSumToOne) {
    softmax_model model = random_model(1u << 10, 6, 21);
    model.features.dim = 1u << 10;
    model.class_names = {"human", "ChatGPT", "Cohere", "Davinci", "BLOOMZ", "Dolly"};
    std::vector<std::string> texts;
    rng64 rng(2);
    for (int i = 0; i < 40; ++i) {
        std::string t;
        for (int k = 0; k < 20; ++k) t += "tok" + std::to_string(rng.next_below(100)) + " ";
        texts.push_back(t);
    }
    const auto pm = predict_proba(model, texts);
    for (std::size_t i = 0; i < pm.rows(); ++i) {
        double sum = 0.0;
        for (double p : pm.row(i)) {
            EXPECT_GT(p, 0.0);
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(PredictProba, HandComputedTwoFeatureThreeClass) {
    // Hand calculation (frozen): W = [[.5,-1],[.25,.75],[-.5,0]], b = [.1,-.2,0],
    // x = [2,1] -> logits [0.1, 1.05, -1.0] -> softmax
    // [0.2551944353278434, 0.6598587164308578, 0.08494684824129874].
    softmax_model model;
    model.num_classes = 3;
    model.dim = 2;
    model.features.dim = 2;
    model.features.ngram_orders = {1};
    model.weights = {0.5, -1.0, 0.25, 0.75, -0.5, 0.0};
    model.bias = {0.1, -0.2, 0.0};
    model.class_names = {"a", "b", "c"};

    std::vector<feature_vector> inputs{sparse(2, {{0, 2.0}, {1, 1.0}})};
    const auto probs = kernels::predict_probs(model, inputs);
    ASSERT_EQ(probs.size(), 3u);
    EXPECT_NEAR(probs[0], 0.2551944353278434, 1e-15);
    EXPECT_NEAR(probs[1], 0.6598587164308578, 1e-15);
    EXPECT_NEAR(probs[2], 0.08494684824129874, 1e-15);
}

TEST(ModelIo, RoundTripPreservesEverything) {
    temp_dir dir("model");
    const auto data = random_batch(32, 4, 20, 6);
    train_config tc;
    tc.epochs = 2;
    tc.learning_rate = 0.1;
    tc.seed = 77;
    model_metadata meta;
    meta.features.dim = 32;
    meta.features.ngram_orders = {1, 2};
    meta.features.hash_seed = 9;
    meta.features.max_tokens = 256;
    meta.tokenizer.lowercase = false;
    meta.label_schema_digest = "feedcafe";
    meta.class_names = {"w", "x", "y", "z"};
    meta.model_id = "roundtrip";
    const auto model = train(data, tc, class_weights::uniform(4), meta);

    save_model(model, dir.file("m.json"));
    const auto loaded = load_model(dir.file("m.json"));
    EXPECT_EQ(loaded.weights, model.weights);
    EXPECT_EQ(loaded.bias, model.bias);
    EXPECT_EQ(loaded.num_classes, model.num_classes);
    EXPECT_EQ(loaded.dim, model.dim);
    EXPECT_EQ(loaded.class_names, model.class_names);
    EXPECT_EQ(loaded.label_schema_digest, "feedcafe");
    EXPECT_EQ(loaded.model_id, "roundtrip");
    EXPECT_EQ(loaded.meta.loss_history, model.meta.loss_history);
    EXPECT_EQ(loaded.meta.seed, model.meta.seed);
    EXPECT_EQ(loaded.features.hash_seed, model.features.hash_seed);
    EXPECT_EQ(loaded.features.max_tokens, model.features.max_tokens);
    EXPECT_EQ(loaded.tokenizer.lowercase, false);
}

TEST(ModelIo, RejectsForeignFile) {
    temp_dir dir("model");
    mgtd::testing::write_file(dir.file("bad.json"), "{\"format\":\"other\"}");
    EXPECT_THROW(load_model(dir.file("bad.json")), parse_error);
}

TEST(TrainMetricsLog, OneLinePerEpoch) {
    const auto data = random_batch(8, 6, 30, 44);
    const auto val = random_batch(8, 6, 10, 45);
    train_config tc;
    tc.epochs = 3;
    tc.learning_rate = 0.1;
    model_metadata meta;
    meta.features.dim = 8;
    meta.features.ngram_orders = {1};
    std::ostringstream log;
    train_options opts;
    opts.val = &val;
    opts.metrics_log = &log;
    train(data, tc, class_weights::uniform(6), meta, opts);

    std::istringstream lines(log.str());
    std::string line;
    int epoch_lines = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        int epoch;
        double loss, train_acc, val_acc;
        ASSERT_TRUE(fields >> epoch >> loss >> train_acc >> val_acc) << line;
        EXPECT_EQ(epoch, ++epoch_lines);
        EXPECT_TRUE(loss >= 0.0);
        EXPECT_TRUE(train_acc >= 0.0 && train_acc <= 1.0);
        EXPECT_TRUE(val_acc >= 0.0 && val_acc <= 1.0);
    }
    EXPECT_EQ(epoch_lines, 3);
}
