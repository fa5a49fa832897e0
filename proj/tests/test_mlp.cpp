#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mute/baselines.hpp"
#include "mute/mlp.hpp"
#include "oracles.hpp"

using namespace mute;

namespace {

std::vector<double> flatten(const MlpModel& m) {
    std::vector<double> flat;
    for (const auto& w : m.weights()) flat.insert(flat.end(), w.begin(), w.end());
    for (const auto& b : m.biases()) flat.insert(flat.end(), b.begin(), b.end());
    return flat;
}

MlpModel unflatten(const MlpModel& shape, const std::vector<double>& flat) {
    MlpModel m = shape;
    std::size_t pos = 0;
    for (auto& w : m.weights())
        for (auto& v : w) v = flat[pos++];
    for (auto& b : m.biases())
        for (auto& v : b) v = flat[pos++];
    return m;
}

std::vector<double> random_input(int dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = unit(rng);
    return x;
}

Codeword random_target(int bits, std::mt19937_64& rng) {
    Codeword c(bits);
    for (int i = 0; i < bits; ++i) c.set(i, rng() & 1);
    return c;
}

/// Max relative error between backprop and central finite differences over
/// all parameters of a random model. Shared with the acceptance suite's
/// gradient criterion.
double parameter_gradient_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> layers{2 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 4),
                            2 + static_cast<int>(rng() % 3)};
    auto model = MlpModel::glorot_init(layers, rng());
    auto x = random_input(layers.front(), rng);
    auto target = random_target(layers.back(), rng);

    auto g = bce_gradients(model, x, target);
    std::vector<double> analytic;
    for (const auto& w : g.weights) analytic.insert(analytic.end(), w.begin(), w.end());
    for (const auto& b : g.biases) analytic.insert(analytic.end(), b.begin(), b.end());

    auto f = [&](const std::vector<double>& params) {
        return bce_loss(forward(unflatten(model, params), x), target);
    };
    auto numeric = oracle::fd_gradient(f, flatten(model));
    return oracle::max_relative_error(analytic, numeric);
}

} // namespace

TEST(Forward, ZeroModelOutputsHalf) {
    auto m = MlpModel::from_parts({3, 2}, {{0, 0, 0, 0, 0, 0}}, {{0, 0}});
    auto probs = forward(m, std::vector<double>{0.3, 0.9, 0.1});
    ASSERT_EQ(probs.size(), 2u);
    EXPECT_DOUBLE_EQ(probs[0], 0.5);
    EXPECT_DOUBLE_EQ(probs[1], 0.5);
}

TEST(Forward, OutputsStayInsideUnitInterval) {
    std::mt19937_64 rng(5);
    auto m = MlpModel::glorot_init({4, 6, 3}, 8);
    for (int trial = 0; trial < 50; ++trial) {
        auto probs = forward(m, random_input(4, rng));
        for (double p : probs) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    }
}

TEST(Forward, RejectsBadInput) {
    auto m = MlpModel::glorot_init({4, 3}, 1);
    EXPECT_THROW(forward(m, std::vector<double>{1.0, 2.0}), std::invalid_argument);
    EXPECT_THROW(forward(m, std::vector<double>{1.0, 2.0, std::nan(""), 0.0}), std::invalid_argument);
}

TEST(BceLoss, KnownValues) {
    Codeword target = Codeword::from_string("110");
    EXPECT_LT(bce_loss(std::vector<double>{1.0, 1.0, 0.0}, target), 1e-6);
    EXPECT_NEAR(bce_loss(std::vector<double>{0.5, 0.5, 0.5}, target), std::log(2.0), 1e-12);
    // mean of -log 0.9, -log 0.8, -log 0.8
    double expected = -(std::log(0.9) + std::log(0.8) + std::log(0.8)) / 3.0;
    EXPECT_NEAR(expected, 0.1839, 1e-4);
    EXPECT_DOUBLE_EQ(bce_loss(std::vector<double>{0.9, 0.8, 0.2}, target), expected);
}

TEST(BceLoss, WidthMismatchThrows) {
    EXPECT_THROW(bce_loss(std::vector<double>{0.5, 0.5}, Codeword::from_string("110")),
                 std::invalid_argument);
}

TEST(Gradients, MatchFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        EXPECT_LT(parameter_gradient_error(seed), 1e-4) << "seed " << seed;
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
    auto ds = make_blobs(2, 3, 10, 0.2, 4);
    auto model = MlpModel::glorot_init({3, 4, 2}, 11);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 1;
    cfg.seed = 2;
    auto r = train(model, ds, one_hot(2), cfg);
    EXPECT_EQ(r.model, model);
}

TEST(Train, ZeroRateLossIsConstantAcrossEpochs) {
    auto ds = make_blobs(3, 4, 12, 0.15, 6);
    auto model = MlpModel::glorot_init({4, 5, 3}, 13);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 4;
    cfg.seed = 3;
    auto r = train(model, ds, one_hot(3), cfg);
    ASSERT_EQ(r.epoch_mean_loss.size(), 4u);
    for (double l : r.epoch_mean_loss) EXPECT_DOUBLE_EQ(l, r.epoch_mean_loss[0]);
}

TEST(Train, FitsSeparableBlobs) {
    auto ds = make_blobs(2, 2, 40, 0.04, 20);
    auto model = MlpModel::glorot_init({2, 8, 2}, 22);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 16;
    cfg.seed = 23;
    auto r = train(model, ds, one_hot(2), cfg);
    EXPECT_DOUBLE_EQ(evaluate(r.model, ds, one_hot(2)).accuracy, 1.0);
    // loss should have dropped substantially on separable data
    EXPECT_LT(r.epoch_mean_loss.back(), 0.5 * r.epoch_mean_loss.front());
}

TEST(Train, DeterministicGivenSeed) {
    auto ds = make_blobs(3, 4, 20, 0.15, 30);
    auto model = MlpModel::glorot_init({4, 6, 3}, 31);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 32;
    auto a = train(model, ds, one_hot(3), cfg);
    auto b = train(model, ds, one_hot(3), cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.epoch_mean_loss, b.epoch_mean_loss);
}

TEST(Train, DimensionMismatchesThrow) {
    auto ds = make_blobs(3, 4, 10, 0.1, 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train(MlpModel::glorot_init({4, 4}, 1), ds, one_hot(4), cfg),
                 std::invalid_argument); // codebook classes != dataset classes
    EXPECT_THROW(train(MlpModel::glorot_init({4, 4}, 1), ds, one_hot(3), cfg),
                 std::invalid_argument); // output width != n_bits
    EXPECT_THROW(train(MlpModel::glorot_init({5, 3}, 1), ds, one_hot(3), cfg),
                 std::invalid_argument); // input width != feature dim
}

TEST(Decode, ExactCodewordProbabilitiesDecodeToTheirClass) {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        auto cb = random_k_hot(6, 9, 4, rng());
        for (int cls = 0; cls < 6; ++cls) {
            std::vector<double> probs(9);
            for (int b = 0; b < 9; ++b) probs[b] = cb.codes[cls].test(b) ? 1.0 : 0.0;
            EXPECT_EQ(decode(probs, cb), cls);
            EXPECT_EQ(decode(probs, cb, DecodeRule::hamming), cls);
        }
    }
}

TEST(Decode, BceScoresPickClassZeroInHandExample) {
    Codebook cb;
    cb.n_classes = 2;
    cb.n_bits = 3;
    cb.codes = {Codeword::from_string("110"), Codeword::from_string("011")};
    std::vector<double> probs{0.9, 0.8, 0.2};
    // un-meaned BCE totals: 0.551 vs 4.135
    double total0 = 3.0 * bce_loss(probs, cb.codes[0]);
    double total1 = 3.0 * bce_loss(probs, cb.codes[1]);
    EXPECT_NEAR(total0, 0.551, 1e-3);
    EXPECT_NEAR(total1, 4.135, 1e-3);
    EXPECT_EQ(decode(probs, cb), 0);
}

TEST(Decode, AllHalfTieBreaksToLowestClass) {
    auto cb = random_k_hot(5, 8, 3, 3);
    std::vector<double> probs(8, 0.5);
    EXPECT_EQ(decode(probs, cb), 0);
}

TEST(Decode, PermutationEquivariant) {
    std::mt19937_64 rng(55);
    auto cb = random_k_hot(5, 8, 3, 77);
    std::vector<int> perm{2, 0, 4, 1, 3}; // permuted[i] = original[perm[i]]
    Codebook permuted = cb;
    for (int i = 0; i < 5; ++i) permuted.codes[i] = cb.codes[perm[i]];
    for (int trial = 0; trial < 40; ++trial) {
        auto probs = random_input(8, rng);
        int original = decode(probs, cb);
        int mapped = decode(probs, permuted);
        EXPECT_EQ(permuted.codes[mapped], cb.codes[original]);
    }
}

TEST(Decode, WidthMismatchThrows) {
    auto cb = random_k_hot(4, 6, 2, 1);
    EXPECT_THROW(decode(std::vector<double>{0.5, 0.5}, cb), std::invalid_argument);
}

TEST(Evaluate, AccuracyEqualsConfusionTrace) {
    auto ds = make_blobs(3, 4, 30, 0.25, 60);
    auto model = MlpModel::glorot_init({4, 5, 3}, 61);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 62;
    auto trained = train(model, ds, one_hot(3), cfg).model;
    auto ev = evaluate(trained, ds, one_hot(3));
    std::int64_t trace = 0;
    for (int i = 0; i < 3; ++i) trace += ev.confusion.at(i, i);
    EXPECT_DOUBLE_EQ(ev.accuracy, static_cast<double>(trace) / ds.size());
    EXPECT_EQ(ev.confusion.total(), ds.size());
}

TEST(Evaluate, ConstantModelOnBalancedDataScoresOneOverN) {
    auto ds = make_blobs(4, 3, 25, 0.2, 70);
    auto m = MlpModel::from_parts({3, 4}, {std::vector<double>(12, 0.0)},
                                  {std::vector<double>(4, 0.0)});
    auto ev = evaluate(m, ds, one_hot(4));
    EXPECT_DOUBLE_EQ(ev.accuracy, 0.25); // every sample ties to class 0
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(ev.confusion.at(i, 0), 25);
        EXPECT_EQ(ev.confusion.row_total(i), 25);
    }
}

TEST(EstimateConfusion, RowSumsMatchClassCounts) {
    auto ds = make_blobs(3, 4, 20, 0.3, 80);
    auto model = MlpModel::glorot_init({4, 4, 3}, 81);
    auto cm = estimate_confusion(model, ds);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(cm.row_total(i), 20);
    EXPECT_THROW(estimate_confusion(MlpModel::glorot_init({4, 5}, 1), ds), std::invalid_argument);
}

TEST(EstimateConfusion, PerfectModelGivesDiagonalMatrix) {
    auto ds = make_blobs(2, 2, 40, 0.04, 20);
    auto model = MlpModel::glorot_init({2, 8, 2}, 22);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 16;
    cfg.seed = 23;
    auto trained = train(model, ds, one_hot(2), cfg).model;
    auto cm = estimate_confusion(trained, ds);
    EXPECT_EQ(cm.at(0, 0), 40);
    EXPECT_EQ(cm.at(1, 1), 40);
    EXPECT_EQ(cm.at(0, 1), 0);
    EXPECT_EQ(cm.at(1, 0), 0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    auto m = MlpModel::glorot_init({5, 7, 4}, 90);
    EXPECT_EQ(parse_model(serialize_model(m)), m);
}

TEST(Checkpoint, ParseRejectsBadShapesAndValues) {
    EXPECT_THROW(parse_model("{"), parse_error);
    EXPECT_THROW(parse_model(R"({"layer_sizes":[2,2],"weights":[[1,2,3]],"biases":[[0,0]]})"),
                 parse_error);
    EXPECT_THROW(parse_model(R"({"layer_sizes":[2,2],"weights":[[1,2,3,4]],"biases":[[0]]})"),
                 parse_error);
}

TEST(TraceCsv, FooterCarriesFinalAccuracy) {
    auto csv = trace_to_csv({0.7, 0.5, 0.3}, 0.975);
    EXPECT_NE(csv.find("epoch,mean_loss\n"), std::string::npos);
    EXPECT_NE(csv.find("2,0.3\n"), std::string::npos);
    EXPECT_NE(csv.find("# final_train_accuracy 0.975"), std::string::npos);
}
