#include <gtest/gtest.h>

#include <cmath>

#include "edgefit/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace edgefit;

namespace {

ModelConfig width(std::size_t c) {
    ModelConfig cfg;
    cfg.width = c;
    return cfg;
}

std::vector<const Window*> ptrs(const std::vector<Window>& ws) {
    std::vector<const Window*> out;
    for (const auto& w : ws) out.push_back(&w);
    return out;
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
    std::vector<float> va, vb;
    a.for_each_tensor([&](const Tensor& t) { va.insert(va.end(), t.data().begin(), t.data().end()); });
    b.for_each_tensor([&](const Tensor& t) { vb.insert(vb.end(), t.data().begin(), t.data().end()); });
    double d = 0;
    for (std::size_t i = 0; i < va.size(); ++i) d = std::max(d, static_cast<double>(std::abs(va[i] - vb[i])));
    return d;
}

}  // namespace

TEST(WeightedCrossEntropy, ClosedForms) {
    Tensor onehot({12});
    onehot[4] = 1.0f;
    EXPECT_DOUBLE_EQ(weighted_cross_entropy(onehot, 4, 1.0), 0.0);
    const Tensor uniform = Tensor::filled({12}, 1.0f / 12.0f);
    EXPECT_NEAR(weighted_cross_entropy(uniform, 0, 1.0), std::log(12.0), 1e-6);
    EXPECT_NEAR(weighted_cross_entropy(uniform, 3, 2.0), 2.0 * weighted_cross_entropy(uniform, 3, 1.0), 1e-12);
    EXPECT_NEAR(weighted_cross_entropy(Tensor({12}), 0, 1.0), -std::log(1e-12), 1e-9);
}

TEST(Backward, MatchesFiniteDifferences) {
    ModelParams m = build(width(4), 21);
    testkit::randomize_bn(m, 22);
    const auto batch = testkit::random_windows(2, 23);
    for (const auto& e : testkit::gradient_check(m, ptrs(batch))) {
        EXPECT_LT(e.max_rel_error, 1e-3) << e.name;
        EXPECT_EQ(e.unresolved, 0u) << e.name;
    }
}

TEST(Backward, DuplicatingTheBatchLeavesGradientsUnchanged) {
    const ModelParams m = build(width(4), 24);
    auto batch = testkit::random_windows(3, 25);
    const BackwardResult once = backward(m, std::span<const Window>(batch));
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    const BackwardResult twice = backward(m, std::span<const Window>(doubled));
    EXPECT_NEAR(once.loss, twice.loss, 1e-6);
    EXPECT_LT(max_abs_diff(once.grads, twice.grads), 1e-5);
}

TEST(Backward, ZeroWeightsGiveZeroGradient) {
    const ModelParams m = build(width(4), 26);
    auto batch = testkit::random_windows(3, 27);
    for (auto& w : batch) w.weight = 0.0f;
    const BackwardResult r = backward(m, std::span<const Window>(batch));
    EXPECT_EQ(r.loss, 0.0);
    r.grads.for_each_tensor([](const Tensor& t) {
        for (float v : t.data()) EXPECT_EQ(v, 0.0f);
    });
}

TEST(Backward, LossAgreesWithBatchLoss) {
    const ModelParams m = build(width(4), 28);
    const auto batch = testkit::random_windows(4, 29);
    EXPECT_NEAR(backward(m, std::span<const Window>(batch)).loss, batch_loss(m, ptrs(batch)), 1e-9);
    EXPECT_THROW(backward(m, std::span<const Window>()), Error);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    const ModelParams p0 = build(width(2), 30);
    ModelParams p = p0;
    ModelParams g = zeros_like(p);
    g.stem.weight[0] = 0.3f;
    g.stem.weight[1] = -1e-4f;
    g.head_bias[5] = 250.0f;
    AdamState s = AdamState::zeros_like(p);
    Hyperparams hp;
    hp.adam_eps = 0.0;
    adam_step(p, g, s, hp);
    EXPECT_EQ(s.step, 1u);
    EXPECT_NEAR(p.stem.weight[0] - p0.stem.weight[0], -0.001, 1e-7);
    EXPECT_NEAR(p.stem.weight[1] - p0.stem.weight[1], 0.001, 1e-7);
    EXPECT_NEAR(p.head_bias[5] - p0.head_bias[5], -0.001, 1e-7);
}

TEST(Adam, ZeroGradientIsStationary) {
    const ModelParams p0 = build(width(2), 31);
    ModelParams p = p0;
    AdamState s = AdamState::zeros_like(p);
    adam_step(p, zeros_like(p), s, Hyperparams{});
    adam_step(p, zeros_like(p), s, Hyperparams{});
    EXPECT_EQ(p, p0);
    EXPECT_EQ(s.step, 2u);
    s.v.for_each_tensor([](const Tensor& t) {
        for (float v : t.data()) EXPECT_GE(v, 0.0f);
    });
}

TEST(Adam, ShapeMismatch) {
    ModelParams p = build(width(2), 32);
    AdamState s = AdamState::zeros_like(p);
    EXPECT_THROW(adam_step(p, zeros_like(build(width(3), 0)), s, Hyperparams{}), Error);
}

TEST(Evaluate, PerfectAndConstantPredictors) {
    std::vector<Window> ws(10);
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i].label = i % 2 ? 3 : 7;
    const Metrics perfect = evaluate_with(ws, [](const Window& w) {
        Tensor z({12});
        z[static_cast<std::size_t>(w.label)] = 5.0f;
        return z;
    });
    EXPECT_DOUBLE_EQ(perfect.balanced_accuracy, 1.0);
    const Metrics constant = evaluate_with(ws, [](const Window&) {
        Tensor z({12});
        z[3] = 1.0f;
        return z;
    });
    EXPECT_DOUBLE_EQ(constant.balanced_accuracy, 0.5);
    EXPECT_EQ(constant.confusion[7][3], 5u);
    EXPECT_EQ(constant.confusion[3][3], 5u);
    EXPECT_THROW(evaluate_with(std::span<const Window>(), [](const Window&) { return Tensor({12}); }), Error);
}

TEST(Evaluate, BalancedAccuracyFormulaAndRowSums) {
    const ModelParams m = build(width(4), 33);
    const auto ws = testkit::random_windows(60, 34);
    const Metrics r = evaluate(m, ws);
    std::array<std::size_t, 12> truth{};
    for (const auto& w : ws) ++truth[static_cast<std::size_t>(w.label)];
    double sum = 0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < 12; ++c) {
        std::size_t row = 0;
        for (auto v : r.confusion[c]) row += v;
        EXPECT_EQ(row, truth[c]);
        if (row) {
            ++present;
            sum += static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
        }
    }
    EXPECT_NEAR(r.balanced_accuracy, sum / static_cast<double>(present), 1e-12);
    EXPECT_GE(r.balanced_accuracy, 0.0);
    EXPECT_LE(r.balanced_accuracy, 1.0);
}

TEST(ValidationSplit, UsesSessionFive) {
    std::vector<Window> ws(20);
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i].session = 1 + static_cast<int>(i % 5);
    const auto [fit, val] = validation_split(ws, 5);
    EXPECT_EQ(val.size(), 4u);
    EXPECT_EQ(fit.size(), 16u);
    for (const auto& w : val) EXPECT_EQ(w.session, 5);
    std::vector<Window> single(20);
    const auto [fit2, val2] = validation_split(single, 5);
    EXPECT_EQ(val2.size(), 2u);
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovingEpoch) {
    const auto data = testkit::random_windows(40, 35);
    Hyperparams hp;
    hp.epochs = 5;
    hp.patience = 0;
    hp.batch_size = 8;
    hp.lr = 0.05;
    const TrainResult r = train(std::span(data).subspan(0, 30), std::span(data).subspan(30), width(4), hp, 36);
    const auto& e = r.history.epochs;
    double best = e[0].val_loss;
    std::size_t expected = e.size();
    for (std::size_t i = 1; i < e.size(); ++i) {
        if (!(e[i].val_loss < best)) {
            expected = i + 1;
            break;
        }
        best = e[i].val_loss;
    }
    EXPECT_EQ(e.size(), expected);
    EXPECT_EQ(r.history.stopped_early, expected < 5);
    for (const auto& rec : e) EXPECT_LE(e[r.history.best_epoch - 1].val_loss, rec.val_loss);
}

TEST(Train, SeedDeterminism) {
    const auto data = testkit::separable_windows(40, 37);
    Hyperparams hp;
    hp.epochs = 3;
    hp.patience = 3;
    hp.batch_size = 16;
    const TrainResult a = train(data, data, width(4), hp, 7);
    const TrainResult b = train(data, data, width(4), hp, 7);
    EXPECT_EQ(a.model, b.model);
    ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
    for (std::size_t i = 0; i < a.history.epochs.size(); ++i)
        EXPECT_EQ(a.history.epochs[i].train_loss, b.history.epochs[i].train_loss);
}

TEST(Train, SeparableSetIsLearned) {
    const auto data = testkit::separable_windows(200, 38);
    Hyperparams hp;
    hp.epochs = 30;
    hp.patience = 30;
    const TrainResult r = train(data, data, width(8), hp, 39);
    EXPECT_DOUBLE_EQ(evaluate(r.model, data).balanced_accuracy, 1.0);
    EXPECT_LT(r.history.epochs.back().train_loss, 0.2 * r.history.epochs.front().train_loss);
}

TEST(TrainFold, EmptyTrainSet) {
    DatasetSplit s;
    try {
        train_fold(s, width(2), Hyperparams{}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyTrainSet);
    }
}

TEST(History, CsvExport) {
    TrainHistory h;
    h.epochs.push_back({1, 0.5, 0.25, 0.75});
    std::ostringstream os;
    write_history_csv(os, h);
    EXPECT_EQ(os.str(), "epoch,train_loss,val_loss,val_bacc\n1,0.5,0.25,0.75\n");
}
