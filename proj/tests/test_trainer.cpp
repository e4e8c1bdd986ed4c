#include <gtest/gtest.h>

#include <cmath>

#include "builders.hpp"
#include "nisp/error.hpp"
#include "nisp/trainer.hpp"

using namespace nisp;
using namespace nisp::testing;

TEST(Synth, CentersAreEquidistant) {
    SynthSpec spec{5, 4, 1, 0.0, 0};
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a + 1; b < 5; ++b) {
            const Vec ca = synth_center(spec, a), cb = synth_center(spec, b);
            double d = 0.0;
            for (std::size_t i = 0; i < 4; ++i) d += (ca[i] - cb[i]) * (ca[i] - cb[i]);
            EXPECT_NEAR(d, 2.0, 1e-12);
        }
}

TEST(Synth, SizesLabelsAndDeterminism) {
    SynthSpec spec{3, 4, 10, 0.2, 7};
    const Samples a = synth_dataset(spec);
    ASSERT_EQ(a.size(), 30u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(*a[i].label, i % 3);
        EXPECT_EQ(a[i].input.size(), 4u);
    }
    const Samples b = synth_dataset(spec);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].input, b[i].input);
    spec.seed = 8;
    EXPECT_NE(synth_dataset(spec)[0].input, a[0].input);
}

TEST(Synth, ZeroSpreadSitsOnCenters) {
    SynthSpec spec{2, 3, 4, 0.0, 1};
    for (const auto& s : synth_dataset(spec)) EXPECT_EQ(s.input, synth_center(spec, *s.label));
}

TEST(Synth, RejectsTooManyClasses) {
    EXPECT_THROW(synth_dataset({4, 2, 10, 0.1, 0}), DomainError);
}

TEST(Gradients, MatchFiniteDifferences) {
    Rng rng(101);
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
        const auto act = random_activation(rng, {ActivationKind::Sigmoid, ActivationKind::Tanh});
        const Network net = make_mlp({4, pick(rng, 2, 6), pick(rng, 2, 6), 3}, act, 100 + t);
        const Samples batch = random_samples(rng, 4, 5, 3);
        const Gradients g = loss_and_gradients(net, batch);
        EXPECT_NEAR(g.loss, mean_loss(net, batch), 1e-12);
        for (std::size_t l = 0; l < net.size(); ++l) {
            for (std::size_t i = 0; i < net.layers[l].weights.data().size(); ++i) {
                Network plus = net, minus = net;
                plus.layers[l].weights.data()[i] += h;
                minus.layers[l].weights.data()[i] -= h;
                const double fd = (mean_loss(plus, batch) - mean_loss(minus, batch)) / (2 * h);
                const double an = g.weights[l].data()[i];
                ASSERT_LE(std::fabs(fd - an), 1e-4 * std::max(1.0, std::fabs(fd))) << l << ',' << i;
            }
            for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i) {
                Network plus = net, minus = net;
                plus.layers[l].bias[i] += h;
                minus.layers[l].bias[i] -= h;
                const double fd = (mean_loss(plus, batch) - mean_loss(minus, batch)) / (2 * h);
                ASSERT_LE(std::fabs(fd - g.bias[l][i]), 1e-4 * std::max(1.0, std::fabs(fd)));
            }
        }
    }
}

TEST(Train, ZeroLearningRateLeavesWeights) {
    const Network net = make_mlp({2, 4, 2}, ActivationKind::ReLU, 1);
    const Samples data = synth_dataset({2, 2, 20, 0.1, 0});
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 2;
    const auto [out, curve] = train(net, data, cfg);
    EXPECT_EQ(out, net);
    ASSERT_EQ(curve.points.size(), 2u);
    EXPECT_EQ(curve.points[0].train_loss, curve.points[1].train_loss);
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
    const Samples data = synth_dataset({3, 4, 50, 0.1, 2});
    TrainConfig cfg;
    cfg.epochs = 30;
    const auto [net, curve] = train(make_mlp({4, 16, 3}, ActivationKind::ReLU, 3), data, cfg);
    EXPECT_GE(accuracy(net, data), 0.95);
    EXPECT_LT(curve.points.back().train_loss, curve.points.front().train_loss);
}

TEST(Train, DeterministicForSeed) {
    const Samples data = synth_dataset({2, 3, 20, 0.3, 4});
    const Network net = make_mlp({3, 5, 2}, ActivationKind::Tanh, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    EXPECT_EQ(train(net, data, cfg).first, train(net, data, cfg).first);
}

TEST(Train, RejectsConvAndBadConfig) {
    const Samples data = synth_dataset({2, 2, 5, 0.1, 0});
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(make_mlp({2, 3, 2}, ActivationKind::ReLU, 0), data, cfg), DomainError);
    Network conv;
    conv.layers.push_back(Layer::conv2d({1, 1, 1, 1, 0, 1, 2}, {1, 1}, {0, 0}));
    EXPECT_THROW(train(conv, {{{1}, 0}}, TrainConfig{}), DomainError);
}

TEST(Finetune, IsTrainingAtATenthOfTheRate) {
    const Samples data = synth_dataset({2, 3, 20, 0.3, 6});
    const Network net = make_mlp({3, 5, 2}, ActivationKind::Sigmoid, 7);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 2;
    TrainConfig tenth = cfg;
    tenth.learning_rate = 0.05;
    EXPECT_EQ(finetune(net, data, cfg).first, train(net, data, tenth).first);
}

TEST(Finetune, ZeroEpochsIsIdentity) {
    const Network net = make_mlp({3, 5, 2}, ActivationKind::ReLU, 8);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto [out, curve] = finetune(net, synth_dataset({2, 3, 5, 0.1, 0}), cfg);
    EXPECT_EQ(out, net);
    EXPECT_TRUE(curve.points.empty());
}

TEST(MakeMlp, GlorotRangeAndStructure) {
    const Network net = make_mlp({10, 6, 4}, ActivationKind::ReLU, 9);
    EXPECT_EQ(net.frl_index, 0u);
    EXPECT_EQ(net.layers[1].activation, ActivationKind::Identity);
    const double limit = std::sqrt(6.0 / 16.0);
    for (double w : net.layers[0].weights.data()) EXPECT_LE(std::fabs(w), limit);
    EXPECT_TRUE(validate(net).ok);
}

TEST(LearningCurve, Csv) {
    LearningCurve c;
    c.points.push_back({0.5, 0.75});
    EXPECT_EQ(learning_curve_csv(c), "epoch,train_loss,eval_accuracy\n1,0.5,0.75\n");
}
