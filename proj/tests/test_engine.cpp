#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "builders.hpp"
#include "nisp/engine.hpp"
#include "nisp/error.hpp"
#include "oracles.hpp"

using namespace nisp;
using namespace nisp::testing;

TEST(Forward, IdentityDense) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}));
    const auto t = forward(net, Sample{{3, -1}, {}});
    EXPECT_EQ(t.final_output(), (Vec{3, -1}));
    ASSERT_EQ(t.outputs.size(), 2u);
    EXPECT_EQ(t.input(), (Vec{3, -1}));
}

TEST(Forward, ReluDenseByHand) {
    Matrix w(2, 2);
    w(0, 0) = 1, w(0, 1) = -2, w(1, 0) = 3, w(1, 1) = 4;
    Network net;
    net.layers.push_back(Layer::dense(w, {0, 0}, ActivationKind::ReLU));
    EXPECT_EQ(forward(net, Sample{{1, 1}, {}}).final_output(), (Vec{0, 7}));
}

TEST(Forward, MaxPoolOfConstantMap) {
    Network net;
    net.layers.push_back(Layer::pool2d({4, 2, 2, 2, 0, 1, 1}, PoolMode::Max));
    EXPECT_EQ(forward(net, Sample{Vec(16, 5.0), {}}).final_output(), Vec(4, 5.0));
}

TEST(Forward, AveragePoolAndFirstMaximum) {
    Layer avg = Layer::pool2d({2, 1, 2, 1, 0, 1, 1}, PoolMode::Average);
    EXPECT_DOUBLE_EQ(layer_forward(avg, Vec{1, 2, 3, 6})[0], 3.0);
    Layer mx = Layer::pool2d({2, 1, 2, 1, 0, 1, 1}, PoolMode::Max);
    EXPECT_DOUBLE_EQ(layer_forward(mx, Vec{-1, -4, -2, -3})[0], -1.0);
}

TEST(Forward, ConvMatchesNaiveOracle) {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const Geometry g = random_window(rng, 7, 3, 3, false);
        const Vec k = random_vec(rng, g.kernel * g.kernel * g.in_channels * g.out_channels);
        const Vec b = random_vec(rng, g.out_channels);
        const Vec x = random_vec(rng, g.in_channels * g.in_size * g.in_size);
        const Vec got = layer_forward(Layer::conv2d(g, k, b), x);
        ASSERT_LE(max_abs_diff(got, naive_conv(g, k, b, x)), 1e-12) << "trial " << t;
    }
}

TEST(Forward, LrnFormula) {
    Layer lrn = Layer::lrn(3, 1, 3);
    const Vec x{1, 2, 3};
    const Vec y = layer_forward(lrn, x);
    const double a = kLrnAlpha / 3.0;
    EXPECT_DOUBLE_EQ(y[0], 1 / std::pow(1 + a * (1 + 4), 0.75));
    EXPECT_DOUBLE_EQ(y[1], 2 / std::pow(1 + a * (1 + 4 + 9), 0.75));
    EXPECT_DOUBLE_EQ(y[2], 3 / std::pow(1 + a * (4 + 9), 0.75));
}

TEST(Forward, SkipAddsSourceAfterActivation) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}, ActivationKind::ReLU));
    net.layers.push_back(Layer::dense(Matrix::identity(2), {1, 1}, ActivationKind::ReLU));
    net.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}));
    net.skip_edges.push_back({0, 1});
    net.frl_index = 1;
    const auto t = forward(net, Sample{{2, -3}, {}});
    EXPECT_EQ(t.layer_output(1), (Vec{5, 1}));
}

TEST(Forward, ShapeMismatchThrows) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}));
    EXPECT_THROW(forward(net, Sample{{1, 2, 3}, {}}), ShapeError);
}

TEST(Forward, DeterministicTraces) {
    Rng rng(22);
    const Network net = random_conv_net(rng, true);
    const Sample s{random_vec(rng, net.input_shape().size()), {}};
    EXPECT_EQ(forward(net, s).outputs, forward(net, s).outputs);
}

TEST(BatchResponses, SingleSampleRow) {
    Rng rng(23);
    const Network net = random_dense_net(rng, 4, 6, {ActivationKind::Tanh});
    const Samples data = random_samples(rng, net.input_shape().size(), 1);
    const auto r = batch_responses(net, data, 0);
    ASSERT_EQ(r.values.rows(), 1u);
    const auto row = r.values.row(0);
    EXPECT_EQ(Vec(row.begin(), row.end()), forward(net, data[0]).layer_output(0));
}

TEST(BatchResponses, IdenticalSamplesIdenticalRows) {
    Rng rng(24);
    const Network net = random_dense_net(rng, 4, 6, {ActivationKind::ReLU});
    Samples data(3, Sample{random_vec(rng, net.input_shape().size()), {}});
    const auto r = batch_responses(net, data, net.frl_index);
    for (std::size_t m = 1; m < 3; ++m)
        EXPECT_TRUE(std::equal(r.values.row(0).begin(), r.values.row(0).end(), r.values.row(m).begin()));
}

TEST(BatchResponses, RowsFollowSampleOrder) {
    Rng rng(25);
    const Network net = random_conv_net(rng, false);
    const Samples data = random_samples(rng, net.input_shape().size(), 10);
    for (std::size_t layer = 0; layer < net.size(); ++layer) {
        const auto r = batch_responses(net, data, layer);
        for (std::size_t m = 0; m < data.size(); ++m) {
            const auto row = r.values.row(m);
            ASSERT_EQ(Vec(row.begin(), row.end()), forward(net, data[m]).layer_output(layer));
        }
    }
}

TEST(BatchResponses, EmptyDatasetThrows) {
    Rng rng(26);
    const Network net = random_dense_net(rng, 3, 4, {ActivationKind::ReLU});
    EXPECT_THROW(batch_responses(net, {}, 0), DomainError);
}

TEST(Lipschitz, TableValues) {
    EXPECT_EQ(lipschitz_constant(ActivationKind::ReLU), 1.0);
    EXPECT_EQ(lipschitz_constant(ActivationKind::Sigmoid), 0.25);
    EXPECT_EQ(lipschitz_constant(ActivationKind::Tanh), 1.0);
    EXPECT_EQ(lipschitz_constant(ActivationKind::Identity), 1.0);
}

TEST(Lipschitz, SampledPairs) {
    Rng rng(27);
    for (auto kind : {ActivationKind::Identity, ActivationKind::ReLU, ActivationKind::Sigmoid, ActivationKind::Tanh}) {
        const double c = lipschitz_constant(kind);
        for (int t = 0; t < 100000; ++t) {
            const double x = uniform(rng, -10, 10), y = uniform(rng, -10, 10);
            ASSERT_LE(std::fabs(activate(kind, x) - activate(kind, y)), c * std::fabs(x - y) * (1 + 1e-12) + 1e-300);
        }
    }
}

TEST(Lipschitz, DenseLayerElementwiseBound) {
    Rng rng(28);
    for (auto kind : {ActivationKind::ReLU, ActivationKind::Sigmoid, ActivationKind::Tanh}) {
        const Layer layer = Layer::dense(random_matrix(rng, 4, 5), random_vec(rng, 4), kind);
        const Matrix absw = elementwise_abs(layer.weights);
        for (int t = 0; t < 10000; ++t) {
            const Vec x = random_vec(rng, 5, -3, 3), y = random_vec(rng, 5, -3, 3);
            Vec d(5);
            for (int j = 0; j < 5; ++j) d[j] = std::fabs(x[j] - y[j]);
            const Vec fx = layer_forward(layer, x), fy = layer_forward(layer, y), bound = matvec(absw, d);
            for (int i = 0; i < 4; ++i)
                ASSERT_LE(std::fabs(fx[i] - fy[i]), lipschitz_constant(kind) * bound[i] * (1 + 1e-12) + 1e-15);
        }
    }
}

TEST(Accuracy, OneHotNetIsPerfect) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix::identity(3), {0, 0, 0}));
    Samples data;
    for (std::size_t c = 0; c < 3; ++c) {
        Vec x(3, 0.0);
        x[c] = 1.0;
        data.push_back({x, c});
    }
    EXPECT_EQ(accuracy(net, data), 1.0);
}

TEST(Accuracy, ConstantOutputOnBalancedData) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix(2, 2, 0.0), {0, 0}));  // ties go to class 0
    Samples data{{{1, 0}, 0}, {{0, 1}, 1}, {{2, 2}, 0}, {{3, 1}, 1}};
    EXPECT_EQ(accuracy(net, data), 0.5);
}

TEST(Accuracy, MatchesManualCount) {
    Rng rng(29);
    const Network net = random_dense_net(rng, 3, 6, {ActivationKind::Tanh});
    const std::size_t classes = net.output_shape().size();
    const Samples data = random_samples(rng, net.input_shape().size(), 20, classes);
    std::size_t hits = 0;
    for (const auto& s : data) {
        const Vec y = forward(net, s).final_output();
        std::size_t best = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] > y[best]) best = i;
        hits += best == *s.label;
    }
    EXPECT_EQ(accuracy(net, data), static_cast<double>(hits) / 20.0);
}

TEST(Accuracy, UnlabeledThrows) {
    Network net;
    net.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}));
    EXPECT_THROW(accuracy(net, {{{1, 0}, std::nullopt}}), DomainError);
}

TEST(TopOneAgreement, SelfAndPermuted) {
    Network a;
    a.layers.push_back(Layer::dense(Matrix::identity(3), {0, 0, 0}));
    Samples data;
    for (std::size_t c = 0; c < 3; ++c) {
        Vec x(3, 0.0);
        x[c] = 1.0;
        data.push_back({x, c});
    }
    EXPECT_EQ(top1_agreement(a, a, data), 1.0);
    Network b = a;
    Matrix p(3, 3);
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
    b.layers[0].weights = p;
    EXPECT_LT(top1_agreement(a, b, data), 1.0);
    Network c;
    c.layers.push_back(Layer::dense(Matrix::identity(2), {0, 0}));
    EXPECT_THROW(top1_agreement(a, c, data), ShapeError);
}

TEST(Dataset, CsvRoundTripWithManifest) {
    Rng rng(30);
    Samples data = random_samples(rng, 12, 7, 3);
    const auto dir = std::filesystem::temp_directory_path() / "nisp_engine_dataset";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "d.csv").string();
    save_dataset(data, path, Shape{3, 2, 2});
    const Dataset back = load_dataset(path);
    ASSERT_EQ(back.samples.size(), data.size());
    for (std::size_t m = 0; m < data.size(); ++m) {
        EXPECT_EQ(back.samples[m].input, data[m].input);
        EXPECT_EQ(back.samples[m].label, data[m].label);
    }
    ASSERT_TRUE(back.shape.has_value());
    EXPECT_EQ(*back.shape, (Shape{3, 2, 2}));
    std::filesystem::remove_all(dir);
}

TEST(Dataset, BadHeaderAndNumbers) {
    const auto dir = std::filesystem::temp_directory_path() / "nisp_engine_bad";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "d.csv").string();
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,y\n1,2\n", f);
    std::fclose(f);
    EXPECT_THROW(load_dataset(path), ParseError);
    f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1\n1,abc\n", f);
    std::fclose(f);
    EXPECT_THROW(load_dataset(path), ParseError);
    EXPECT_THROW(load_dataset((dir / "missing.csv").string()), ParseError);
    std::filesystem::remove_all(dir);
}
