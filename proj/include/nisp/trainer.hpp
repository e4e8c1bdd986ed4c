#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nisp/engine.hpp"
#include "nisp/model.hpp"

namespace nisp {

struct SynthSpec {
    std::size_t n_classes = 2;
    std::size_t dim = 2;
    std::size_t samples_per_class = 50;
    double cluster_spread = 0.1;
    std::uint64_t seed = 0;
};

/// Gaussian blobs around the vertices of a regular simplex with edge √2: class c sits at
/// the basis vector e_c, and with n_classes = dim + 1 the last vertex closes the simplex.
/// Samples are interleaved by class.
Samples synth_dataset(const SynthSpec& spec);

/// Center of class `c` used by synth_dataset.
Vec synth_center(const SynthSpec& spec, std::size_t c);

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    void check() const;
};

struct CurvePoint {
    double train_loss = 0.0;
    double eval_accuracy = 0.0;
};

struct LearningCurve {
    std::vector<CurvePoint> points;  // one per epoch
};

/// CSV `epoch,train_loss,eval_accuracy`, epochs counted from 1.
std::string learning_curve_csv(const LearningCurve& curve);

/// Dense layers with `hidden` activation and an identity output layer; the last hidden
/// layer is the final response layer. Weights are Glorot-uniform, biases zero.
Network make_mlp(const std::vector<std::size_t>& widths, ActivationKind hidden, std::uint64_t seed);

/// Redraws every Dense weight from U(−√(6/(in+out)), +√(6/(in+out))) and zeroes biases.
void glorot_init(Network& net, std::uint64_t seed);

struct Gradients {
    std::vector<Matrix> weights;  // per layer; empty for Activation layers
    std::vector<Vec> bias;
    double loss = 0.0;            // mean softmax cross-entropy over the batch
};

/// Mean loss over `batch` and its gradient with respect to every Dense parameter.
Gradients loss_and_gradients(const Network& net, const Samples& batch);

double mean_loss(const Network& net, const Samples& data);

/// Minibatch SGD on softmax cross-entropy. The shuffle order comes from cfg.seed only.
/// Accuracy per epoch is measured on `eval` (on `data` when `eval` is empty).
std::pair<Network, LearningCurve> train(const Network& net, const Samples& data, const TrainConfig& cfg,
                                        const Samples& eval = {});

/// train() at cfg.learning_rate / 10. Zero epochs returns the network unchanged.
std::pair<Network, LearningCurve> finetune(const Network& net, const Samples& data, const TrainConfig& cfg,
                                           const Samples& eval = {});

}  // namespace nisp
