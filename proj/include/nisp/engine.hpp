#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nisp/model.hpp"
#include "nisp/tensor.hpp"

namespace nisp {

struct Sample {
    Vec input;                          // flattened channel-major
    std::optional<std::size_t> label;
};

using Samples = std::vector<Sample>;

/// outputs[0] is the input; outputs[l + 1] is the response of layer l.
struct ActivationTrace {
    std::vector<Vec> outputs;

    const Vec& input() const { return outputs.front(); }
    const Vec& layer_output(std::size_t layer) const { return outputs.at(layer + 1); }
    const Vec& final_output() const { return outputs.back(); }
};

/// M samples × N neurons of one layer's response.
struct ResponseMatrix {
    Matrix values;
    std::size_t layer_id = 0;
};

// Fixed cross-channel LRN constants; importance propagation does not depend on them.
inline constexpr double kLrnBias = 1.0;
inline constexpr double kLrnAlpha = 1e-4;
inline constexpr double kLrnBeta = 0.75;

double activate(ActivationKind kind, double x);
// Derivative expressed through the activation output y = activate(kind, x).
double activation_slope(ActivationKind kind, double y);

/// Lipschitz constant of each activation: Identity, ReLU, Tanh → 1; Sigmoid → 1/4.
double lipschitz_constant(ActivationKind kind);

/// Response of a single layer applied to x (skip additions are the caller's job).
Vec layer_forward(const Layer& layer, std::span<const double> x);

ActivationTrace forward(const Network& net, const Sample& sample);

/// Forward pass where `output_masks[l]`, when non-empty, multiplies layer l's response
/// (after any skip addition) elementwise before it is consumed downstream.
ActivationTrace forward_masked(const Network& net, std::span<const double> input,
                               const std::vector<Vec>& output_masks);

/// Output of the sub-network's last layer given the input of its first layer.
Vec forward(const SubNetwork& sub, std::span<const double> input);

/// Row m is the flattened response of `layer_id` for data[m]. Rows keep input order.
ResponseMatrix batch_responses(const Network& net, const Samples& data, std::size_t layer_id);

/// Index of the largest element; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

double accuracy(const Network& net, const Samples& data);
double top1_agreement(const Network& a, const Network& b, const Samples& data);

struct Dataset {
    Samples samples;
    std::optional<Shape> shape;  // from the sidecar manifest, when present
};

/// CSV with header `x0,...,x{d-1}[,label]`. If `<path>.json` exists it must hold
/// {"shape": [channels, height, width]} with channels*height*width == d.
Dataset load_dataset(const std::string& path);
std::string dataset_to_csv(const Samples& data);
void save_dataset(const Samples& data, const std::string& path, std::optional<Shape> shape = std::nullopt);

}  // namespace nisp
