#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nisp/tensor.hpp"

namespace nisp {

enum class LayerKind { Dense, Conv2D, Pool2D, LRN, BatchNorm, Activation };
enum class ActivationKind { Identity, ReLU, Sigmoid, Tanh };
enum class PoolMode { Max, Average };

std::string_view to_string(LayerKind kind);
std::string_view to_string(ActivationKind kind);
std::string_view to_string(PoolMode mode);
std::optional<LayerKind> parse_layer_kind(std::string_view text);
std::optional<ActivationKind> parse_activation_kind(std::string_view text);
std::optional<PoolMode> parse_pool_mode(std::string_view text);

/// Spatial bookkeeping for every non-Dense layer. Maps are square: X×X in, Y×Y out.
/// Shape-preserving kinds (LRN, BatchNorm, Activation) use in_size == out_size and
/// in_channels == out_channels; kernel/stride/padding only matter for Conv2D and Pool2D.
struct Geometry {
    std::size_t in_size = 1;
    std::size_t out_size = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;

    Shape input_shape() const { return Shape::square(in_channels, in_size); }
    Shape output_shape() const { return Shape::square(out_channels, out_size); }

    // floor((X + 2p - k) / s) + 1, or nullopt when the window does not fit.
    std::optional<std::size_t> expected_out_size() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// One layer f(x) = act(w x + b) in the chain.
///
/// Parameter storage by kind:
///   Dense      weights: out×in matrix, w(i, j) connects input j to output i; bias: out
///   Conv2D     kernel: flat [c_out][c_in][ky][kx]; bias: c_out
///   BatchNorm  scale: per channel; bias: per-channel shift
///   others     no parameters
struct Layer {
    LayerKind kind = LayerKind::Dense;
    Matrix weights;
    Vec kernel;
    Vec scale;
    Vec bias;
    Geometry geometry;
    ActivationKind activation = ActivationKind::Identity;
    PoolMode pool_mode = PoolMode::Max;
    std::size_t lrn_local_size = 1;

    static Layer dense(Matrix w, Vec b, ActivationKind act = ActivationKind::Identity);
    static Layer conv2d(Geometry g, Vec kernel, Vec b, ActivationKind act = ActivationKind::Identity);
    static Layer pool2d(Geometry g, PoolMode mode);
    static Layer lrn(std::size_t channels, std::size_t size, std::size_t local_size);
    static Layer batch_norm(std::size_t channels, std::size_t size, Vec scale, Vec shift);
    static Layer activation_layer(Shape shape, ActivationKind act);

    Shape input_shape() const;
    Shape output_shape() const;
    bool has_weights() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2D; }
    std::size_t parameter_count() const;

    double& kernel_at(std::size_t co, std::size_t ci, std::size_t ky, std::size_t kx) {
        return kernel[((co * geometry.in_channels + ci) * geometry.kernel + ky) * geometry.kernel + kx];
    }
    double kernel_at(std::size_t co, std::size_t ci, std::size_t ky, std::size_t kx) const {
        return kernel[((co * geometry.in_channels + ci) * geometry.kernel + ky) * geometry.kernel + kx];
    }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Elementwise-add branch: output(merge) = f_merge(x) + output(source).
struct SkipEdge {
    std::size_t source = 0;
    std::size_t merge = 0;
    friend bool operator==(const SkipEdge&, const SkipEdge&) = default;
};

/// Ordered chain of layers with optional add-skip edges. Layer ids are positional.
/// frl_index names the final response layer; layers after it form the classifier.
struct Network {
    std::vector<Layer> layers;
    std::vector<SkipEdge> skip_edges;
    std::size_t frl_index = 0;

    std::size_t size() const { return layers.size(); }
    Shape input_shape() const { return layers.front().input_shape(); }
    Shape output_shape() const { return layers.back().output_shape(); }
    std::size_t parameter_count() const;

    friend bool operator==(const Network&, const Network&) = default;
};

struct Violation {
    long layer_id = -1;  // -1 for network-level problems
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    std::string summary() const;
};

/// Reports every structural problem; never throws.
ValidationReport validate(const Network& net);

/// Contiguous run of layers [start, end] of a parent network.
struct SubNetwork {
    const Network* parent = nullptr;
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - start + 1; }
    const Layer& layer(std::size_t offset) const { return parent->layers[start + offset]; }
};

/// Throws DomainError on out-of-range indices or when a skip edge enters the
/// range from outside it (the sub-network would not be a function of its input).
SubNetwork slice(const Network& net, std::size_t start, std::size_t end);

/// Layers whose output neurons can be removed: Dense and Conv2D layers up to and
/// including the final response layer. The classifier is never pruned.
std::vector<std::size_t> prunable_layers(const Network& net);

Network load_model(std::string_view text);
std::string save_model(const Network& net);
Network load_model_file(const std::string& path);
void save_model_file(const Network& net, const std::string& path);

}  // namespace nisp
