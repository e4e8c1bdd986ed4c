#include "nisp/model.hpp"

#include <cmath>
#include <sstream>

#include "nisp/error.hpp"

namespace nisp {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::Pool2D: return "pool2d";
        case LayerKind::LRN: return "lrn";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Activation: return "activation";
    }
    return "unknown";
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Identity: return "identity";
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::Tanh: return "tanh";
    }
    return "unknown";
}

std::string_view to_string(PoolMode mode) { return mode == PoolMode::Max ? "max" : "avg"; }

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
    for (auto k : {LayerKind::Dense, LayerKind::Conv2D, LayerKind::Pool2D, LayerKind::LRN,
                   LayerKind::BatchNorm, LayerKind::Activation})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

std::optional<ActivationKind> parse_activation_kind(std::string_view text) {
    for (auto k : {ActivationKind::Identity, ActivationKind::ReLU, ActivationKind::Sigmoid,
                   ActivationKind::Tanh})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

std::optional<PoolMode> parse_pool_mode(std::string_view text) {
    if (text == "max") return PoolMode::Max;
    if (text == "avg") return PoolMode::Average;
    return std::nullopt;
}

std::optional<std::size_t> Geometry::expected_out_size() const {
    if (stride == 0 || kernel == 0) return std::nullopt;
    if (in_size + 2 * padding < kernel) return std::nullopt;
    return (in_size + 2 * padding - kernel) / stride + 1;
}

Layer Layer::dense(Matrix w, Vec b, ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.weights = std::move(w);
    l.bias = std::move(b);
    l.activation = act;
    return l;
}

Layer Layer::conv2d(Geometry g, Vec kernel, Vec b, ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Conv2D;
    l.geometry = g;
    l.kernel = std::move(kernel);
    l.bias = std::move(b);
    l.activation = act;
    return l;
}

Layer Layer::pool2d(Geometry g, PoolMode mode) {
    Layer l;
    l.kind = LayerKind::Pool2D;
    l.geometry = g;
    l.pool_mode = mode;
    return l;
}

Layer Layer::lrn(std::size_t channels, std::size_t size, std::size_t local_size) {
    Layer l;
    l.kind = LayerKind::LRN;
    l.geometry = Geometry{size, size, 1, 1, 0, channels, channels};
    l.lrn_local_size = local_size;
    return l;
}

Layer Layer::batch_norm(std::size_t channels, std::size_t size, Vec scale, Vec shift) {
    Layer l;
    l.kind = LayerKind::BatchNorm;
    l.geometry = Geometry{size, size, 1, 1, 0, channels, channels};
    l.scale = std::move(scale);
    l.bias = std::move(shift);
    return l;
}

Layer Layer::activation_layer(Shape shape, ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Activation;
    l.geometry = Geometry{shape.height, shape.height, 1, 1, 0, shape.channels, shape.channels};
    l.activation = act;
    return l;
}

Shape Layer::input_shape() const {
    if (kind == LayerKind::Dense) return Shape::vector(weights.cols());
    return geometry.input_shape();
}

Shape Layer::output_shape() const {
    if (kind == LayerKind::Dense) return Shape::vector(weights.rows());
    return geometry.output_shape();
}

std::size_t Layer::parameter_count() const {
    switch (kind) {
        case LayerKind::Dense: return weights.rows() * weights.cols() + bias.size();
        case LayerKind::Conv2D: return kernel.size() + bias.size();
        case LayerKind::BatchNorm: return scale.size() + bias.size();
        default: return 0;
    }
}

std::size_t Network::parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += l.parameter_count();
    return total;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        if (v.layer_id >= 0)
            os << "layer " << v.layer_id << ": ";
        else
            os << "network: ";
        os << v.message << '\n';
    }
    return os.str();
}

namespace {

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_text(const Shape& s) {
    std::ostringstream os;
    os << s.channels << 'x' << s.height << 'x' << s.width;
    return os.str();
}

void check_layer(const Layer& layer, long id, std::vector<Violation>& out) {
    auto bad = [&](std::string msg) { out.push_back({id, std::move(msg)}); };
    const Geometry& g = layer.geometry;

    auto check_same_io = [&] {
        if (g.in_size != g.out_size) bad("input and output spatial sizes differ");
        if (g.in_channels != g.out_channels) bad("input and output channel counts differ");
        if (g.in_channels == 0 || g.in_size == 0) bad("empty shape");
    };
    auto check_window = [&] {
        if (g.kernel == 0) bad("kernel size is zero");
        if (g.stride == 0) bad("stride is zero");
        if (g.in_channels == 0 || g.out_channels == 0 || g.in_size == 0) bad("empty shape");
        auto y = g.expected_out_size();
        if (!y)
            bad("kernel does not fit the padded input");
        else if (*y != g.out_size)
            bad("output size " + std::to_string(g.out_size) + " != floor((X+2p-k)/s)+1 = " +
                std::to_string(*y));
    };

    switch (layer.kind) {
        case LayerKind::Dense:
            if (layer.weights.rows() == 0 || layer.weights.cols() == 0) bad("empty weight matrix");
            if (layer.bias.size() != layer.weights.rows()) bad("bias length != output width");
            break;
        case LayerKind::Conv2D:
            check_window();
            if (layer.kernel.size() != g.kernel * g.kernel * g.in_channels * g.out_channels)
                bad("kernel size != k*k*C_in*C_out");
            if (layer.bias.size() != g.out_channels) bad("bias length != output channels");
            break;
        case LayerKind::Pool2D:
            check_window();
            if (g.in_channels != g.out_channels) bad("pooling changes channel count");
            break;
        case LayerKind::LRN:
            check_same_io();
            if (layer.lrn_local_size % 2 == 0) bad("LRN local size must be odd");
            if (layer.lrn_local_size > g.in_channels) bad("LRN local size exceeds channel count");
            break;
        case LayerKind::BatchNorm:
            check_same_io();
            if (layer.scale.size() != g.in_channels) bad("scale length != channels");
            if (layer.bias.size() != g.in_channels) bad("shift length != channels");
            break;
        case LayerKind::Activation:
            check_same_io();
            break;
    }

    if (!all_finite(layer.weights.data()) || !all_finite(layer.kernel) || !all_finite(layer.scale) ||
        !all_finite(layer.bias))
        bad("non-finite parameter");
}

}  // namespace

ValidationReport validate(const Network& net) {
    ValidationReport report;
    auto& out = report.violations;
    const std::size_t n = net.layers.size();

    if (n == 0) {
        out.push_back({-1, "network has no layers"});
    } else {
        for (std::size_t i = 0; i < n; ++i) check_layer(net.layers[i], static_cast<long>(i), out);

        for (std::size_t i = 1; i < n; ++i) {
            const Layer& prev = net.layers[i - 1];
            const Layer& cur = net.layers[i];
            const Shape produced = prev.output_shape();
            if (cur.kind == LayerKind::Dense) {
                if (produced.size() != cur.weights.cols())
                    out.push_back({static_cast<long>(i),
                                   "dense input width " + std::to_string(cur.weights.cols()) +
                                       " != previous output size " + std::to_string(produced.size())});
            } else if (!(produced == cur.input_shape())) {
                out.push_back({static_cast<long>(i), "input shape " + shape_text(cur.input_shape()) +
                                                         " != previous output shape " +
                                                         shape_text(produced)});
            }
        }

        if (net.frl_index >= n)
            out.push_back({-1, "frl_index out of range"});
        else if (n > 1 && net.frl_index + 1 >= n)
            out.push_back({-1, "frl_index must precede the classifier layer"});
    }

    for (const auto& e : net.skip_edges) {
        const std::string tag = "skip edge " + std::to_string(e.source) + "->" + std::to_string(e.merge);
        if (e.source >= n || e.merge >= n) {
            out.push_back({-1, tag + " references a missing layer"});
            continue;
        }
        if (e.source >= e.merge) {
            out.push_back({static_cast<long>(e.merge), tag + " must point forward"});
            continue;
        }
        if (!(net.layers[e.source].output_shape() == net.layers[e.merge].output_shape()))
            out.push_back({static_cast<long>(e.merge), tag + " joins different shapes " +
                                                           shape_text(net.layers[e.source].output_shape()) +
                                                           " and " +
                                                           shape_text(net.layers[e.merge].output_shape())});
    }

    report.ok = out.empty();
    return report;
}

std::vector<std::size_t> prunable_layers(const Network& net) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i <= net.frl_index && i < net.layers.size(); ++i)
        if (net.layers[i].has_weights()) ids.push_back(i);
    return ids;
}

SubNetwork slice(const Network& net, std::size_t start, std::size_t end) {
    if (start > end || end >= net.layers.size())
        throw DomainError("slice [" + std::to_string(start) + ", " + std::to_string(end) +
                          "] out of range for " + std::to_string(net.layers.size()) + " layers");
    for (const auto& e : net.skip_edges)
        if (e.source < start && e.merge >= start && e.merge <= end)
            throw DomainError("skip edge " + std::to_string(e.source) + "->" + std::to_string(e.merge) +
                              " enters the slice from outside");
    return SubNetwork{&net, start, end};
}

}  // namespace nisp
