#include "nisp/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "nisp/error.hpp"
#include "nisp/io.hpp"
#include "nisp/kernels.hpp"

namespace nisp {

double activate(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Identity: return x;
        case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
        case ActivationKind::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::Tanh: return std::tanh(x);
    }
    return x;
}

double activation_slope(ActivationKind kind, double y) {
    switch (kind) {
        case ActivationKind::Identity: return 1.0;
        case ActivationKind::ReLU: return y > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Sigmoid: return y * (1.0 - y);
        case ActivationKind::Tanh: return 1.0 - y * y;
    }
    return 1.0;
}

double lipschitz_constant(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Identity:
        case ActivationKind::ReLU:
        case ActivationKind::Tanh: return 1.0;
        case ActivationKind::Sigmoid: return 0.25;
    }
    throw DomainError("lipschitz_constant: unsupported activation");
}

namespace {

Vec pool_forward(const Layer& layer, std::span<const double> x) {
    const Geometry& g = layer.geometry;
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    Vec out(g.out_channels * Y * Y);
    const double inv_area = 1.0 / static_cast<double>(k * k);
    for (std::size_t c = 0; c < g.out_channels; ++c)
        for (std::size_t oy = 0; oy < Y; ++oy)
            for (std::size_t ox = 0; ox < Y; ++ox) {
                double best = 0.0;
                bool seen = false;
                double sum = 0.0;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long>(X)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                        if (ix < 0 || ix >= static_cast<long>(X)) continue;
                        const double v = x[(c * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)];
                        sum += v;
                        if (!seen || v > best) best = v;  // strict: first maximum wins
                        seen = true;
                    }
                }
                out[(c * Y + oy) * Y + ox] = layer.pool_mode == PoolMode::Max ? best : sum * inv_area;
            }
    return out;
}

Vec lrn_forward(const Layer& layer, std::span<const double> x) {
    const std::size_t channels = layer.geometry.in_channels;
    const std::size_t spatial = layer.geometry.in_size * layer.geometry.in_size;
    const std::size_t half = (layer.lrn_local_size - 1) / 2;
    const double scale = kLrnAlpha / static_cast<double>(layer.lrn_local_size);
    Vec out(x.size());
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = c >= half ? c - half : 0;
        const std::size_t hi = std::min(channels - 1, c + half);
        for (std::size_t p = 0; p < spatial; ++p) {
            double sq = 0.0;
            for (std::size_t src = lo; src <= hi; ++src) sq += x[src * spatial + p] * x[src * spatial + p];
            out[c * spatial + p] = x[c * spatial + p] / std::pow(kLrnBias + scale * sq, kLrnBeta);
        }
    }
    return out;
}

Vec batch_norm_forward(const Layer& layer, std::span<const double> x) {
    const std::size_t spatial = layer.geometry.in_size * layer.geometry.in_size;
    Vec out(x.size());
    for (std::size_t c = 0; c < layer.scale.size(); ++c)
        for (std::size_t p = 0; p < spatial; ++p)
            out[c * spatial + p] = layer.scale[c] * x[c * spatial + p] + layer.bias[c];
    return out;
}

void apply_skips_and_mask(const Network& net, std::size_t layer, std::vector<Vec>& outputs,
                          const std::vector<Vec>* masks, std::size_t first_layer) {
    Vec& out = outputs[layer + 1];
    for (const auto& e : net.skip_edges)
        if (e.merge == layer && e.source >= first_layer) {
            const Vec& src = outputs[e.source + 1];
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += src[i];
        }
    if (masks && layer < masks->size() && !(*masks)[layer].empty()) {
        const Vec& m = (*masks)[layer];
        if (m.size() != out.size()) throw ShapeError("forward_masked: mask width mismatch at layer " + std::to_string(layer));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
    }
}

// Runs layers [first, last]; outputs is indexed like a full trace (slot l+1 = layer l).
void run_layers(const Network& net, std::size_t first, std::size_t last, std::vector<Vec>& outputs,
                const std::vector<Vec>* masks) {
    for (std::size_t l = first; l <= last; ++l) {
        outputs[l + 1] = layer_forward(net.layers[l], outputs[l]);
        apply_skips_and_mask(net, l, outputs, masks, first);
    }
}

}  // namespace

Vec layer_forward(const Layer& layer, std::span<const double> x) {
    if (x.size() != layer.input_shape().size())
        throw ShapeError("layer_forward: input has " + std::to_string(x.size()) + " values, layer expects " +
                         std::to_string(layer.input_shape().size()));
    Vec out;
    switch (layer.kind) {
        case LayerKind::Dense: out = kernels::omp::dense_forward(layer.weights, layer.bias, x); break;
        case LayerKind::Conv2D: out = kernels::omp::conv_forward(layer.geometry, layer.kernel, layer.bias, x); break;
        case LayerKind::Pool2D: out = pool_forward(layer, x); break;
        case LayerKind::LRN: out = lrn_forward(layer, x); break;
        case LayerKind::BatchNorm: out = batch_norm_forward(layer, x); break;
        case LayerKind::Activation: out.assign(x.begin(), x.end()); break;
    }
    if (layer.activation != ActivationKind::Identity)
        for (double& v : out) v = activate(layer.activation, v);
    return out;
}

ActivationTrace forward_masked(const Network& net, std::span<const double> input,
                               const std::vector<Vec>& output_masks) {
    if (net.layers.empty()) throw ShapeError("forward: empty network");
    if (input.size() != net.input_shape().size())
        throw ShapeError("forward: sample has " + std::to_string(input.size()) + " values, network expects " +
                         std::to_string(net.input_shape().size()));
    ActivationTrace trace;
    trace.outputs.resize(net.layers.size() + 1);
    trace.outputs[0].assign(input.begin(), input.end());
    run_layers(net, 0, net.layers.size() - 1, trace.outputs, &output_masks);
    return trace;
}

ActivationTrace forward(const Network& net, const Sample& sample) {
    static const std::vector<Vec> no_masks;
    return forward_masked(net, sample.input, no_masks);
}

Vec forward(const SubNetwork& sub, std::span<const double> input) {
    const Network& net = *sub.parent;
    if (input.size() != net.layers[sub.start].input_shape().size())
        throw ShapeError("forward: sub-network input width mismatch");
    std::vector<Vec> outputs(net.layers.size() + 1);
    outputs[sub.start].assign(input.begin(), input.end());
    run_layers(net, sub.start, sub.end, outputs, nullptr);
    return std::move(outputs[sub.end + 1]);
}

ResponseMatrix batch_responses(const Network& net, const Samples& data, std::size_t layer_id) {
    if (data.empty()) throw DomainError("batch_responses: empty dataset");
    if (layer_id >= net.layers.size()) throw DomainError("batch_responses: layer out of range");
    const std::size_t width = net.layers[layer_id].output_shape().size();
    ResponseMatrix resp{Matrix(data.size(), width), layer_id};
    const long rows = static_cast<long>(data.size());
    // Rows are independent; exceptions cannot cross the parallel region, so collect the first.
    std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (long m = 0; m < rows; ++m) {
        try {
            const auto trace = forward(net, data[static_cast<std::size_t>(m)]);
            const Vec& out = trace.layer_output(layer_id);
            std::copy(out.begin(), out.end(), resp.values.row(static_cast<std::size_t>(m)).begin());
        } catch (const std::exception& e) {
#pragma omp critical(nisp_batch_failure)
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw ShapeError(failure);
    return resp;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw DomainError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

double accuracy(const Network& net, const Samples& data) {
    if (data.empty()) throw DomainError("accuracy: empty dataset");
    std::size_t hits = 0;
    for (const auto& s : data) {
        if (!s.label) throw DomainError("accuracy: unlabeled sample");
        if (argmax(forward(net, s).final_output()) == *s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double top1_agreement(const Network& a, const Network& b, const Samples& data) {
    if (a.output_shape().size() != b.output_shape().size())
        throw ShapeError("top1_agreement: output widths differ");
    if (data.empty()) throw DomainError("top1_agreement: empty dataset");
    std::size_t same = 0;
    for (const auto& s : data)
        if (argmax(forward(a, s).final_output()) == argmax(forward(b, s).final_output())) ++same;
    return static_cast<double>(same) / static_cast<double>(data.size());
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    for (auto& c : cells) {
        while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
        while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
    }
    return cells;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    const std::string text = io::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty dataset file");
    const auto header = split_csv(line);
    std::size_t dim = 0;
    while (dim < header.size() && header[dim] == "x" + std::to_string(dim)) ++dim;
    const bool has_label = dim + 1 == header.size() && header[dim] == "label";
    if (dim == 0 || (dim != header.size() && !has_label))
        throw ParseError(path + ": header must be x0..x{d-1} optionally followed by label");

    Dataset ds;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError(path + ":" + std::to_string(row) + ": expected " + std::to_string(header.size()) + " columns");
        Sample s;
        s.input.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const auto cell = cells[j];
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), s.input[j]);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(s.input[j]))
                throw ParseError(path + ":" + std::to_string(row) + ": bad number '" + std::string(cell) + "'");
        }
        if (has_label && !cells[dim].empty()) {
            std::size_t label = 0;
            const auto cell = cells[dim];
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), label);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw ParseError(path + ":" + std::to_string(row) + ": bad label '" + std::string(cell) + "'");
            s.label = label;
        }
        ds.samples.push_back(std::move(s));
    }

    const std::string manifest = path + ".json";
    if (std::filesystem::exists(manifest)) {
        try {
            const auto doc = nlohmann::json::parse(io::read_file(manifest));
            const auto& sh = doc.at("shape");
            if (!sh.is_array() || sh.size() != 3) throw ParseError(manifest + ": shape must be [channels, height, width]");
            Shape shape{sh[0].get<std::size_t>(), sh[1].get<std::size_t>(), sh[2].get<std::size_t>()};
            if (shape.size() != dim) throw ParseError(manifest + ": shape does not match column count");
            ds.shape = shape;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(manifest + ": " + e.what());
        }
    }
    return ds;
}

std::string dataset_to_csv(const Samples& data) {
    std::string out;
    if (data.empty()) return out;
    const std::size_t dim = data.front().input.size();
    const bool labeled = data.front().label.has_value();
    for (std::size_t j = 0; j < dim; ++j) out += (j ? ",x" : "x") + std::to_string(j);
    if (labeled) out += ",label";
    out += '\n';
    char buf[40];
    for (const auto& s : data) {
        for (std::size_t j = 0; j < dim; ++j) {
            if (j) out += ',';
            auto res = std::to_chars(buf, buf + sizeof buf, s.input[j], std::chars_format::general, 17);
            out.append(buf, res.ptr);
        }
        if (labeled) out += ',' + (s.label ? std::to_string(*s.label) : std::string());
        out += '\n';
    }
    return out;
}

void save_dataset(const Samples& data, const std::string& path, std::optional<Shape> shape) {
    io::write_file_atomic(path, dataset_to_csv(data));
    if (shape) {
        nlohmann::json doc{{"shape", {shape->channels, shape->height, shape->width}}};
        io::write_file_atomic(path + ".json", doc.dump() + "\n");
    }
}

}  // namespace nisp
