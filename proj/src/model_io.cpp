#include <charconv>
#include <cmath>
#include <string>

#include <json.hpp>

#include "nisp/error.hpp"
#include "nisp/io.hpp"
#include "nisp/model.hpp"

namespace nisp {

namespace {

using nlohmann::json;

// Shortest output is not required; 17 significant digits always round-trips a double.
void append_number(std::string& out, double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

void append_uint(std::string& out, std::size_t v) { out += std::to_string(v); }

void append_array(std::string& out, std::span<const double> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_number(out, values[i]);
    }
    out += ']';
}

void append_string(std::string& out, std::string_view s) {
    out += '"';
    out += s;
    out += '"';
}

void append_geometry(std::string& out, const Geometry& g) {
    out += "{\"in_size\":";
    append_uint(out, g.in_size);
    out += ",\"out_size\":";
    append_uint(out, g.out_size);
    out += ",\"kernel\":";
    append_uint(out, g.kernel);
    out += ",\"stride\":";
    append_uint(out, g.stride);
    out += ",\"padding\":";
    append_uint(out, g.padding);
    out += ",\"in_channels\":";
    append_uint(out, g.in_channels);
    out += ",\"out_channels\":";
    append_uint(out, g.out_channels);
    out += '}';
}

// Dense: [out][in]. Conv2D: [ky][kx][c_in][c_out]. BatchNorm: per-channel scale.
void append_weights(std::string& out, const Layer& layer) {
    switch (layer.kind) {
        case LayerKind::Dense: {
            out += '[';
            for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
                if (r) out += ',';
                append_array(out, layer.weights.row(r));
            }
            out += ']';
            break;
        }
        case LayerKind::Conv2D: {
            const Geometry& g = layer.geometry;
            out += '[';
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
                if (ky) out += ',';
                out += '[';
                for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                    if (kx) out += ',';
                    out += '[';
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                        if (ci) out += ',';
                        out += '[';
                        for (std::size_t co = 0; co < g.out_channels; ++co) {
                            if (co) out += ',';
                            append_number(out, layer.kernel_at(co, ci, ky, kx));
                        }
                        out += ']';
                    }
                    out += ']';
                }
                out += ']';
            }
            out += ']';
            break;
        }
        case LayerKind::BatchNorm: append_array(out, layer.scale); break;
        default: out += "[]"; break;
    }
}

std::size_t get_uint(const json& obj, const char* key, std::size_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned()) throw ParseError(std::string("field '") + key + "' must be a non-negative integer");
    return it->get<std::size_t>();
}

double get_double(const json& v) {
    if (!v.is_number()) throw ParseError("expected a number");
    return v.get<double>();
}

Vec get_vector(const json& v, const char* what) {
    if (!v.is_array()) throw ParseError(std::string(what) + " must be an array");
    Vec out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(get_double(x));
    return out;
}

Geometry parse_geometry(const json& obj) {
    if (!obj.is_object()) throw ParseError("geometry must be an object");
    Geometry g;
    g.in_size = get_uint(obj, "in_size", 1);
    g.out_size = get_uint(obj, "out_size", 1);
    g.kernel = get_uint(obj, "kernel", 1);
    g.stride = get_uint(obj, "stride", 1);
    g.padding = get_uint(obj, "padding", 0);
    g.in_channels = get_uint(obj, "in_channels", 0);
    g.out_channels = get_uint(obj, "out_channels", 0);
    return g;
}

Layer parse_layer(const json& obj, std::size_t id) {
    const std::string where = "layer " + std::to_string(id) + ": ";
    if (!obj.is_object()) throw ParseError(where + "not an object");
    auto kind_it = obj.find("kind");
    if (kind_it == obj.end() || !kind_it->is_string()) throw ParseError(where + "missing kind");
    auto kind = parse_layer_kind(kind_it->get<std::string>());
    if (!kind) throw ParseError(where + "unknown kind '" + kind_it->get<std::string>() + "'");

    Layer layer;
    layer.kind = *kind;
    if (auto it = obj.find("activation"); it != obj.end()) {
        if (!it->is_string()) throw ParseError(where + "activation must be a string");
        auto act = parse_activation_kind(it->get<std::string>());
        if (!act) throw ParseError(where + "unknown activation '" + it->get<std::string>() + "'");
        layer.activation = *act;
    }
    if (auto it = obj.find("pool"); it != obj.end()) {
        auto mode = it->is_string() ? parse_pool_mode(it->get<std::string>()) : std::nullopt;
        if (!mode) throw ParseError(where + "pool must be \"max\" or \"avg\"");
        layer.pool_mode = *mode;
    }
    layer.lrn_local_size = get_uint(obj, "local_size", 1);
    if (auto it = obj.find("bias"); it != obj.end()) layer.bias = get_vector(*it, "bias");
    if (layer.kind != LayerKind::Dense) {
        auto it = obj.find("geometry");
        if (it == obj.end()) throw ParseError(where + "missing geometry");
        layer.geometry = parse_geometry(*it);
    }

    const json empty = json::array();
    auto wit = obj.find("weights");
    const json& w = wit == obj.end() ? empty : *wit;
    if (!w.is_array()) throw ParseError(where + "weights must be an array");

    try {
        switch (layer.kind) {
            case LayerKind::Dense: {
                const std::size_t rows = w.size();
                const std::size_t cols = rows ? w.at(0).size() : 0;
                layer.weights = Matrix(rows, cols);
                for (std::size_t r = 0; r < rows; ++r) {
                    Vec row = get_vector(w[r], "weight row");
                    if (row.size() != cols) throw ParseError(where + "ragged weight matrix");
                    std::copy(row.begin(), row.end(), layer.weights.row(r).begin());
                }
                break;
            }
            case LayerKind::Conv2D: {
                const Geometry& g = layer.geometry;
                layer.kernel.assign(g.kernel * g.kernel * g.in_channels * g.out_channels, 0.0);
                if (w.size() != g.kernel) throw ParseError(where + "kernel height != k");
                for (std::size_t ky = 0; ky < g.kernel; ++ky) {
                    if (w[ky].size() != g.kernel) throw ParseError(where + "kernel width != k");
                    for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                        if (w[ky][kx].size() != g.in_channels) throw ParseError(where + "kernel depth != C_in");
                        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                            Vec outs = get_vector(w[ky][kx][ci], "kernel");
                            if (outs.size() != g.out_channels) throw ParseError(where + "kernel fan-out != C_out");
                            for (std::size_t co = 0; co < g.out_channels; ++co)
                                layer.kernel_at(co, ci, ky, kx) = outs[co];
                        }
                    }
                }
                break;
            }
            case LayerKind::BatchNorm: layer.scale = get_vector(w, "scale"); break;
            default: break;
        }
    } catch (const json::exception& e) {
        throw ParseError(where + e.what());
    }
    return layer;
}

}  // namespace

std::string save_model(const Network& net) {
    auto report = validate(net);
    if (!report.ok) throw ShapeError("refusing to save invalid model:\n" + report.summary());
    std::string out = "{\"layers\":[\n";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        out += i ? ",\n" : "";
        out += "{\"kind\":";
        append_string(out, to_string(layer.kind));
        out += ",\"activation\":";
        append_string(out, to_string(layer.activation));
        if (layer.kind == LayerKind::Pool2D) {
            out += ",\"pool\":";
            append_string(out, to_string(layer.pool_mode));
        }
        if (layer.kind == LayerKind::LRN) {
            out += ",\"local_size\":";
            append_uint(out, layer.lrn_local_size);
        }
        if (layer.kind != LayerKind::Dense) {
            out += ",\"geometry\":";
            append_geometry(out, layer.geometry);
        }
        out += ",\"weights\":";
        append_weights(out, layer);
        out += ",\"bias\":";
        append_array(out, layer.bias);
        out += '}';
    }
    out += "\n],\n\"skip_edges\":[";
    for (std::size_t i = 0; i < net.skip_edges.size(); ++i) {
        if (i) out += ',';
        out += '[';
        append_uint(out, net.skip_edges[i].source);
        out += ',';
        append_uint(out, net.skip_edges[i].merge);
        out += ']';
    }
    out += "],\n\"frl_index\":";
    append_uint(out, net.frl_index);
    out += "}\n";
    return out;
}

Network load_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model: top level must be an object");
    auto layers = doc.find("layers");
    if (layers == doc.end() || !layers->is_array()) throw ParseError("model: missing layers array");

    Network net;
    for (std::size_t i = 0; i < layers->size(); ++i) net.layers.push_back(parse_layer((*layers)[i], i));

    if (auto it = doc.find("skip_edges"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("model: skip_edges must be an array");
        for (const auto& e : *it) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
                throw ParseError("model: skip edge must be [source, merge]");
            net.skip_edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
        }
    }
    auto frl = doc.find("frl_index");
    if (frl == doc.end() || !frl->is_number_unsigned()) throw ParseError("model: missing frl_index");
    net.frl_index = frl->get<std::size_t>();

    auto report = validate(net);
    if (!report.ok) throw ShapeError("model failed validation:\n" + report.summary());
    return net;
}

Network load_model_file(const std::string& path) { return load_model(io::read_file(path)); }

void save_model_file(const Network& net, const std::string& path) {
    io::write_file_atomic(path, save_model(net));
}

}  // namespace nisp
