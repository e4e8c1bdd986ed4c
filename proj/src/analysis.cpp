#include "nisp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "nisp/error.hpp"

namespace nisp {

double ware(const Network& orig, const Network& approx, const Samples& data, const ImportanceVector& s_n,
            const PruneIndicator& kept) {
    if (data.empty()) throw DomainError("ware: empty dataset");
    const std::size_t frl = orig.frl_index;
    if (approx.frl_index != frl || approx.layers.size() != orig.layers.size())
        throw ShapeError("ware: networks have different layer structure");
    const Shape shape = orig.layers[frl].output_shape();
    if (s_n.scores.size() != shape.size()) throw ShapeError("ware: score count does not match the final response width");
    if (kept.mask.size() != shape.channels) throw ShapeError("ware: mask does not match the final response channels");

    // Position of each retained neuron in the original and in the approximating response.
    std::vector<std::size_t> src, dst;
    const std::size_t spatial = shape.spatial();
    for (std::size_t c = 0, packed = 0; c < shape.channels; ++c) {
        if (!kept.mask[c]) continue;
        for (std::size_t p = 0; p < spatial; ++p) {
            src.push_back(c * spatial + p);
            dst.push_back(packed * spatial + p);
        }
        ++packed;
    }
    if (src.empty()) throw DomainError("ware: no retained neurons");
    const std::size_t approx_width = approx.layers[frl].output_shape().size();
    if (approx_width == shape.size())
        dst = src;
    else if (approx_width != src.size())
        throw ShapeError("ware: approximating network's final response width matches neither the original nor the kept count");

    const ResponseMatrix y = batch_responses(orig, data, frl);
    const ResponseMatrix y_hat = batch_responses(approx, data, frl);
    double total = 0.0;
    for (std::size_t m = 0; m < data.size(); ++m)
        for (std::size_t t = 0; t < src.size(); ++t) {
            const double yv = y.values(m, src[t]);
            total += s_n.scores[src[t]] * std::fabs(y_hat.values(m, dst[t]) - yv) / std::max(std::fabs(yv), kWareEpsilon);
        }
    return total / (static_cast<double>(data.size()) * static_cast<double>(src.size()));
}

BoundReport verify_bound(const Network& net, std::size_t layer, const Samples& data, const ImportanceVector& s_n,
                         std::span<const double> keep) {
    const std::size_t frl = net.frl_index;
    if (frl >= net.layers.size()) throw ShapeError("verify_bound: invalid network");
    if (layer > frl) throw DomainError("verify_bound: layer lies above the final response layer");
    if (data.empty()) throw DomainError("verify_bound: empty dataset");
    const std::size_t width = net.layers[layer].output_shape().size();
    if (keep.size() != width) throw ShapeError("verify_bound: mask width does not match the layer output");
    if (s_n.scores.size() != net.layers[frl].output_shape().size())
        throw ShapeError("verify_bound: score count does not match the final response width");
    for (double b : keep)
        if (b != 0.0 && b != 1.0) throw DomainError("verify_bound: mask entries must be 0 or 1");
    for (double v : s_n.scores)
        if (!(v >= 0.0)) throw DomainError("verify_bound: importance must be non-negative");
    for (const auto& e : net.skip_edges)
        if (e.merge > layer && e.merge <= frl) throw DomainError("verify_bound: skip edges inside the chain are not supported");

    BoundReport rep;
    for (std::size_t l = layer + 1; l <= frl; ++l) {
        const Layer& f = net.layers[l];
        const bool supported = f.kind == LayerKind::Dense || f.kind == LayerKind::Conv2D ||
                               f.kind == LayerKind::Activation ||
                               (f.kind == LayerKind::Pool2D && f.pool_mode == PoolMode::Average);
        if (!supported)
            throw DomainError("verify_bound: layer " + std::to_string(l) + " (" + std::string(to_string(f.kind)) +
                              ") has no linear Lipschitz majorant");
        rep.c_sigma_product *= lipschitz_constant(f.activation);
    }

    rep.r_vector = s_n.scores;
    for (std::size_t l = frl; l > layer; --l) rep.r_vector = propagate_layer(net.layers[l], rep.r_vector);

    const ResponseMatrix x = batch_responses(net, data, layer);
    Vec column_abs(width, 0.0);
    for (std::size_t m = 0; m < data.size(); ++m)
        for (std::size_t i = 0; i < width; ++i) column_abs[i] += std::fabs(x.values(m, i));
    rep.c_x = *std::max_element(column_abs.begin(), column_abs.end());

    double pruned_r = 0.0;
    for (std::size_t i = 0; i < width; ++i) pruned_r += rep.r_vector[i] * (1.0 - keep[i]);
    rep.rhs = rep.c_sigma_product * rep.c_x * pruned_r;

    std::optional<SubNetwork> tail;
    if (layer < frl) tail = slice(net, layer + 1, frl);
    for (std::size_t m = 0; m < data.size(); ++m) {
        const auto row = x.values.row(m);
        Vec full(row.begin(), row.end());
        Vec masked(width);
        for (std::size_t i = 0; i < width; ++i) masked[i] = keep[i] * full[i];
        if (tail) {
            full = forward(*tail, full);
            masked = forward(*tail, masked);
        }
        for (std::size_t j = 0; j < full.size(); ++j) rep.lhs += s_n.scores[j] * std::fabs(full[j] - masked[j]);
    }
    rep.holds = rep.lhs <= rep.rhs * (1.0 + kBoundSlack);
    return rep;
}

std::string bound_report_json(const BoundReport& r) {
    nlohmann::json doc;
    doc["lhs"] = r.lhs;
    doc["rhs"] = r.rhs;
    doc["c_sigma_product"] = r.c_sigma_product;
    doc["c_x"] = r.c_x;
    doc["r_vector"] = r.r_vector;
    doc["holds"] = r.holds;
    return doc.dump(1) + "\n";
}

CostReport count_cost(const Network& net) {
    CostReport rep;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        LayerCost c{l, std::string(to_string(layer.kind)), 0, layer.parameter_count()};
        const Geometry& g = layer.geometry;
        switch (layer.kind) {
            case LayerKind::Dense: c.flops = 2 * layer.weights.rows() * layer.weights.cols(); break;
            case LayerKind::Conv2D:
                c.flops = 2 * g.kernel * g.kernel * g.in_channels * g.out_channels * g.out_size * g.out_size;
                break;
            default: c.flops = layer.output_shape().size(); break;
        }
        rep.total_flops += c.flops;
        rep.total_params += c.params;
        rep.layers.push_back(std::move(c));
    }
    return rep;
}

CostReduction cost_reduction(const CostReport& reference, const CostReport& pruned) {
    auto pct = [](std::size_t before, std::size_t after) {
        if (before == 0) return 0.0;
        const double v = 100.0 * (1.0 - static_cast<double>(after) / static_cast<double>(before));
        return std::clamp(v, 0.0, 100.0);
    };
    return {pct(reference.total_flops, pruned.total_flops), pct(reference.total_params, pruned.total_params)};
}

std::string cost_report_csv(const CostReport& report) {
    std::ostringstream os;
    os << "layer_id,kind,flops,params\n";
    for (const auto& c : report.layers) os << c.layer_id << ',' << c.kind << ',' << c.flops << ',' << c.params << '\n';
    return os.str();
}

std::string cost_report_json(const CostReport& report, const CostReduction* reduction) {
    nlohmann::json doc;
    doc["total_flops"] = report.total_flops;
    doc["total_params"] = report.total_params;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& c : report.layers)
        layers.push_back({{"layer_id", c.layer_id}, {"kind", c.kind}, {"flops", c.flops}, {"params", c.params}});
    doc["layers"] = std::move(layers);
    if (reduction) {
        doc["flops_reduction_percent"] = reduction->flops_percent;
        doc["params_reduction_percent"] = reduction->params_percent;
    }
    return doc.dump(1) + "\n";
}

PcaEnergy pca_energy(const ResponseMatrix& resp, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("pca_energy: threshold must lie in (0, 1]");
    const std::size_t m = resp.values.rows(), n = resp.values.cols();
    if (m < 2) throw DomainError("pca_energy: need at least 2 samples");
    if (n == 0) throw DomainError("pca_energy: no features");

    Eigen::MatrixXd x(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) x(i, j) = resp.values(i, j);
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericError("pca_energy: eigen decomposition failed");

    PcaEnergy out;
    out.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.eigenvalues[i] = std::max(0.0, eig.eigenvalues()(static_cast<long>(n - 1 - i)));
    double total = 0.0;
    for (double v : out.eigenvalues) total += v;
    // Centering constant columns can leave rounding noise instead of exact zeros.
    const double peak = std::max(1.0, resp.values.data().empty() ? 0.0 : std::pow(*std::max_element(resp.values.data().begin(), resp.values.data().end(), [](double a, double b) { return std::fabs(a) < std::fabs(b); }), 2));
    if (total <= 1e-24 * peak) {
        out.degenerate = true;
        return out;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += out.eigenvalues[k];
        if (acc / total >= threshold * (1.0 - 1e-12)) {  // forgive rounding in the running sum
            out.components = k + 1;
            return out;
        }
    }
    out.components = n;
    return out;
}

}  // namespace nisp
