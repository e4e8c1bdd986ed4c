#include "nisp/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "nisp/error.hpp"
#include "nisp/kernels.hpp"

namespace nisp {

namespace {

void require_non_negative(std::span<const double> s, const char* who) {
    for (double v : s)
        if (!(v >= 0.0)) throw DomainError(std::string(who) + ": importance must be finite and non-negative");
}

void require_window_geometry(const Geometry& g, const char* who) {
    auto y = g.expected_out_size();
    if (!y || *y != g.out_size || g.stride == 0)
        throw ShapeError(std::string(who) + ": geometry violates Y = floor((X+2p-k)/s)+1");
}

}  // namespace

Vec propagate_dense(const Matrix& w, std::span<const double> s_out) {
    require_non_negative(s_out, "propagate_dense");
    return kernels::omp::dense_importance(w, s_out);
}

Vec propagate_conv(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out) {
    require_window_geometry(g, "propagate_conv");
    require_non_negative(s_out, "propagate_conv");
    return kernels::omp::conv_importance(g, kernel, s_out);
}

Vec propagate_pool(const Geometry& g, std::span<const double> s_out) {
    require_window_geometry(g, "propagate_pool");
    require_non_negative(s_out, "propagate_pool");
    return kernels::omp::pool_importance(g, s_out);
}

Vec propagate_lrn(std::size_t local_size, std::size_t channels, std::size_t spatial,
                  std::span<const double> s_out) {
    require_non_negative(s_out, "propagate_lrn");
    return kernels::omp::lrn_importance(channels, spatial, local_size, s_out);
}

Vec propagate_identity(std::span<const double> s_out) { return Vec(s_out.begin(), s_out.end()); }

Vec propagate_layer(const Layer& layer, std::span<const double> s_out) {
    if (s_out.size() != layer.output_shape().size()) throw ShapeError("propagate_layer: importance width mismatch");
    switch (layer.kind) {
        case LayerKind::Dense: return propagate_dense(layer.weights, s_out);
        case LayerKind::Conv2D: return propagate_conv(layer.geometry, layer.kernel, s_out);
        case LayerKind::Pool2D: return propagate_pool(layer.geometry, s_out);
        case LayerKind::LRN:
            return propagate_lrn(layer.lrn_local_size, layer.geometry.in_channels,
                                 layer.geometry.in_size * layer.geometry.in_size, s_out);
        case LayerKind::BatchNorm:
        case LayerKind::Activation: return propagate_identity(s_out);
    }
    throw DomainError("propagate_layer: unsupported layer kind");
}

Vec channel_scores(std::span<const double> scores, const Shape& shape) {
    if (scores.size() != shape.size()) throw ShapeError("channel_scores: score count does not match shape");
    Vec out(shape.channels, 0.0);
    const std::size_t spatial = shape.spatial();
    for (std::size_t c = 0; c < shape.channels; ++c)
        for (std::size_t p = 0; p < spatial; ++p) out[c] += scores[c * spatial + p];
    return out;
}

PropagationMatrix bp_conv_matrix(const Geometry& g, std::span<const double> kernel) {
    require_window_geometry(g, "bp_conv_matrix");
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (kernel.size() != k * k * g.in_channels * g.out_channels) throw ShapeError("bp_conv_matrix: kernel size");
    PropagationMatrix bp(g.out_channels * Y * Y, g.in_channels * X * X);
    for (std::size_t f = 0; f < g.out_channels; ++f)
        for (std::size_t n = 0; n < g.in_channels; ++n) {
            // Block (oy, iy) of BP^{fn} is b_ky when iy = oy·s + ky − p lands inside the map.
            for (std::size_t oy = 0; oy < Y; ++oy)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long>(X)) continue;
                    // b_ky: row ox carries k_fn[ky][0..k) starting at column ox·s − p.
                    for (std::size_t ox = 0; ox < Y; ++ox)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                            if (ix < 0 || ix >= static_cast<long>(X)) continue;
                            const std::size_t row = (f * Y + oy) * Y + ox;
                            const std::size_t col = (n * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix);
                            bp(row, col) += std::fabs(kernel[((f * g.in_channels + n) * k + ky) * k + kx]);
                        }
                }
        }
    return bp;
}

PropagationMatrix bp_pool_matrix(const Geometry& g) {
    require_window_geometry(g, "bp_pool_matrix");
    if (g.in_channels != g.out_channels) throw ShapeError("bp_pool_matrix: pooling keeps channel count");
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    const double share = 1.0 / static_cast<double>(k * k);
    PropagationMatrix bp(g.out_channels * Y * Y, g.in_channels * X * X);
    for (std::size_t c = 0; c < g.in_channels; ++c)
        for (std::size_t oy = 0; oy < Y; ++oy)
            for (std::size_t ky = 0; ky < k; ++ky) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                if (iy < 0 || iy >= static_cast<long>(X)) continue;
                for (std::size_t ox = 0; ox < Y; ++ox)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                        if (ix < 0 || ix >= static_cast<long>(X)) continue;
                        bp((c * Y + oy) * Y + ox, (c * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)) += share;
                    }
            }
    return bp;
}

PropagationMatrix bp_lrn_matrix(std::size_t local_size, std::size_t channels, std::size_t spatial) {
    if (local_size == 0 || local_size % 2 == 0 || local_size > channels)
        throw DomainError("bp_lrn_matrix: local size must be odd and at most the channel count");
    const std::size_t half = (local_size - 1) / 2;
    const double share = 1.0 / static_cast<double>(local_size);
    PropagationMatrix bp(channels * spatial, channels * spatial);
    for (std::size_t p = 0; p < spatial; ++p)
        for (std::size_t out = 0; out < channels; ++out)
            for (std::size_t in = 0; in < channels; ++in) {
                const std::size_t gap = out > in ? out - in : in - out;
                if (gap <= half) bp(out * spatial + p, in * spatial + p) = share;
            }
    return bp;
}

PropagationMatrix propagation_matrix(const Layer& layer) {
    switch (layer.kind) {
        case LayerKind::Dense: return elementwise_abs(layer.weights);
        case LayerKind::Conv2D: return bp_conv_matrix(layer.geometry, layer.kernel);
        case LayerKind::Pool2D: return bp_pool_matrix(layer.geometry);
        case LayerKind::LRN:
            return bp_lrn_matrix(layer.lrn_local_size, layer.geometry.in_channels,
                                 layer.geometry.in_size * layer.geometry.in_size);
        case LayerKind::BatchNorm:
        case LayerKind::Activation: return Matrix::identity(layer.output_shape().size());
    }
    throw DomainError("propagation_matrix: unsupported layer kind");
}

std::size_t PruneIndicator::kept() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

PruneConfig PruneConfig::uniform(const Network& net, double fraction) {
    PruneConfig cfg;
    for (std::size_t id : prunable_layers(net)) cfg.keep_fraction[id] = fraction;
    cfg.check();
    return cfg;
}

double PruneConfig::fraction(std::size_t layer_id) const {
    auto it = keep_fraction.find(layer_id);
    return it == keep_fraction.end() ? 1.0 : it->second;
}

std::size_t PruneConfig::kept_count(std::size_t layer_id, std::size_t width) const {
    const double f = fraction(layer_id);
    const auto n = static_cast<std::size_t>(std::llround(f * static_cast<double>(width)));
    return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(width, 1));
}

void PruneConfig::check() const {
    for (const auto& [id, f] : keep_fraction)
        if (!(f > 0.0 && f <= 1.0))
            throw DomainError("keep fraction for layer " + std::to_string(id) + " must lie in (0, 1]");
}

PruneIndicator prune_indicator(std::span<const double> scores, std::size_t keep, std::size_t layer_id) {
    if (keep < 1 || keep > scores.size())
        throw DomainError("prune_indicator: keep count " + std::to_string(keep) + " outside [1, " +
                          std::to_string(scores.size()) + "]");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    PruneIndicator ind{layer_id, std::vector<std::uint8_t>(scores.size(), 0)};
    for (std::size_t i = 0; i < keep; ++i) ind.mask[order[i]] = 1;
    return ind;
}

bool LayerGroups::prunable_head(std::size_t layer, std::size_t frl_index) const {
    return layer <= frl_index && head[layer] == static_cast<long>(layer) && !locked[layer];
}

LayerGroups layer_groups(const Network& net) {
    const std::size_t n = net.layers.size();
    LayerGroups g{std::vector<long>(n, -1), std::vector<std::size_t>(n), std::vector<bool>(n, false)};
    long current = -1;
    for (std::size_t l = 0; l < n; ++l) {
        if (net.layers[l].has_weights()) current = static_cast<long>(l);
        g.head[l] = current;
    }
    std::iota(g.tie.begin(), g.tie.end(), std::size_t{0});
    // Layers following the input form pseudo-group n (never prunable).
    std::vector<bool> root_locked(n + 1, false);
    std::vector<std::size_t> parent(n + 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto group_of = [&](std::size_t layer) {
        return g.head[layer] < 0 ? n : static_cast<std::size_t>(g.head[layer]);
    };
    for (const auto& e : net.skip_edges) {
        if (e.source >= n || e.merge >= n) continue;
        const std::size_t a = root(group_of(e.source)), b = root(group_of(e.merge));
        if (a != b) parent[std::min(a, b)] = std::max(a, b);
    }
    root_locked[root(n)] = true;
    for (std::size_t l = 0; l < n; ++l)
        if (g.head[l] == static_cast<long>(l) && l > net.frl_index) root_locked[root(l)] = true;
    for (std::size_t l = 0; l < n; ++l) {
        if (g.head[l] != static_cast<long>(l)) continue;
        const std::size_t r = root(l);
        // Representative: highest head of the set; the input pseudo-group maps to itself.
        g.tie[l] = r == n ? l : r;
        g.locked[l] = root_locked[r];
    }
    return g;
}

Vec LayerPlan::neuron_mask() const {
    Vec out(mask.size() * spatial);
    for (std::size_t c = 0; c < mask.size(); ++c)
        std::fill_n(out.begin() + static_cast<long>(c * spatial), spatial, mask[c] ? 1.0 : 0.0);
    return out;
}

std::size_t LayerPlan::kept() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

const LayerPlan* ImportancePlan::find(std::size_t layer_id) const {
    for (const auto& lp : layers)
        if (lp.layer_id == layer_id) return &lp;
    return nullptr;
}

ImportancePlan nisp_backward(const Network& net, const ImportanceVector& s_n, const PruneConfig& cfg) {
    cfg.check();
    const std::size_t n = net.layers.size();
    const std::size_t frl = net.frl_index;
    if (n == 0 || frl >= n) throw ShapeError("nisp_backward: invalid network");
    if (s_n.layer_id != frl)
        throw DomainError("nisp_backward: scores belong to layer " + std::to_string(s_n.layer_id) +
                          ", final response layer is " + std::to_string(frl));
    if (s_n.scores.size() != net.layers[frl].output_shape().size())
        throw ShapeError("nisp_backward: score count does not match the final response width");
    require_non_negative(s_n.scores, "nisp_backward");

    const LayerGroups groups = layer_groups(net);
    // pending[t]: importance accumulated for trace slot t (t = l + 1 is layer l's output).
    std::vector<Vec> pending(frl + 2);
    for (std::size_t l = 0; l <= frl; ++l) pending[l + 1].assign(net.layers[l].output_shape().size(), 0.0);
    pending[0].assign(net.input_shape().size(), 0.0);
    pending[frl + 1] = s_n.scores;

    std::map<std::size_t, std::vector<std::uint8_t>> tie_masks;
    auto decided_mask = [&](std::size_t layer) -> const std::vector<std::uint8_t>* {
        const long h = groups.head[layer];
        if (h < 0 || groups.locked[static_cast<std::size_t>(h)]) return nullptr;
        auto it = tie_masks.find(groups.tie[static_cast<std::size_t>(h)]);
        return it == tie_masks.end() ? nullptr : &it->second;
    };

    ImportancePlan plan;
    plan.importance.resize(frl + 1);
    for (std::size_t li = frl + 1; li-- > 0;) {
        const Layer& layer = net.layers[li];
        const Shape shape = layer.output_shape();
        Vec s = std::move(pending[li + 1]);
        plan.importance[li] = s;

        if (groups.prunable_head(li, frl)) {
            LayerPlan lp;
            lp.layer_id = li;
            lp.spatial = shape.spatial();
            const Vec per_channel = channel_scores(s, shape);
            if (layer.kind == LayerKind::Conv2D) lp.channel_scores = per_channel;
            const std::size_t tie = groups.tie[li];
            auto it = tie_masks.find(tie);
            if (it == tie_masks.end()) {
                const std::size_t keep = cfg.kept_count(li, shape.channels);
                it = tie_masks.emplace(tie, prune_indicator(per_channel, keep, li).mask).first;
            }
            lp.mask = it->second;
            for (std::size_t c = 0; c < shape.channels; ++c)
                if (!lp.mask[c]) std::fill_n(s.begin() + static_cast<long>(c * lp.spatial), lp.spatial, 0.0);
            lp.scores = s;
            plan.layers.push_back(std::move(lp));
        } else if (const auto* mask = decided_mask(li)) {
            // Follower whose channel mask was fixed by a skip-tied group above.
            const std::size_t spatial = shape.spatial();
            for (std::size_t c = 0; c < shape.channels; ++c)
                if (!(*mask)[c]) std::fill_n(s.begin() + static_cast<long>(c * spatial), spatial, 0.0);
        }

        for (const auto& e : net.skip_edges)
            if (e.merge == li) {
                Vec& dst = pending[e.source + 1];
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s[i];
            }

        const Vec s_in = propagate_layer(layer, s);
        Vec& dst = pending[li];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s_in[i];
    }
    plan.input_importance = std::move(pending[0]);
    std::reverse(plan.layers.begin(), plan.layers.end());
    return plan;
}

ImportanceVector importance_closed_form(const Network& net, const ImportanceVector& s_n, std::size_t k) {
    const std::size_t frl = net.frl_index;
    if (frl >= net.layers.size()) throw ShapeError("importance_closed_form: invalid network");
    if (k > frl) throw DomainError("importance_closed_form: target layer lies above the final response layer");
    if (s_n.scores.size() != net.layers[frl].output_shape().size())
        throw ShapeError("importance_closed_form: score count does not match the final response width");
    for (const auto& e : net.skip_edges)
        if (e.merge > k && e.merge <= frl)
            throw DomainError("importance_closed_form: skip edges inside the chain are not supported");

    if (k == frl) return {k, s_n.scores};
    // W = BP_frl · BP_{frl−1} ··· BP_{k+1}  (out_frl × out_k)
    Matrix w = propagation_matrix(net.layers[frl]);
    for (std::size_t l = frl; l-- > k + 1;) w = matmul(w, propagation_matrix(net.layers[l]));
    if (w.cols() != net.layers[k].output_shape().size()) throw ShapeError("importance_closed_form: dimension mismatch");
    return {k, matvec(w.transposed(), s_n.scores)};
}

namespace {

using nlohmann::json;

json to_json_array(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

}  // namespace

std::string plan_to_json(const ImportancePlan& plan) {
    json layers = json::array();
    for (const auto& lp : plan.layers) {
        json entry;
        entry["layer_id"] = lp.layer_id;
        entry["scores"] = to_json_array(lp.scores);
        json mask = json::array();
        for (auto m : lp.mask) mask.push_back(static_cast<int>(m));
        entry["mask"] = std::move(mask);
        if (!lp.channel_scores.empty()) entry["channel_scores"] = to_json_array(lp.channel_scores);
        layers.push_back(std::move(entry));
    }
    json doc;
    doc["layers"] = std::move(layers);
    return doc.dump(1) + "\n";
}

ImportancePlan plan_from_json(std::string_view text) {
    ImportancePlan plan;
    try {
        const json doc = json::parse(text);
        for (const auto& entry : doc.at("layers")) {
            LayerPlan lp;
            lp.layer_id = entry.at("layer_id").get<std::size_t>();
            lp.scores = entry.at("scores").get<Vec>();
            for (const auto& m : entry.at("mask")) {
                const int bit = m.get<int>();
                if (bit != 0 && bit != 1) throw ParseError("plan: mask entries must be 0 or 1");
                lp.mask.push_back(static_cast<std::uint8_t>(bit));
            }
            if (auto it = entry.find("channel_scores"); it != entry.end()) lp.channel_scores = it->get<Vec>();
            if (lp.mask.empty() || lp.scores.size() % lp.mask.size() != 0)
                throw ParseError("plan: scores do not divide evenly into mask channels");
            lp.spatial = lp.scores.size() / lp.mask.size();
            plan.layers.push_back(std::move(lp));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("plan: ") + e.what());
    }
    return plan;
}

}  // namespace nisp
