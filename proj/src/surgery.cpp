#include "nisp/surgery.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "nisp/error.hpp"
#include "nisp/ranking.hpp"

namespace nisp {

namespace {

using ChannelMask = std::vector<std::uint8_t>;

bool all_kept(const ChannelMask& m) {
    return std::all_of(m.begin(), m.end(), [](std::uint8_t b) { return b == 1; });
}

// Output-channel mask of every layer, nullopt where nothing is removed.
std::vector<std::optional<ChannelMask>> resolve_masks(const Network& net, const ImportancePlan& plan) {
    const std::size_t n = net.layers.size();
    const LayerGroups groups = layer_groups(net);
    std::map<std::size_t, ChannelMask> by_tie;

    for (const auto& lp : plan.layers) {
        if (lp.layer_id >= n) throw DomainError("plan entry for missing layer " + std::to_string(lp.layer_id));
        const Layer& layer = net.layers[lp.layer_id];
        const std::size_t channels = layer.output_shape().channels;
        if (lp.mask.size() != channels)
            throw ShapeError("plan mask for layer " + std::to_string(lp.layer_id) + " has " +
                             std::to_string(lp.mask.size()) + " entries, layer has " + std::to_string(channels) +
                             " channels");
        for (auto b : lp.mask)
            if (b > 1) throw DomainError("plan mask entries must be 0 or 1");
        if (!groups.prunable_head(lp.layer_id, net.frl_index)) {
            if (!all_kept(lp.mask))
                throw DomainError("plan prunes layer " + std::to_string(lp.layer_id) + ", which may not be pruned");
            continue;
        }
        if (std::none_of(lp.mask.begin(), lp.mask.end(), [](std::uint8_t b) { return b == 1; }))
            throw DomainError("plan removes every channel of layer " + std::to_string(lp.layer_id));
        auto [it, fresh] = by_tie.emplace(groups.tie[lp.layer_id], lp.mask);
        if (!fresh && it->second != lp.mask)
            throw DomainError("skip-tied layers disagree on their mask at layer " + std::to_string(lp.layer_id));
    }

    std::vector<std::optional<ChannelMask>> out(n);
    for (std::size_t l = 0; l < n; ++l) {
        const long h = groups.head[l];
        if (h < 0) continue;
        const auto head = static_cast<std::size_t>(h);
        if (!groups.prunable_head(head, net.frl_index)) continue;
        auto it = by_tie.find(groups.tie[head]);
        if (it == by_tie.end()) throw DomainError("plan is missing layer " + std::to_string(head));
        if (!all_kept(it->second)) out[l] = it->second;
    }
    return out;
}

std::vector<std::size_t> kept_indices(const std::optional<ChannelMask>& mask, std::size_t channels) {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < channels; ++c)
        if (!mask || (*mask)[c]) idx.push_back(c);
    return idx;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

// Largest odd window not exceeding the channel count.
std::size_t fit_lrn_window(std::size_t local, std::size_t channels) {
    if (local <= channels) return local;
    return channels % 2 == 1 ? channels : channels - 1;
}

}  // namespace

std::string surgery_report_csv(const SurgeryReport& report) {
    std::ostringstream os;
    os << "layer_id,kept,removed,params_before,params_after\n";
    for (const auto& r : report.rows)
        os << r.layer_id << ',' << r.kept << ',' << r.removed << ',' << r.params_before << ',' << r.params_after << '\n';
    return os.str();
}

std::pair<Network, SurgeryReport> apply_plan(const Network& net, const ImportancePlan& plan) {
    if (auto rep = validate(net); !rep.ok) throw ShapeError("apply_plan: invalid network\n" + rep.summary());
    const auto masks = resolve_masks(net, plan);
    const std::size_t n = net.layers.size();

    Network out;
    out.skip_edges = net.skip_edges;
    out.frl_index = net.frl_index;
    out.layers.reserve(n);
    SurgeryReport report;

    Shape in_shape = net.input_shape();
    std::vector<std::size_t> in_keep = kept_indices(std::nullopt, in_shape.channels);

    for (std::size_t l = 0; l < n; ++l) {
        const Layer& src = net.layers[l];
        const Shape out_shape = src.output_shape();
        const std::vector<std::size_t> out_keep = kept_indices(masks[l], out_shape.channels);
        Layer dst = src;

        switch (src.kind) {
            case LayerKind::Dense: {
                // Columns follow the flattened producer: channel c owns positions c·spatial ... + spatial.
                const std::size_t spatial = in_shape.spatial();
                std::vector<std::size_t> cols;
                for (auto c : in_keep)
                    for (std::size_t p = 0; p < spatial; ++p) cols.push_back(c * spatial + p);
                Matrix w(out_keep.size(), cols.size());
                for (std::size_t r = 0; r < out_keep.size(); ++r)
                    for (std::size_t j = 0; j < cols.size(); ++j) w(r, j) = src.weights(out_keep[r], cols[j]);
                dst.weights = std::move(w);
                dst.bias = pick(src.bias, out_keep);
                break;
            }
            case LayerKind::Conv2D: {
                const std::size_t k = src.geometry.kernel;
                dst.geometry.in_channels = in_keep.size();
                dst.geometry.out_channels = out_keep.size();
                dst.kernel.assign(out_keep.size() * in_keep.size() * k * k, 0.0);
                for (std::size_t a = 0; a < out_keep.size(); ++a)
                    for (std::size_t b = 0; b < in_keep.size(); ++b)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx)
                                dst.kernel_at(a, b, ky, kx) = src.kernel_at(out_keep[a], in_keep[b], ky, kx);
                dst.bias = pick(src.bias, out_keep);
                break;
            }
            case LayerKind::BatchNorm:
                dst.scale = pick(src.scale, out_keep);
                dst.bias = pick(src.bias, out_keep);
                [[fallthrough]];
            case LayerKind::Pool2D:
            case LayerKind::Activation:
            case LayerKind::LRN:
                if (in_keep.size() != out_keep.size())
                    throw ShapeError("apply_plan: channel-preserving layer " + std::to_string(l) +
                                     " would change its channel count");
                dst.geometry.in_channels = dst.geometry.out_channels = out_keep.size();
                if (src.kind == LayerKind::LRN) dst.lrn_local_size = fit_lrn_window(src.lrn_local_size, out_keep.size());
                break;
        }

        if (src.has_weights() || src.kind == LayerKind::BatchNorm) {
            SurgeryRow row{l, out_keep.size(), out_shape.channels - out_keep.size(), src.parameter_count(),
                           dst.parameter_count()};
            report.rows.push_back(row);
        }
        out.layers.push_back(std::move(dst));
        in_shape = out_shape;
        in_keep = out_keep;
    }

    report.params_before = net.parameter_count();
    report.params_after = out.parameter_count();
    if (auto rep = validate(out); !rep.ok)
        throw InvariantError("apply_plan produced an invalid network\n" + rep.summary());
    return {std::move(out), std::move(report)};
}

std::vector<Vec> masked_outputs(const Network& net, const ImportancePlan& plan) {
    const auto masks = resolve_masks(net, plan);
    std::vector<Vec> out(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!masks[l]) continue;
        const Shape s = net.layers[l].output_shape();
        out[l].assign(s.size(), 1.0);
        for (std::size_t c = 0; c < s.channels; ++c)
            if (!(*masks[l])[c]) std::fill_n(out[l].begin() + static_cast<long>(c * s.spatial()), s.spatial(), 0.0);
    }
    return out;
}

ImportancePlan nisp_plan(const Network& net, const Samples& data, const PruneConfig& cfg, double alpha) {
    const ResponseMatrix resp = batch_responses(net, data, net.frl_index);
    return nisp_backward(net, inffs_scores(build_affinity(resp, alpha)), cfg);
}

ImportancePlan random_plan(const Network& net, const PruneConfig& cfg, std::uint64_t seed) {
    cfg.check();
    const LayerGroups groups = layer_groups(net);
    std::mt19937_64 rng(seed);
    std::map<std::size_t, ChannelMask> by_tie;
    ImportancePlan plan;
    for (std::size_t l : prunable_layers(net)) {
        if (!groups.prunable_head(l, net.frl_index)) continue;
        const Shape shape = net.layers[l].output_shape();
        auto it = by_tie.find(groups.tie[l]);
        if (it == by_tie.end()) {
            std::vector<std::size_t> order(shape.channels);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            ChannelMask mask(shape.channels, 0);
            const std::size_t keep = cfg.kept_count(l, shape.channels);
            for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
            it = by_tie.emplace(groups.tie[l], std::move(mask)).first;
        }
        LayerPlan lp;
        lp.layer_id = l;
        lp.mask = it->second;
        lp.spatial = shape.spatial();
        lp.scores = lp.neuron_mask();
        if (net.layers[l].kind == LayerKind::Conv2D) lp.channel_scores = channel_scores(lp.scores, shape);
        plan.layers.push_back(std::move(lp));
    }
    return plan;
}

ImportancePlan magnitude_plan(const Network& net, const PruneConfig& cfg) {
    const std::size_t frl = net.frl_index;
    if (frl >= net.layers.size()) throw ShapeError("magnitude_plan: invalid network");
    std::size_t producer = frl;
    while (!net.layers[producer].has_weights()) {
        if (producer == 0) throw DomainError("magnitude_plan: no weighted layer at or before the final response layer");
        --producer;
    }
    const ImportanceVector raw = magnitude_scores(net, producer);
    // Spread each channel's magnitude over the final response's positions.
    const Shape from = net.layers[producer].output_shape();
    const Shape to = net.layers[frl].output_shape();
    if (from.channels != to.channels) throw ShapeError("magnitude_plan: channel count changes before the final response layer");
    ImportanceVector s_n{frl, Vec(to.size())};
    for (std::size_t c = 0; c < to.channels; ++c)
        std::fill_n(s_n.scores.begin() + static_cast<long>(c * to.spatial()), to.spatial(), raw.scores[c * from.spatial()]);
    return nisp_backward(net, s_n, cfg);
}

ImportancePlan lbl_plan(const Network& net, const Samples& data, const PruneConfig& cfg, double alpha) {
    cfg.check();
    const LayerGroups groups = layer_groups(net);
    const auto ids = prunable_layers(net);
    const auto scores = per_layer_scores(net, data, alpha);
    std::map<std::size_t, ChannelMask> by_tie;
    ImportancePlan plan;
    // Highest layer first so skip-tied sets take the mask of their top member, as nisp_backward does.
    for (std::size_t i = ids.size(); i-- > 0;) {
        const std::size_t l = ids[i];
        if (!groups.prunable_head(l, net.frl_index)) continue;
        const Shape shape = net.layers[l].output_shape();
        LayerPlan lp;
        lp.layer_id = l;
        lp.spatial = shape.spatial();
        lp.scores = scores[i].scores;
        const Vec per_channel = channel_scores(lp.scores, shape);
        if (net.layers[l].kind == LayerKind::Conv2D) lp.channel_scores = per_channel;
        auto it = by_tie.find(groups.tie[l]);
        if (it == by_tie.end())
            it = by_tie.emplace(groups.tie[l], prune_indicator(per_channel, cfg.kept_count(l, shape.channels), l).mask).first;
        lp.mask = it->second;
        for (std::size_t c = 0; c < shape.channels; ++c)
            if (!lp.mask[c]) std::fill_n(lp.scores.begin() + static_cast<long>(c * lp.spatial), lp.spatial, 0.0);
        plan.layers.push_back(std::move(lp));
    }
    std::reverse(plan.layers.begin(), plan.layers.end());
    return plan;
}

}  // namespace nisp
