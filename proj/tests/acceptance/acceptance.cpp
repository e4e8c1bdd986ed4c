// One pass/fail line per primary acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "builders.hpp"
#include "nisp/analysis.hpp"
#include "nisp/propagation.hpp"
#include "nisp/ranking.hpp"
#include "nisp/surgery.hpp"
#include "nisp/trainer.hpp"
#include "oracles.hpp"

using namespace nisp;
using namespace nisp::testing;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleRelTol = 1e-9;
constexpr double kTripleAbsTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kSeriesTol = 1e-8;
constexpr int kSeriesTerms = 200;

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::vector<ActivationKind> kSmoothAndRelu{ActivationKind::ReLU, ActivationKind::Sigmoid, ActivationKind::Tanh};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

ImportanceVector random_scores(Rng& rng, const Network& net) {
    return {net.frl_index, random_vec(rng, net.layers[net.frl_index].output_shape().size(), 0, 1)};
}

Outcome oracle_equivalence() {
    Rng rng(1001);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Network net = random_dense_net(rng, 5, 16, kSmoothAndRelu);
        const auto s_n = random_scores(rng, net);
        const auto plan = nisp_backward(net, s_n, PruneConfig::keep_all());
        for (std::size_t k = 0; k <= net.frl_index; ++k)
            worst = std::max(worst, max_rel_diff(plan.importance[k], importance_closed_form(net, s_n, k).scores));
    }
    return {worst <= kOracleRelTol, "max rel diff " + sci(worst)};
}

Outcome triple_agreement() {
    Rng rng(1002);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        Geometry g = random_window(rng, 6, 3, 3, false);
        const Vec k = random_vec(rng, g.kernel * g.kernel * g.in_channels * g.out_channels);
        const Vec s = random_vec(rng, g.out_channels * g.out_size * g.out_size, 0, 1);
        const Vec rule = propagate_conv(g, k, s);
        worst = std::max({worst, max_abs_diff(rule, brute_conv_importance(g, k, s)),
                          max_abs_diff(rule, matvec(bp_conv_matrix(g, k).transposed(), s))});

        const Geometry pg = random_window(rng, 6, 3, 3, true);
        const Vec ps = random_vec(rng, pg.out_channels * pg.out_size * pg.out_size, 0, 1);
        const Vec prule = propagate_pool(pg, ps);
        worst = std::max({worst, max_abs_diff(prule, brute_pool_importance(pg, ps)),
                          max_abs_diff(prule, matvec(bp_pool_matrix(pg).transposed(), ps))});

        const std::size_t channels = pick(rng, 1, 3), spatial = pg.out_size * pg.out_size;
        const std::size_t local = 2 * pick(rng, 0, (channels - 1) / 2) + 1;
        const Vec ls = random_vec(rng, channels * spatial, 0, 1);
        const Vec lrule = propagate_lrn(local, channels, spatial, ls);
        worst = std::max({worst, max_abs_diff(lrule, brute_lrn_importance(local, channels, spatial, ls)),
                          max_abs_diff(lrule, matvec(bp_lrn_matrix(local, channels, spatial).transposed(), ls))});
    }
    return {worst <= kTripleAbsTol, "max abs diff " + sci(worst)};
}

Outcome bound_fuzz() {
    Rng rng(1003);
    int held = 0, trials = 0;
    for (int t = 0; t < 100; ++t) {
        const Network net = random_dense_net(rng, 5, 12, kSmoothAndRelu);
        const Samples data = random_samples(rng, net.input_shape().size(), 20);
        const auto s_n = random_scores(rng, net);
        for (int m = 0; m < 10; ++m) {
            const std::size_t layer = pick(rng, 0, net.frl_index);
            Vec keep(net.layers[layer].output_shape().size());
            for (double& k : keep) k = static_cast<double>(pick(rng, 0, 1));
            held += verify_bound(net, layer, data, s_n, keep).holds;
            ++trials;
        }
    }
    return {held == trials, std::to_string(held) + "/" + std::to_string(trials) + " trials hold"};
}

Outcome gradient_check() {
    Rng rng(1004);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto act = random_activation(rng, {ActivationKind::Sigmoid, ActivationKind::Tanh});
        const std::size_t in = pick(rng, 2, 6), classes = pick(rng, 2, 4);
        const Network net = make_mlp({in, pick(rng, 2, 8), pick(rng, 2, 8), classes}, act, 2000 + t);
        const Samples batch = random_samples(rng, in, 8, classes);
        const Gradients g = loss_and_gradients(net, batch);
        auto check = [&](double analytic, const std::function<void(Network&, double)>& nudge) {
            Network plus = net, minus = net;
            nudge(plus, kFdStep);
            nudge(minus, -kFdStep);
            const double fd = (mean_loss(plus, batch) - mean_loss(minus, batch)) / (2 * kFdStep);
            const double scale = std::max({std::fabs(fd), std::fabs(analytic), 1e-6});
            worst = std::max(worst, std::fabs(fd - analytic) / scale);
        };
        for (std::size_t l = 0; l < net.size(); ++l) {
            for (std::size_t i = 0; i < net.layers[l].weights.data().size(); ++i)
                check(g.weights[l].data()[i], [&](Network& n, double h) { n.layers[l].weights.data()[i] += h; });
            for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
                check(g.bias[l][i], [&](Network& n, double h) { n.layers[l].bias[i] += h; });
        }
    }
    return {worst <= kGradRelTol, "max rel error " + sci(worst)};
}

Outcome series_identity() {
    Rng rng(1005);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        ResponseMatrix resp;
        resp.values = random_matrix(rng, pick(rng, 3, 30), pick(rng, 2, 8), -2, 2);
        const auto g = build_affinity(resp, uniform(rng, 0, 1));
        const Matrix s = inffs_path_matrix(g);
        const Matrix series = path_series(g.affinity, g.damping, kSeriesTerms);
        worst = std::max(worst, max_abs_diff(Vec(s.data().begin(), s.data().end()),
                                             Vec(series.data().begin(), series.data().end())));
    }
    return {worst <= kSeriesTol, "max abs diff " + sci(worst)};
}

// Trained MLP on blobs, prune half of each hidden layer, NISP against random selection.
Outcome blob_accuracy_reproduction() {
    int pre_wins = 0, post_wins = 0;
    for (int seed = 0; seed < 20; ++seed) {
        const auto s = static_cast<std::uint64_t>(seed);
        const Samples data = synth_dataset({4, 8, 200, 0.5, s});
        const Samples test = synth_dataset({4, 8, 100, 0.5, 1000 + s});
        const Network net = train(make_mlp({8, 64, 32, 4}, ActivationKind::ReLU, s), data, {0.1, 20, 16, s}).first;
        const auto cfg = PruneConfig::uniform(net, 0.5);
        const Network np = apply_plan(net, nisp_plan(net, data, cfg)).first;
        const Network rp = apply_plan(net, random_plan(net, cfg, s)).first;
        pre_wins += accuracy(np, test) >= accuracy(rp, test);
        const TrainConfig ft{0.1, 3, 16, s};
        post_wins += accuracy(finetune(np, data, ft).first, test) >= accuracy(finetune(rp, data, ft).first, test);
    }
    return {pre_wins >= 16 && post_wins >= 14,
            "pre-finetune " + std::to_string(pre_wins) + "/20 (need 16), post-finetune " + std::to_string(post_wins) +
                "/20 (need 14)"};
}

// WARE of the final responses after pruning every hidden layer, NISP against layer-by-layer.
Outcome ware_reproduction() {
    bool pass = true;
    std::string detail;
    for (double keep : {0.75, 0.5}) {
        double prev_gap = -1e300;
        for (std::size_t depth : {2, 4, 6}) {
            int wins = 0;
            double sum_nisp = 0.0, sum_lbl = 0.0;
            for (int seed = 0; seed < 20; ++seed) {
                const auto s = static_cast<std::uint64_t>(seed);
                const Samples data = synth_dataset({4, 8, 50, 0.5, s});
                std::vector<std::size_t> widths{8};
                widths.insert(widths.end(), depth, 32);
                widths.push_back(4);
                const Network net =
                    train(make_mlp(widths, ActivationKind::Sigmoid, s), data, {0.1, 10, 16, s}).first;
                const auto cfg = PruneConfig::uniform(net, keep);
                const auto s_n = inffs_scores(build_affinity(batch_responses(net, data, net.frl_index)));
                const auto pn = nisp_backward(net, s_n, cfg);
                const auto pl = lbl_plan(net, data, cfg);
                const double wn = ware(net, apply_plan(net, pn).first, data, s_n, {net.frl_index, pn.find(net.frl_index)->mask});
                const double wl = ware(net, apply_plan(net, pl).first, data, s_n, {net.frl_index, pl.find(net.frl_index)->mask});
                wins += wn <= wl;
                sum_nisp += wn;
                sum_lbl += wl;
            }
            const double gap = (sum_lbl - sum_nisp) / 20.0;
            const bool ok = wins >= 16 && gap >= prev_gap;
            pass = pass && ok;
            prev_gap = gap;
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s[keep %.2f depth %zu: %d/20, gap %.4g]", detail.empty() ? "" : " ", keep,
                          depth, wins, gap);
            detail += buf;
        }
    }
    return {pass, detail};
}

Outcome flops_accounting() {
    Rng rng(1008);
    Network net;
    net.layers.push_back(Layer::conv2d({8, 8, 3, 1, 1, 3, 8}, random_vec(rng, 9 * 24), random_vec(rng, 8), ActivationKind::ReLU));
    net.layers.push_back(Layer::conv2d({8, 8, 3, 1, 1, 8, 8}, random_vec(rng, 9 * 64), random_vec(rng, 8), ActivationKind::ReLU));
    net.layers.push_back(Layer::dense(random_matrix(rng, 3, 512), random_vec(rng, 3)));
    net.frl_index = 1;
    PruneConfig cfg;
    cfg.keep_fraction[0] = 0.5;
    cfg.keep_fraction[1] = 0.5;
    const Network pruned = apply_plan(net, random_plan(net, cfg, 7)).first;
    const std::size_t before = count_cost(net).layers[1].flops, after = count_cost(pruned).layers[1].flops;
    return {before == 4 * after, std::to_string(before) + " -> " + std::to_string(after) + " FLOPs"};
}

Outcome masked_equivalence() {
    Rng rng(1009);
    int exact = 0;
    for (int t = 0; t < 50; ++t) {
        const Network net = t % 2 ? random_conv_net(rng, t % 4 == 1) : random_dense_net(rng, 5, 12, kSmoothAndRelu);
        const auto plan = random_plan(net, PruneConfig::uniform(net, uniform(rng, 0.2, 0.9)), static_cast<std::uint64_t>(t));
        const Network pruned = apply_plan(net, plan).first;
        const auto masks = masked_outputs(net, plan);
        bool same = true;
        for (const auto& s : random_samples(rng, net.input_shape().size(), 20))
            same = same && forward(pruned, s).final_output() == forward_masked(net, s.input, masks).final_output();
        exact += same;
    }
    return {exact == 50, std::to_string(exact) + "/50 nets exact"};
}

Outcome scaling_invariance() {
    Rng rng(1010);
    int same = 0;
    for (int t = 0; t < 50; ++t) {
        const Network net = t % 2 ? random_conv_net(rng, t % 4 == 1) : random_dense_net(rng, 5, 12, kSmoothAndRelu);
        auto s_n = random_scores(rng, net);
        const auto cfg = PruneConfig::uniform(net, uniform(rng, 0.2, 0.9));
        const auto a = nisp_backward(net, s_n, cfg);
        for (double& v : s_n.scores) v *= 10.0;
        const auto b = nisp_backward(net, s_n, cfg);
        bool eq = a.layers.size() == b.layers.size();
        for (std::size_t i = 0; eq && i < a.layers.size(); ++i) eq = a.layers[i].mask == b.layers[i].mask;
        same += eq;
    }
    return {same == 50, std::to_string(same) + "/50 nets unchanged"};
}

struct Criterion {
    const char* name;
    double budget_seconds;
    Outcome (*run)();
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"oracle equivalence (dense backward vs closed form)", 5, oracle_equivalence},
        {"conv/pool/LRN triple agreement", 10, triple_agreement},
        {"pruning error bound fuzz", 30, bound_fuzz},
        {"gradient check", 5, gradient_check},
        {"Inf-FS series identity", 2, series_identity},
        {"NISP vs random accuracy on blobs", 180, blob_accuracy_reproduction},
        {"NISP vs layer-by-layer WARE over depth", 180, ware_reproduction},
        {"FLOPs accounting", 1, flops_accounting},
        {"masked-forward equivalence", 5, masked_equivalence},
        {"scaling invariance", 5, scaling_invariance},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs < c.budget_seconds;
        failures += !pass;
        std::printf("%s  %-52s %7.2fs (budget %gs)  %s\n", pass ? "PASS" : "FAIL", c.name, secs, c.budget_seconds,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
