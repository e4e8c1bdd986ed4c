#include "nisp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nisp/analysis.hpp"
#include "nisp/engine.hpp"
#include "nisp/io.hpp"
#include "nisp/model.hpp"
#include "nisp/propagation.hpp"
#include "nisp/ranking.hpp"
#include "nisp/surgery.hpp"
#include "nisp/trainer.hpp"

namespace nisp::cli {

namespace {

std::string num(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

void require_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
}

void require_fraction(double f, const std::string& flag) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError(flag + " must lie in (0, 1]");
}

void require_path(const std::string& path, const std::string& flag) {
    if (path.empty()) throw UsageError(flag + " is required");
}

PruneConfig build_config(const Network& net, const Ratios& ratios) {
    if (ratios.all) require_fraction(*ratios.all, "--ratio-all");
    const auto prunable = prunable_layers(net);
    PruneConfig cfg = ratios.all ? PruneConfig::uniform(net, *ratios.all) : PruneConfig::keep_all();
    for (const auto& [id, f] : ratios.layer) {
        require_fraction(f, "--ratio " + std::to_string(id));
        if (std::find(prunable.begin(), prunable.end(), id) == prunable.end())
            throw UsageError("--ratio names layer " + std::to_string(id) + ", which is not prunable");
        cfg.keep_fraction[id] = f;
    }
    return cfg;
}

Samples load_samples(const std::string& path) {
    Dataset ds = load_dataset(path);
    if (ds.samples.empty()) throw ParseError(path + ": no samples");
    return std::move(ds.samples);
}

ImportanceVector frl_scores(const Network& net, const Samples& data, double alpha) {
    return inffs_scores(build_affinity(batch_responses(net, data, net.frl_index), alpha));
}

ImportancePlan plan_for(const std::string& strategy, const Network& net, const Samples& data, const PruneConfig& cfg,
                        double alpha, std::uint64_t seed) {
    if (strategy == "nisp") return nisp_plan(net, data, cfg, alpha);
    if (strategy == "nisp-mag") return magnitude_plan(net, cfg);
    if (strategy == "lbl") return lbl_plan(net, data, cfg, alpha);
    if (strategy == "random") return random_plan(net, cfg, seed);
    throw UsageError("unknown strategy '" + strategy + "'");
}

void require_strategy(const std::string& s, bool allow_scratch) {
    static const std::vector<std::string> known{"nisp", "nisp-mag", "lbl", "random"};
    if (std::find(known.begin(), known.end(), s) != known.end()) return;
    if (allow_scratch && s == "scratch") return;
    throw UsageError("unknown strategy '" + s + "'" + (allow_scratch ? "" : " (scratch is only meaningful for compare)"));
}

}  // namespace

std::pair<std::size_t, double> parse_layer_ratio(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError("--ratio expects layer=fraction, got '" + text + "'");
    std::size_t id = 0;
    double f = 0.0;
    const char* a = text.data();
    auto r1 = std::from_chars(a, a + eq, id);
    auto r2 = std::from_chars(a + eq + 1, a + text.size(), f);
    if (r1.ec != std::errc() || r1.ptr != a + eq || r2.ec != std::errc() || r2.ptr != a + text.size())
        throw UsageError("--ratio expects layer=fraction, got '" + text + "'");
    require_fraction(f, "--ratio " + text.substr(0, eq));
    return {id, f};
}

void cmd_rank(const RankOptions& opt, std::ostream& log) {
    require_alpha(opt.alpha);
    require_path(opt.out, "--out");
    if (opt.pca_threshold && !(*opt.pca_threshold > 0.0 && *opt.pca_threshold <= 1.0))
        throw UsageError("--pca-threshold must lie in (0, 1]");
    const Network net = load_model_file(opt.model);
    const Samples data = load_samples(opt.data);

    const ImportanceVector s = frl_scores(net, data, opt.alpha);
    std::ostringstream csv;
    csv << "neuron_index,score\n";
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
    for (std::size_t i : order) csv << i << ',' << num(s.scores[i]) << '\n';

    if (opt.pca_threshold) {
        for (std::size_t id : prunable_layers(net)) {
            const ResponseMatrix resp = batch_responses(net, data, id);
            const PcaEnergy e = pca_energy(resp, *opt.pca_threshold);
            const std::size_t width = resp.values.cols();
            log << "layer " << id << ": " << (e.degenerate ? 0 : e.components) << " of " << width
                << " components reach energy " << *opt.pca_threshold;
            if (e.degenerate)
                log << " (all responses constant)";
            else
                log << ", suggested keep fraction " << num(static_cast<double>(e.components) / static_cast<double>(width));
            log << '\n';
        }
    }
    io::write_file_atomic(opt.out, csv.str());
    log << "wrote " << s.scores.size() << " scores to " << opt.out << '\n';
}

void cmd_prune(const PruneOptions& opt, std::ostream& log) {
    require_alpha(opt.alpha);
    require_strategy(opt.strategy, false);
    require_path(opt.out, "--out");
    const Network net = load_model_file(opt.model);
    const PruneConfig cfg = build_config(net, opt.ratios);
    Samples data;
    if (opt.strategy == "nisp" || opt.strategy == "lbl") data = load_samples(opt.data);

    const ImportancePlan plan = plan_for(opt.strategy, net, data, cfg, opt.alpha, opt.seed);
    auto [pruned, report] = apply_plan(net, plan);

    // Serialize everything before touching the output directory.
    const std::string model_text = save_model(pruned);
    const std::string plan_text = plan_to_json(plan);
    const std::string report_text = surgery_report_csv(report);
    const std::filesystem::path dir(opt.out);
    io::write_file_atomic((dir / "model.json").string(), model_text);
    io::write_file_atomic((dir / "plan.json").string(), plan_text);
    io::write_file_atomic((dir / "surgery.csv").string(), report_text);
    log << opt.strategy << ": parameters " << report.params_before << " -> " << report.params_after << '\n';
}

void cmd_compare(const CompareOptions& opt, std::ostream& log) {
    require_alpha(opt.alpha);
    require_path(opt.out, "--out");
    if (opt.strategies.empty()) throw UsageError("--strategies is empty");
    for (const auto& s : opt.strategies) require_strategy(s, true);
    if (opt.seeds < 1) throw UsageError("--seeds must be at least 1");
    if (!(opt.lr > 0.0)) throw UsageError("--lr must be positive");
    if (opt.batch_size < 1) throw UsageError("--batch-size must be at least 1");

    const Network net = load_model_file(opt.model);
    for (const auto& l : net.layers)
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Activation)
            throw DomainError("compare fine-tunes the pruned networks, which needs a Dense/Activation model");
    const PruneConfig cfg = build_config(net, opt.ratios);
    const Samples data = load_samples(opt.data);
    const Samples eval = opt.eval.empty() ? data : load_samples(opt.eval);

    const ImportanceVector s_n = frl_scores(net, data, opt.alpha);
    const CostReport base_cost = count_cost(net);

    std::ostringstream csv;
    csv << "strategy,seed,pre_finetune_accuracy,post_finetune_accuracy,ware,flops_reduction_percent,top1_agreement\n";
    std::vector<std::string> strategies = opt.strategies;
    std::sort(strategies.begin(), strategies.end());
    strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());
    for (const auto& strategy : strategies)
        for (std::size_t k = 0; k < opt.seeds; ++k) {
            const std::uint64_t seed = opt.seed + k;
            // Scratch reuses the NISP architecture with fresh weights trained at the full rate.
            const ImportancePlan plan = plan_for(strategy == "scratch" ? "nisp" : strategy, net, data, cfg, opt.alpha, seed);
            Network pruned = apply_plan(net, plan).first;
            if (strategy == "scratch") glorot_init(pruned, seed);
            const PruneIndicator kept{net.frl_index, plan.find(net.frl_index) ? plan.find(net.frl_index)->mask
                                                                              : std::vector<std::uint8_t>(net.layers[net.frl_index].output_shape().channels, 1)};
            const double pre = accuracy(pruned, eval);
            const double w = ware(net, pruned, data, s_n, kept);
            const TrainConfig tc{opt.lr, opt.epochs, opt.batch_size, seed};
            Network tuned = pruned;
            if (opt.epochs > 0) tuned = (strategy == "scratch" ? train(pruned, data, tc, eval) : finetune(pruned, data, tc, eval)).first;
            const double post = accuracy(tuned, eval);
            const CostReduction red = cost_reduction(base_cost, count_cost(tuned));
            const double agree = top1_agreement(net, tuned, eval);
            csv << strategy << ',' << seed << ',' << num(pre) << ',' << num(post) << ',' << num(w) << ','
                << num(red.flops_percent) << ',' << num(agree) << '\n';
            log << strategy << " seed " << seed << ": accuracy " << pre << " -> " << post << '\n';
        }
    io::write_file_atomic(opt.out, csv.str());
}

void cmd_verify(const VerifyOptions& opt, std::ostream& log) {
    require_alpha(opt.alpha);
    require_fraction(opt.ratio, "--ratio-all");
    require_path(opt.out, "--out");
    const Network net = load_model_file(opt.model);
    if (opt.layer > net.frl_index)
        throw UsageError("--layer must not exceed the final response layer " + std::to_string(net.frl_index));
    const Samples data = load_samples(opt.data);

    nlohmann::json trials = nlohmann::json::array();
    std::size_t violations = 0;
    std::vector<double> slack;
    if (opt.trials > 0) {
        const ImportanceVector s_n = frl_scores(net, data, opt.alpha);
        const std::size_t width = net.layers[opt.layer].output_shape().size();
        const std::size_t keep = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(opt.ratio * static_cast<double>(width))), 1, width);
        std::mt19937_64 rng(opt.seed);
        std::vector<std::size_t> order(width);
        for (std::size_t t = 0; t < opt.trials; ++t) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            Vec mask(width, 0.0);
            for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1.0;
            const BoundReport r = verify_bound(net, opt.layer, data, s_n, mask);
            if (!r.holds) ++violations;
            slack.push_back(r.rhs - r.lhs);
            trials.push_back({{"lhs", r.lhs}, {"rhs", r.rhs}, {"holds", r.holds}});
        }
    }
    nlohmann::json doc;
    doc["layer"] = opt.layer;
    doc["trials"] = std::move(trials);
    doc["violations"] = violations;
    if (!slack.empty()) {
        std::sort(slack.begin(), slack.end());
        doc["slack_min"] = slack.front();
        doc["slack_median"] = slack[slack.size() / 2];
        doc["slack_max"] = slack.back();
    }
    io::write_file_atomic(opt.out, doc.dump(1) + "\n");
    log << opt.trials << " trials, " << violations << " violations\n";
    if (violations > 0) throw InvariantError("bound violated in " + std::to_string(violations) + " trials");
}

void cmd_synth(const SynthOptions& opt, std::ostream& log) {
    require_path(opt.out, "--out");
    if (opt.classes < 1 || opt.dim < 1 || opt.per_class < 1) throw UsageError("--classes, --dim and --per-class must be positive");
    if (opt.classes > opt.dim + 1) throw UsageError("--classes may exceed --dim by at most one");
    if (!(opt.spread >= 0.0)) throw UsageError("--spread must be non-negative");
    const Samples data = synth_dataset({opt.classes, opt.dim, opt.per_class, opt.spread, opt.seed});
    save_dataset(data, opt.out);
    log << "wrote " << data.size() << " samples to " << opt.out << '\n';
}

void cmd_train(const TrainOptions& opt, std::ostream& log) {
    require_path(opt.out, "--out");
    const auto act = parse_activation_kind(opt.activation);
    if (!act) throw UsageError("unknown activation '" + opt.activation + "'");
    if (opt.hidden.empty()) throw UsageError("--hidden needs at least one width");
    const TrainConfig tc{opt.lr, opt.epochs, opt.batch_size, opt.seed};
    try {
        tc.check();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    const Samples data = load_samples(opt.data);
    std::size_t classes = 0;
    for (const auto& s : data) {
        if (!s.label) throw ParseError(opt.data + ": training needs labels");
        classes = std::max(classes, *s.label + 1);
    }
    std::vector<std::size_t> widths{data.front().input.size()};
    widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
    widths.push_back(classes);
    auto [net, curve] = train(make_mlp(widths, *act, opt.seed), data, tc);
    const std::string model_text = save_model(net);
    const std::string curve_text = learning_curve_csv(curve);
    io::write_file_atomic(opt.out, model_text);
    io::write_file_atomic(opt.out + ".curve.csv", curve_text);
    log << "final loss " << curve.points.back().train_loss << ", accuracy " << curve.points.back().eval_accuracy << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neuron importance score propagation: rank, prune, compare, verify"};
    app.require_subcommand(1);

    RankOptions rank;
    PruneOptions prune;
    CompareOptions compare;
    VerifyOptions verify;
    SynthOptions synth;
    TrainOptions trainer;
    std::optional<double> ratio_all;
    std::vector<std::string> ratio_layers;
    double pca = 0.0;

    auto* r = app.add_subcommand("rank", "Score the final response neurons with Inf-FS");
    r->add_option("--model", rank.model, "Model JSON")->required();
    r->add_option("--data", rank.data, "Dataset CSV")->required();
    r->add_option("--alpha", rank.alpha, "Mix of spread and decorrelation in the affinity");
    r->add_option("--out", rank.out, "Output CSV")->required();
    auto* pca_opt = r->add_option("--pca-threshold", pca, "Print PCA energy guidance per prunable layer");

    auto add_ratio_flags = [&](CLI::App* cmd) {
        cmd->add_option("--ratio-all", ratio_all, "Keep fraction for every prunable layer");
        cmd->add_option("--ratio", ratio_layers, "Keep fraction for one layer, as id=frac (repeatable)");
    };

    auto* p = app.add_subcommand("prune", "Prune a model and write model.json, plan.json, surgery.csv");
    p->add_option("--model", prune.model, "Model JSON")->required();
    p->add_option("--data", prune.data, "Dataset CSV (needed by nisp and lbl)");
    p->add_option("--strategy", prune.strategy, "nisp | nisp-mag | lbl | random");
    add_ratio_flags(p);
    p->add_option("--alpha", prune.alpha, "Inf-FS alpha");
    p->add_option("--seed", prune.seed, "Seed for the random strategy");
    p->add_option("--out", prune.out, "Output directory")->required();

    auto* c = app.add_subcommand("compare", "Prune, fine-tune and evaluate several strategies over seeds");
    c->add_option("--model", compare.model, "Dense model JSON")->required();
    c->add_option("--data", compare.data, "Training dataset CSV")->required();
    c->add_option("--eval", compare.eval, "Evaluation dataset CSV (defaults to --data)");
    c->add_option("--strategy", compare.strategies, "Strategies to run (repeatable)");
    add_ratio_flags(c);
    c->add_option("--alpha", compare.alpha, "Inf-FS alpha");
    c->add_option("--seed", compare.seed, "First seed");
    c->add_option("--seeds", compare.seeds, "Number of consecutive seeds");
    c->add_option("--epochs", compare.epochs, "Fine-tuning epochs");
    c->add_option("--lr", compare.lr, "Base learning rate (fine-tuning uses a tenth)");
    c->add_option("--batch-size", compare.batch_size, "Minibatch size");
    c->add_option("--out", compare.out, "Output CSV")->required();

    auto* v = app.add_subcommand("verify", "Check the pruning error bound on random masks");
    v->add_option("--model", verify.model, "Model JSON")->required();
    v->add_option("--data", verify.data, "Dataset CSV")->required();
    v->add_option("--layer", verify.layer, "Layer whose output is masked");
    v->add_option("--ratio-all", verify.ratio, "Keep fraction of each random mask");
    v->add_option("--trials", verify.trials, "Number of random masks");
    v->add_option("--alpha", verify.alpha, "Inf-FS alpha");
    v->add_option("--seed", verify.seed, "Mask seed");
    v->add_option("--out", verify.out, "Output JSON")->required();

    auto* s = app.add_subcommand("synth", "Write a Gaussian-blob dataset");
    s->add_option("--classes", synth.classes);
    s->add_option("--dim", synth.dim);
    s->add_option("--per-class", synth.per_class);
    s->add_option("--spread", synth.spread);
    s->add_option("--seed", synth.seed);
    s->add_option("--out", synth.out, "Output CSV")->required();

    auto* t = app.add_subcommand("train", "Train a dense classifier on a labeled dataset");
    t->add_option("--data", trainer.data, "Dataset CSV")->required();
    t->add_option("--hidden", trainer.hidden, "Hidden widths");
    t->add_option("--activation", trainer.activation, "identity | relu | sigmoid | tanh");
    t->add_option("--epochs", trainer.epochs);
    t->add_option("--lr", trainer.lr);
    t->add_option("--batch-size", trainer.batch_size);
    t->add_option("--seed", trainer.seed);
    t->add_option("--out", trainer.out, "Output model JSON; the learning curve goes to <out>.curve.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        Ratios ratios;
        ratios.all = ratio_all;
        for (const auto& text : ratio_layers) {
            const auto [id, f] = parse_layer_ratio(text);
            ratios.layer[id] = f;
        }
        if (r->parsed()) {
            if (pca_opt->count() > 0) rank.pca_threshold = pca;
            cmd_rank(rank, out);
        } else if (p->parsed()) {
            prune.ratios = ratios;
            cmd_prune(prune, out);
        } else if (c->parsed()) {
            compare.ratios = ratios;
            cmd_compare(compare, out);
        } else if (v->parsed()) {
            cmd_verify(verify, out);
        } else if (s->parsed()) {
            cmd_synth(synth, out);
        } else if (t->parsed()) {
            cmd_train(trainer, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const InvariantError& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kOk;
}

}  // namespace nisp::cli
