#include "nisp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "nisp/error.hpp"

namespace nisp {

Vec synth_center(const SynthSpec& spec, std::size_t c) {
    if (c >= spec.n_classes) throw DomainError("synth_center: class out of range");
    Vec center(spec.dim, 0.0);
    if (c < spec.dim) {
        center[c] = 1.0;
    } else {
        // Vertex equidistant (√2) from every basis vector.
        const double d = static_cast<double>(spec.dim);
        std::fill(center.begin(), center.end(), (1.0 - std::sqrt(1.0 + d)) / d);
    }
    return center;
}

Samples synth_dataset(const SynthSpec& spec) {
    if (spec.n_classes < 1 || spec.dim < 1 || spec.samples_per_class < 1)
        throw DomainError("synth_dataset: class count, dimension and samples per class must be positive");
    if (spec.n_classes > spec.dim + 1) throw DomainError("synth_dataset: a simplex in dim d has at most d + 1 vertices");
    if (!(spec.cluster_spread >= 0.0)) throw DomainError("synth_dataset: spread must be non-negative");

    std::vector<Vec> centers;
    for (std::size_t c = 0; c < spec.n_classes; ++c) centers.push_back(synth_center(spec, c));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Samples out;
    out.reserve(spec.n_classes * spec.samples_per_class);
    for (std::size_t i = 0; i < spec.samples_per_class; ++i)
        for (std::size_t c = 0; c < spec.n_classes; ++c) {
            Sample s{centers[c], c};
            for (double& v : s.input) v += spec.cluster_spread * noise(rng);
            out.push_back(std::move(s));
        }
    return out;
}

void TrainConfig::check() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DomainError("learning rate must be finite and non-negative");
    if (epochs < 1) throw DomainError("epochs must be at least 1");
    if (batch_size < 1) throw DomainError("batch size must be at least 1");
}

std::string learning_curve_csv(const LearningCurve& curve) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,train_loss,eval_accuracy\n";
    for (std::size_t e = 0; e < curve.points.size(); ++e)
        os << e + 1 << ',' << curve.points[e].train_loss << ',' << curve.points[e].eval_accuracy << '\n';
    return os.str();
}

void glorot_init(Network& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers) {
        if (layer.kind != LayerKind::Dense) continue;
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& w : layer.weights.data()) w = u(rng);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

Network make_mlp(const std::vector<std::size_t>& widths, ActivationKind hidden, std::uint64_t seed) {
    if (widths.size() < 3) throw DomainError("make_mlp: need input, at least one hidden, and output widths");
    Network net;
    for (std::size_t i = 1; i < widths.size(); ++i) {
        if (widths[i] == 0 || widths[i - 1] == 0) throw DomainError("make_mlp: widths must be positive");
        const bool last = i + 1 == widths.size();
        net.layers.push_back(Layer::dense(Matrix(widths[i], widths[i - 1]), Vec(widths[i], 0.0),
                                          last ? ActivationKind::Identity : hidden));
    }
    net.frl_index = net.layers.size() - 2;
    glorot_init(net, seed);
    return net;
}

namespace {

void require_trainable(const Network& net) {
    if (net.layers.empty()) throw ShapeError("train: empty network");
    for (const auto& l : net.layers)
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Activation)
            throw DomainError("train: only Dense and Activation layers can be trained, found " + std::string(to_string(l.kind)));
    if (!net.skip_edges.empty()) throw DomainError("train: skip edges are not supported");
}

std::size_t label_of(const Sample& s, std::size_t classes) {
    if (!s.label) throw DomainError("train: unlabeled sample");
    if (*s.label >= classes) throw DomainError("train: label " + std::to_string(*s.label) + " exceeds output width");
    return *s.label;
}

// Softmax probabilities and −log p(label), via log-sum-exp.
double softmax_xent(std::span<const double> logits, std::size_t label, Vec& prob) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    prob.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) z += (prob[i] = std::exp(logits[i] - peak));
    for (double& p : prob) p /= z;
    return std::log(z) + peak - logits[label];
}

}  // namespace

double mean_loss(const Network& net, const Samples& data) {
    if (data.empty()) throw DomainError("mean_loss: empty dataset");
    const std::size_t classes = net.output_shape().size();
    double total = 0.0;
    Vec prob;
    for (const auto& s : data) total += softmax_xent(forward(net, s).final_output(), label_of(s, classes), prob);
    return total / static_cast<double>(data.size());
}

Gradients loss_and_gradients(const Network& net, const Samples& batch) {
    require_trainable(net);
    if (batch.empty()) throw DomainError("loss_and_gradients: empty batch");
    const std::size_t n = net.layers.size();
    const std::size_t classes = net.output_shape().size();
    Gradients g;
    g.weights.resize(n);
    g.bias.resize(n);
    for (std::size_t l = 0; l < n; ++l)
        if (net.layers[l].kind == LayerKind::Dense) {
            g.weights[l] = Matrix(net.layers[l].weights.rows(), net.layers[l].weights.cols());
            g.bias[l].assign(net.layers[l].bias.size(), 0.0);
        }

    Vec prob;
    for (const auto& s : batch) {
        const auto trace = forward(net, s);
        const std::size_t label = label_of(s, classes);
        g.loss += softmax_xent(trace.final_output(), label, prob);
        Vec delta = prob;
        delta[label] -= 1.0;
        for (std::size_t l = n; l-- > 0;) {
            const Layer& layer = net.layers[l];
            const Vec& y = trace.layer_output(l);
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= activation_slope(layer.activation, y[i]);
            if (layer.kind != LayerKind::Dense) continue;
            const Vec& x = trace.outputs[l];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                g.bias[l][i] += delta[i];
                auto row = g.weights[l].row(i);
                for (std::size_t j = 0; j < x.size(); ++j) row[j] += delta[i] * x[j];
            }
            if (l > 0) delta = matvec_transposed(layer.weights, delta);
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    g.loss *= inv;
    for (std::size_t l = 0; l < n; ++l) {
        for (double& v : g.weights[l].data()) v *= inv;
        for (double& v : g.bias[l]) v *= inv;
    }
    return g;
}

std::pair<Network, LearningCurve> train(const Network& net, const Samples& data, const TrainConfig& cfg,
                                        const Samples& eval) {
    cfg.check();
    require_trainable(net);
    if (data.empty()) throw DomainError("train: empty dataset");
    const std::size_t classes = net.output_shape().size();
    for (const auto& s : data) label_of(s, classes);

    Network cur = net;
    LearningCurve curve;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Samples batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
            const Gradients g = loss_and_gradients(cur, batch);
            for (std::size_t l = 0; l < cur.layers.size(); ++l) {
                if (cur.layers[l].kind != LayerKind::Dense) continue;
                auto w = cur.layers[l].weights.data();
                const auto gw = g.weights[l].data();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
                for (std::size_t i = 0; i < g.bias[l].size(); ++i) cur.layers[l].bias[i] -= cfg.learning_rate * g.bias[l][i];
            }
        }
        curve.points.push_back({mean_loss(cur, data), accuracy(cur, eval.empty() ? data : eval)});
    }
    return {std::move(cur), std::move(curve)};
}

std::pair<Network, LearningCurve> finetune(const Network& net, const Samples& data, const TrainConfig& cfg,
                                           const Samples& eval) {
    if (cfg.epochs == 0) return {net, LearningCurve{}};
    TrainConfig tuned = cfg;
    tuned.learning_rate = cfg.learning_rate / 10.0;
    return train(net, data, tuned, eval);
}

}  // namespace nisp
