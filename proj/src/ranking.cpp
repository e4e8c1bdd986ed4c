#include "nisp/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "nisp/error.hpp"
#include "nisp/kernels.hpp"

namespace nisp {

double spectral_radius(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n) throw ShapeError("spectral_radius: matrix must be square and non-empty");
    // Shifting by I makes the Perron root strictly dominant even for bipartite graphs,
    // whose spectrum is symmetric about zero.
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (int iter = 0; iter < 100000; ++iter) {
        Vec next = matvec(a, v);
        for (std::size_t i = 0; i < n; ++i) next[i] += v[i];
        double rayleigh = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rayleigh += v[i] * next[i];
            norm += next[i] * next[i];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) next[i] /= norm;
        const bool converged = iter > 0 && std::fabs(rayleigh - lambda) <= 1e-15 * std::max(1.0, rayleigh);
        lambda = rayleigh;
        v = std::move(next);
        if (converged) break;
    }
    return std::max(0.0, lambda - 1.0);
}

AffinityGraph build_affinity(const ResponseMatrix& resp, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("build_affinity: alpha must lie in [0, 1]");
    if (resp.values.rows() < 2) throw DomainError("build_affinity: need at least 2 samples");
    if (resp.values.cols() < 2) throw DomainError("build_affinity: need at least 2 features");
    for (double v : resp.values.data())
        if (!std::isfinite(v)) throw NumericError("build_affinity: non-finite response");

    AffinityGraph g;
    g.affinity = kernels::omp::affinity(resp.values, alpha);
    g.alpha = alpha;
    g.layer_id = resp.layer_id;
    const double rho = spectral_radius(g.affinity);
    g.damping = rho > 0.0 ? kDampingFactor / rho : kDampingFactor;
    return g;
}

namespace {

Matrix damped_system(const AffinityGraph& graph) {
    const Matrix& a = graph.affinity;
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ShapeError("inffs: affinity must be square");
    if (!(graph.damping > 0.0)) throw DomainError("inffs: damping must be positive");
    if (graph.damping * spectral_radius(a) >= 1.0)
        throw NumericError("inffs: damping·ρ(A) >= 1, the path series diverges");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? 1.0 : 0.0) - graph.damping * a(i, j);
    return m;
}

double singular_tolerance(std::size_t n) { return 1e-12 * static_cast<double>(std::max<std::size_t>(n, 1)); }

}  // namespace

Matrix inffs_path_matrix(const AffinityGraph& graph) {
    const std::size_t n = graph.affinity.rows();
    Matrix s = kernels::omp::solve(damped_system(graph), Matrix::identity(n), singular_tolerance(n));
    for (std::size_t i = 0; i < n; ++i) s(i, i) -= 1.0;
    return s;
}

ImportanceVector inffs_scores(const AffinityGraph& graph) {
    const std::size_t n = graph.affinity.rows();
    // Row sums of (I − rA)^{-1} − I are (I − rA)^{-1}·1 − 1; one right-hand side suffices.
    Matrix ones(n, 1, 1.0);
    Matrix z = kernels::omp::solve(damped_system(graph), ones, singular_tolerance(n));
    ImportanceVector out{graph.layer_id, Vec(n)};
    for (std::size_t i = 0; i < n; ++i) out.scores[i] = std::max(0.0, z(i, 0) - 1.0);
    return out;
}

ImportanceVector magnitude_scores(const Network& net, std::size_t layer_id) {
    if (layer_id >= net.layers.size()) throw DomainError("magnitude_scores: layer out of range");
    const Layer& layer = net.layers[layer_id];
    ImportanceVector out{layer_id, {}};
    switch (layer.kind) {
        case LayerKind::Dense:
            out.scores.assign(layer.weights.rows(), 0.0);
            for (std::size_t i = 0; i < layer.weights.rows(); ++i)
                for (double w : layer.weights.row(i)) out.scores[i] += std::fabs(w);
            break;
        case LayerKind::Conv2D: {
            const Geometry& g = layer.geometry;
            const std::size_t per_channel = g.in_channels * g.kernel * g.kernel;
            const std::size_t spatial = g.out_size * g.out_size;
            out.scores.assign(g.out_channels * spatial, 0.0);
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                double sum = 0.0;
                for (std::size_t t = 0; t < per_channel; ++t) sum += std::fabs(layer.kernel[co * per_channel + t]);
                std::fill_n(out.scores.begin() + static_cast<long>(co * spatial), spatial, sum);
            }
            break;
        }
        default:
            throw DomainError("magnitude_scores: layer " + std::to_string(layer_id) + " (" +
                              std::string(to_string(layer.kind)) + ") has no weights");
    }
    return out;
}

std::vector<ImportanceVector> per_layer_scores(const Network& net, const Samples& data, double alpha) {
    if (data.empty()) throw DomainError("per_layer_scores: empty dataset");
    std::vector<ImportanceVector> out;
    for (std::size_t id : prunable_layers(net)) out.push_back(inffs_scores(build_affinity(batch_responses(net, data, id), alpha)));
    return out;
}

}  // namespace nisp
