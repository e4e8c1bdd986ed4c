#include <algorithm>
#include <cmath>

#include "nisp/error.hpp"
#include "nisp/kernels.hpp"

namespace nisp::kernels {

namespace detail {

ColumnStats column_stats(const Matrix& responses) {
    const std::size_t m = responses.rows();
    const std::size_t n = responses.cols();
    ColumnStats st{Matrix(n, m), Vec(n, 0.0), Vec(n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0;
        double peak = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            mean += responses(r, j);
            peak = std::max(peak, std::fabs(responses(r, j)));
        }
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double c = responses(r, j) - mean;
            st.centered_t(j, r) = c;
            ss += c * c;
        }
        const double sd = std::sqrt(ss / static_cast<double>(m));
        // A column of identical values can leave rounding residue after centering.
        if (sd <= 1e-12 * std::max(1.0, peak)) {
            for (std::size_t r = 0; r < m; ++r) st.centered_t(j, r) = 0.0;
            continue;
        }
        st.sd[j] = sd;
        st.norm[j] = std::sqrt(ss);
    }
    return st;
}

double affinity_entry(const ColumnStats& st, double sd_max, double alpha, std::size_t i, std::size_t j) {
    const double si = sd_max > 0.0 ? st.sd[i] / sd_max : 0.0;
    const double sj = sd_max > 0.0 ? st.sd[j] / sd_max : 0.0;
    double corr = 0.0;
    if (st.norm[i] > 0.0 && st.norm[j] > 0.0) {
        const auto a = st.centered_t.row(i);
        const auto b = st.centered_t.row(j);
        double dot = 0.0;
        for (std::size_t r = 0; r < a.size(); ++r) dot += a[r] * b[r];
        corr = std::clamp(dot / (st.norm[i] * st.norm[j]), -1.0, 1.0);
    }
    return alpha * std::max(si, sj) + (1.0 - alpha) * (1.0 - std::fabs(corr));
}

}  // namespace detail

namespace serial {

Vec dense_forward(const Matrix& w, std::span<const double> bias, std::span<const double> x) {
    if (w.cols() != x.size() || w.rows() != bias.size()) throw ShapeError("dense_forward: dimension mismatch");
    Vec out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w(i, j) * x[j];
        out[i] = acc + bias[i];
    }
    return out;
}

Vec dense_importance(const Matrix& w, std::span<const double> s_out) {
    if (w.rows() != s_out.size()) throw ShapeError("dense_importance: dimension mismatch");
    Vec s_in(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) s_in[j] += std::fabs(w(i, j)) * s_out[i];
    return s_in;
}

Vec conv_forward(const Geometry& g, std::span<const double> kernel, std::span<const double> bias,
                 std::span<const double> x) {
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (x.size() != g.in_channels * X * X || bias.size() != g.out_channels ||
        kernel.size() != k * k * g.in_channels * g.out_channels)
        throw ShapeError("conv_forward: dimension mismatch");
    Vec out(g.out_channels * Y * Y);
    for (std::size_t co = 0; co < g.out_channels; ++co)
        for (std::size_t oy = 0; oy < Y; ++oy)
            for (std::size_t ox = 0; ox < Y; ++ox) {
                double acc = bias[co];
                for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                        if (iy < 0 || iy >= static_cast<long>(X)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                            if (ix < 0 || ix >= static_cast<long>(X)) continue;
                            acc += kernel[((co * g.in_channels + ci) * k + ky) * k + kx] *
                                   x[(ci * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)];
                        }
                    }
                out[(co * Y + oy) * Y + ox] = acc;
            }
    return out;
}

Vec conv_importance(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out) {
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (s_out.size() != g.out_channels * Y * Y || kernel.size() != k * k * g.in_channels * g.out_channels)
        throw ShapeError("conv_importance: dimension mismatch");
    Vec s_in(g.in_channels * X * X, 0.0);
    // input channel n outermost, output channel f inside: S_n = Σ_f BP^{fn} applied to S_out^f
    for (std::size_t n = 0; n < g.in_channels; ++n)
        for (std::size_t f = 0; f < g.out_channels; ++f)
            for (std::size_t oy = 0; oy < Y; ++oy)
                for (std::size_t ox = 0; ox < Y; ++ox) {
                    const double s = s_out[(f * Y + oy) * Y + ox];
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                        if (iy < 0 || iy >= static_cast<long>(X)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                            if (ix < 0 || ix >= static_cast<long>(X)) continue;
                            s_in[(n * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)] +=
                                std::fabs(kernel[((f * g.in_channels + n) * k + ky) * k + kx]) * s;
                        }
                    }
                }
    return s_in;
}

Vec pool_importance(const Geometry& g, std::span<const double> s_out) {
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (s_out.size() != g.out_channels * Y * Y || g.in_channels != g.out_channels)
        throw ShapeError("pool_importance: dimension mismatch");
    const double share = 1.0 / static_cast<double>(k * k);
    Vec s_in(g.in_channels * X * X, 0.0);
    for (std::size_t c = 0; c < g.in_channels; ++c)
        for (std::size_t oy = 0; oy < Y; ++oy)
            for (std::size_t ox = 0; ox < Y; ++ox) {
                const double s = s_out[(c * Y + oy) * Y + ox] * share;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long>(X)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                        if (ix < 0 || ix >= static_cast<long>(X)) continue;
                        s_in[(c * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)] += s;
                    }
                }
            }
    return s_in;
}

Vec lrn_importance(std::size_t channels, std::size_t spatial, std::size_t local_size,
                   std::span<const double> s_out) {
    if (s_out.size() != channels * spatial) throw ShapeError("lrn_importance: dimension mismatch");
    if (local_size == 0 || local_size % 2 == 0 || local_size > channels)
        throw DomainError("lrn_importance: local size must be odd and at most the channel count");
    const std::size_t half = (local_size - 1) / 2;
    const double share = 1.0 / static_cast<double>(local_size);
    Vec s_in(channels * spatial, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = c >= half ? c - half : 0;
        const std::size_t hi = std::min(channels - 1, c + half);
        for (std::size_t src = lo; src <= hi; ++src)
            for (std::size_t p = 0; p < spatial; ++p) s_in[c * spatial + p] += s_out[src * spatial + p] * share;
    }
    return s_in;
}

Matrix affinity(const Matrix& responses, double alpha) {
    const auto st = detail::column_stats(responses);
    const std::size_t n = responses.cols();
    const double sd_max = st.sd.empty() ? 0.0 : *std::max_element(st.sd.begin(), st.sd.end());
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) a(i, j) = detail::affinity_entry(st, sd_max, alpha, std::min(i, j), std::max(i, j));
    return a;
}

Matrix solve(Matrix a, Matrix b, double singular_tol) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw ShapeError("solve: dimension mismatch");
    const std::size_t k = b.cols();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
        if (!(std::fabs(a(pivot, col)) > singular_tol)) throw NumericError("solve: matrix is singular");
        if (pivot != col) {
            std::swap_ranges(a.row(col).begin(), a.row(col).end(), a.row(pivot).begin());
            std::swap_ranges(b.row(col).begin(), b.row(col).end(), b.row(pivot).begin());
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            for (std::size_t c = 0; c < k; ++c) b(r, c) -= f * b(col, c);
        }
    }
    Matrix x(n, k);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t ii = n; ii-- > 0;) {
            double acc = b(ii, c);
            for (std::size_t j = ii + 1; j < n; ++j) acc -= a(ii, j) * x(j, c);
            x(ii, c) = acc / a(ii, ii);
        }
    return x;
}

}  // namespace serial

}  // namespace nisp::kernels
