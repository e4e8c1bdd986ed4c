#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nisp/error.hpp"
#include "nisp/kernels.hpp"

namespace nisp::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace omp {

namespace {

using Index = long;  // OpenMP loop counters must be signed for older runtimes

inline bool in_map(long v, std::size_t side) { return v >= 0 && v < static_cast<long>(side); }

}  // namespace

Vec dense_forward(const Matrix& w, std::span<const double> bias, std::span<const double> x) {
    if (w.cols() != x.size() || w.rows() != bias.size()) throw ShapeError("dense_forward: dimension mismatch");
    const Index rows = static_cast<Index>(w.rows());
    const std::size_t cols = w.cols();
    Vec out(w.rows());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        const auto row = w.row(static_cast<std::size_t>(i));
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[static_cast<std::size_t>(i)] = acc + bias[static_cast<std::size_t>(i)];
    }
    return out;
}

Vec dense_importance(const Matrix& w, std::span<const double> s_out) {
    if (w.rows() != s_out.size()) throw ShapeError("dense_importance: dimension mismatch");
    const Index cols = static_cast<Index>(w.cols());
    const std::size_t rows = w.rows();
    Vec s_in(w.cols(), 0.0);
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += std::fabs(w(i, static_cast<std::size_t>(j))) * s_out[i];
        s_in[static_cast<std::size_t>(j)] = acc;
    }
    return s_in;
}

Vec conv_forward(const Geometry& g, std::span<const double> kernel, std::span<const double> bias,
                 std::span<const double> x) {
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (x.size() != g.in_channels * X * X || bias.size() != g.out_channels ||
        kernel.size() != k * k * g.in_channels * g.out_channels)
        throw ShapeError("conv_forward: dimension mismatch");
    Vec out(g.out_channels * Y * Y);
    const Index planes = static_cast<Index>(g.out_channels * Y);
#pragma omp parallel for schedule(static)
    for (Index plane = 0; plane < planes; ++plane) {
        const std::size_t co = static_cast<std::size_t>(plane) / Y;
        const std::size_t oy = static_cast<std::size_t>(plane) % Y;
        for (std::size_t ox = 0; ox < Y; ++ox) {
            double acc = bias[co];
            for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                    if (!in_map(iy, X)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                        if (!in_map(ix, X)) continue;
                        acc += kernel[((co * g.in_channels + ci) * k + ky) * k + kx] *
                               x[(ci * X + static_cast<std::size_t>(iy)) * X + static_cast<std::size_t>(ix)];
                    }
                }
            out[(co * Y + oy) * Y + ox] = acc;
        }
    }
    return out;
}

Vec conv_importance(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out) {
    const std::size_t X = g.in_size, Y = g.out_size, k = g.kernel;
    if (s_out.size() != g.out_channels * Y * Y || kernel.size() != k * k * g.in_channels * g.out_channels)
        throw ShapeError("conv_importance: dimension mismatch");
    Vec s_in(g.in_channels * X * X, 0.0);
    const Index channels = static_cast<Index>(g.in_channels);
    // Input channels own disjoint slices of s_in.
#pragma omp parallel for schedule(static)
    for (Index ni = 0; ni < channels; ++ni) {
        const std::size_t n = static_cast<std::size_t>(ni);
        double* dst = s_in.data() + n * X * X;
        for (std::size_t f = 0; f < g.out_channels; ++f)
            for (std::size_t oy = 0; oy < Y; ++oy)
                for (std::size_t ox = 0; ox < Y; ++ox) {
                    const double s = s_out[(f * Y + oy) * Y + ox];
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                        if (!in_map(iy, X)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                            if (!in_map(ix, X)) continue;
                            dst[static_cast<std::size_t>(iy) * X + static_cast<std::size_t>(ix)] +=
                                std::fabs(kernel[((f * g.in_channels + n) * k + ky) * k + kx]) * s;
                        }
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
    const Index channels = static_cast<Index>(g.in_channels);
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < channels; ++ci) {
        const std::size_t c = static_cast<std::size_t>(ci);
        double* dst = s_in.data() + c * X * X;
        for (std::size_t oy = 0; oy < Y; ++oy)
            for (std::size_t ox = 0; ox < Y; ++ox) {
                const double s = s_out[(c * Y + oy) * Y + ox] * share;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
                    if (!in_map(iy, X)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                        if (!in_map(ix, X)) continue;
                        dst[static_cast<std::size_t>(iy) * X + static_cast<std::size_t>(ix)] += s;
                    }
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
    const Index n = static_cast<Index>(channels);
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < n; ++ci) {
        const std::size_t c = static_cast<std::size_t>(ci);
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
    const Index rows = static_cast<Index>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (Index ii = 0; ii < rows; ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = detail::affinity_entry(st, sd_max, alpha, i, j);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
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
        const Index last = static_cast<Index>(n);
#pragma omp parallel for schedule(static)
        for (Index ri = static_cast<Index>(col) + 1; ri < last; ++ri) {
            const std::size_t r = static_cast<std::size_t>(ri);
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            for (std::size_t c = 0; c < k; ++c) b(r, c) -= f * b(col, c);
        }
    }
    Matrix x(n, k);
    const Index rhs = static_cast<Index>(k);
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < rhs; ++ci) {
        const std::size_t c = static_cast<std::size_t>(ci);
        for (std::size_t ii = n; ii-- > 0;) {
            double acc = b(ii, c);
            for (std::size_t j = ii + 1; j < n; ++j) acc -= a(ii, j) * x(j, c);
            x(ii, c) = acc / a(ii, ii);
        }
    }
    return x;
}

}  // namespace omp

}  // namespace nisp::kernels
