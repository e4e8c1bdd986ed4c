#include <gtest/gtest.h>

#include "builders.hpp"
#include "nisp/error.hpp"
#include "nisp/kernels.hpp"

using namespace nisp;
using namespace nisp::testing;
namespace ks = nisp::kernels::serial;
namespace ko = nisp::kernels::omp;

// Both versions reduce every output in the same order, so the comparisons are exact.

TEST(Kernels, DenseBitIdentical) {
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        const std::size_t out = pick(rng, 1, 40), in = pick(rng, 1, 40);
        const Matrix w = random_matrix(rng, out, in);
        const Vec b = random_vec(rng, out), x = random_vec(rng, in), s = random_vec(rng, out, 0, 1);
        ASSERT_EQ(ks::dense_forward(w, b, x), ko::dense_forward(w, b, x));
        ASSERT_EQ(ks::dense_importance(w, s), ko::dense_importance(w, s));
    }
}

TEST(Kernels, ConvPoolLrnBitIdentical) {
    Rng rng(32);
    for (int t = 0; t < 50; ++t) {
        const Geometry g = random_window(rng, 9, 3, 4, false);
        const Vec k = random_vec(rng, g.kernel * g.kernel * g.in_channels * g.out_channels);
        const Vec b = random_vec(rng, g.out_channels);
        const Vec x = random_vec(rng, g.in_channels * g.in_size * g.in_size);
        const Vec s = random_vec(rng, g.out_channels * g.out_size * g.out_size, 0, 1);
        ASSERT_EQ(ks::conv_forward(g, k, b, x), ko::conv_forward(g, k, b, x));
        ASSERT_EQ(ks::conv_importance(g, k, s), ko::conv_importance(g, k, s));
        const Geometry pg = random_window(rng, 9, 3, 4, true);
        const Vec ps = random_vec(rng, pg.out_channels * pg.out_size * pg.out_size, 0, 1);
        ASSERT_EQ(ks::pool_importance(pg, ps), ko::pool_importance(pg, ps));
        const std::size_t channels = pick(rng, 1, 7), spatial = pick(rng, 1, 9);
        const std::size_t local = 2 * pick(rng, 0, (channels - 1) / 2) + 1;
        const Vec ls = random_vec(rng, channels * spatial, 0, 1);
        ASSERT_EQ(ks::lrn_importance(channels, spatial, local, ls), ko::lrn_importance(channels, spatial, local, ls));
    }
}

TEST(Kernels, AffinityAndSolveBitIdentical) {
    Rng rng(33);
    for (int t = 0; t < 20; ++t) {
        const Matrix r = random_matrix(rng, pick(rng, 2, 30), pick(rng, 2, 12));
        ASSERT_EQ(ks::affinity(r, 0.5), ko::affinity(r, 0.5));
        const std::size_t n = pick(rng, 1, 10);
        Matrix a = random_matrix(rng, n, n);
        for (std::size_t i = 0; i < n; ++i) a(i, i) += 4.0;
        const Matrix b = random_matrix(rng, n, pick(rng, 1, 4));
        ASSERT_EQ(ks::solve(a, b, 1e-14), ko::solve(a, b, 1e-14));
    }
}

TEST(Kernels, SolveRecoversKnownSolution) {
    Rng rng(34);
    const std::size_t n = 6;
    Matrix a = random_matrix(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 3.0;
    const Matrix x = random_matrix(rng, n, 2);
    const Matrix got = ks::solve(a, matmul(a, x), 1e-14);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got(i, j), x(i, j), 1e-12);
}

TEST(Kernels, SolveNeedsPivoting) {
    Matrix a(2, 2);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    Matrix b(2, 1);
    b(0, 0) = 2.0;
    b(1, 0) = 3.0;
    const Matrix x = ks::solve(a, b, 1e-14);
    EXPECT_EQ(x(0, 0), 3.0);
    EXPECT_EQ(x(1, 0), 2.0);
}

TEST(Kernels, SingularSystemThrows) {
    Matrix a(2, 2, 1.0);
    EXPECT_THROW(ks::solve(a, Matrix::identity(2), 1e-14), NumericError);
    EXPECT_THROW(ko::solve(a, Matrix::identity(2), 1e-14), NumericError);
}

TEST(Kernels, ThreadCountIsPositive) { EXPECT_GE(kernels::max_threads(), 1); }
