#pragma once

// Data-parallel inner loops shared by the engine, ranking and propagation modules.
//
// Every kernel exists twice: `serial` is the straightforward reference kept for
// testing, `omp` distributes independent output elements across OpenMP threads.
// Each output element is reduced in the same order in both versions, so results
// are bit-identical regardless of thread count.

#include <span>

#include "nisp/model.hpp"
#include "nisp/tensor.hpp"

namespace nisp::kernels {

namespace serial {

// w x + b, no activation.
Vec dense_forward(const Matrix& w, std::span<const double> bias, std::span<const double> x);
// |w|ᵀ s
Vec dense_importance(const Matrix& w, std::span<const double> s_out);
// Cross-correlation of x (C_in×X×X) with the kernel, plus bias; no activation.
Vec conv_forward(const Geometry& g, std::span<const double> kernel, std::span<const double> bias,
                 std::span<const double> x);
// Adjoint convolution with |kernel|. Importance landing on padding is dropped.
Vec conv_importance(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out);
// Each window shares its importance equally over its k·k input positions.
Vec pool_importance(const Geometry& g, std::span<const double> s_out);
// Cross-channel band of width local_size, 1/local_size per contribution.
Vec lrn_importance(std::size_t channels, std::size_t spatial, std::size_t local_size,
                   std::span<const double> s_out);
// A(i,j) = alpha·max(sd_i, sd_j) + (1−alpha)·(1−|corr_ij|), zero diagonal.
Matrix affinity(const Matrix& responses, double alpha);
// Solves a·x = b for every column of b by partial-pivot Gaussian elimination.
// Throws NumericError when a pivot magnitude falls below singular_tol.
Matrix solve(Matrix a, Matrix b, double singular_tol);

}  // namespace serial

namespace omp {

Vec dense_forward(const Matrix& w, std::span<const double> bias, std::span<const double> x);
Vec dense_importance(const Matrix& w, std::span<const double> s_out);
Vec conv_forward(const Geometry& g, std::span<const double> kernel, std::span<const double> bias,
                 std::span<const double> x);
Vec conv_importance(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out);
Vec pool_importance(const Geometry& g, std::span<const double> s_out);
Vec lrn_importance(std::size_t channels, std::size_t spatial, std::size_t local_size,
                   std::span<const double> s_out);
Matrix affinity(const Matrix& responses, double alpha);
Matrix solve(Matrix a, Matrix b, double singular_tol);

}  // namespace omp

/// Threads the omp kernels will use (1 when built without OpenMP).
int max_threads();

namespace detail {

struct ColumnStats {
    Matrix centered_t;  // N×M, row j = feature j minus its mean
    Vec sd;             // population standard deviation; exactly 0 for constant features
    Vec norm;           // sqrt(Σ centered²)
};

// Shared by both affinity kernels so they see identical statistics.
ColumnStats column_stats(const Matrix& responses);
double affinity_entry(const ColumnStats& st, double sd_max, double alpha, std::size_t i, std::size_t j);

}  // namespace detail

}  // namespace nisp::kernels
