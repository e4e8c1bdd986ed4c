#pragma once

// Independent reference computations. None of these call the library's kernels.

#include <vector>

#include "nisp/model.hpp"
#include "nisp/tensor.hpp"

namespace nisp::testing {

// Scatter form: walk every output position and kernel tap, push |k|·s to the input it reads.
Vec brute_conv_importance(const Geometry& g, const Vec& kernel, const Vec& s_out);
Vec brute_pool_importance(const Geometry& g, const Vec& s_out);
Vec brute_lrn_importance(std::size_t local, std::size_t channels, std::size_t spatial, const Vec& s_out);

// Direct sliding-window convolution, no activation.
Vec naive_conv(const Geometry& g, const Vec& kernel, const Vec& bias, const Vec& x);

// Two-pass statistics, then the affinity formula entry by entry.
Matrix naive_affinity(const Matrix& responses, double alpha);

// Σ_{l=1}^{terms} (rA)^l by repeated multiplication.
Matrix path_series(const Matrix& a, double r, int terms);

// (I − rA)^{-1} − I through Eigen's LU.
Matrix eigen_path_matrix(const Matrix& a, double r);

// Largest eigenvalue of a symmetric matrix through Eigen.
double eigen_spectral_radius(const Matrix& a);

// Covariance eigenvalues from the singular values of the centered data (descending).
Vec svd_covariance_spectrum(const Matrix& responses);

double max_abs_diff(const Vec& a, const Vec& b);
double max_rel_diff(const Vec& a, const Vec& b);  // |a−b| / max(|a|, |b|, 1e-300)

}  // namespace nisp::testing
