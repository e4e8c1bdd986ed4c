#include "nisp/tensor.hpp"

#include <cmath>

#include "nisp/error.hpp"

namespace nisp {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

Vec matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
    Vec out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

Vec matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw ShapeError("matvec_transposed: dimension mismatch");
    Vec out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j) * x[i];
    return out;
}

Matrix elementwise_abs(const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v = std::fabs(v);
    return out;
}

}  // namespace nisp
