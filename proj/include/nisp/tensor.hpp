#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nisp {

using Vec = std::vector<double>;

/// Shape of one layer response. Vectors are {n, 1, 1}.
///
/// Responses are stored flattened channel-major, then row-major over the
/// spatial grid: index(c, y, x) = (c * height + y) * width + x. Every module
/// relies on this single convention, so a Dense layer reading a 3-way tensor
/// sees exactly this order.
struct Shape {
    std::size_t channels = 0;
    std::size_t height = 1;
    std::size_t width = 1;

    static Shape vector(std::size_t n) { return {n, 1, 1}; }
    static Shape square(std::size_t c, std::size_t side) { return {c, side, side}; }

    std::size_t size() const { return channels * height * width; }
    std::size_t spatial() const { return height * width; }
    bool is_vector() const { return height == 1 && width == 1; }
    std::size_t index(std::size_t c, std::size_t y, std::size_t x) const {
        return (c * height + y) * width + x;
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vec matvec(const Matrix& a, std::span<const double> x);
// aᵀ x without materializing the transpose.
Vec matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix elementwise_abs(const Matrix& a);

}  // namespace nisp
