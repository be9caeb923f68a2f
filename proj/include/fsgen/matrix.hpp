#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fsgen {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. All numeric work in the library runs in
// double precision; narrower types only appear in file formats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(std::span<const double> a, std::span<const double> b);

// y = A x  (A is rows x cols, x has cols entries)
Vec matvec(const Matrix& a, std::span<const double> x);
// y = A^T x  (x has rows entries, result has cols)
Vec matvec_transposed(const Matrix& a, std::span<const double> x);
// A += scale * (u v^T)
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v, double scale = 1.0);

Vec column_mean(const Matrix& m);
bool all_finite(std::span<const double> values);

// Lower-triangular Cholesky factor of a symmetric matrix, or nullopt when the
// matrix is not numerically positive definite.
std::optional<Matrix> cholesky_lower(const Matrix& sym);

// Solves L y = b for lower-triangular L.
Vec forward_substitute(const Matrix& lower, std::span<const double> b);

}  // namespace fsgen
