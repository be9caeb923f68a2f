#include "fsgen/matrix.hpp"

#include <cmath>

#include "fsgen/errors.hpp"

namespace fsgen {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("squared_distance: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

Vec matvec(const Matrix& a, std::span<const double> x) {
    if (x.size() != a.cols) throw ShapeError("matvec: vector size does not match column count");
    Vec y(a.rows, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + r * a.cols;
        double sum = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) sum += row[c] * x[c];
        y[r] = sum;
    }
    return y;
}

Vec matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (x.size() != a.rows) throw ShapeError("matvec_transposed: vector size does not match row count");
    Vec y(a.cols, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + r * a.cols;
        const double xr = x[r];
        for (std::size_t c = 0; c < a.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v, double scale) {
    if (u.size() != a.rows || v.size() != a.cols) throw ShapeError("add_outer: shape mismatch");
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* row = a.data.data() + r * a.cols;
        const double ur = scale * u[r];
        for (std::size_t c = 0; c < a.cols; ++c) row[c] += ur * v[c];
    }
}

Vec column_mean(const Matrix& m) {
    if (m.rows == 0) throw CapacityError("column_mean: empty matrix");
    Vec mean(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) mean[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(m.rows);
    for (double& v : mean) v *= inv;
    return mean;
}

bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::optional<Matrix> cholesky_lower(const Matrix& sym) {
    if (sym.rows != sym.cols) throw ShapeError("cholesky_lower: matrix not square");
    const std::size_t n = sym.rows;
    Matrix l(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = sym(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double sum = sym(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            l(i, j) = sum / ljj;
        }
    }
    return l;
}

Vec forward_substitute(const Matrix& lower, std::span<const double> b) {
    if (lower.rows != lower.cols) throw ShapeError("forward_substitute: matrix not square");
    if (b.size() != lower.rows) throw ShapeError("forward_substitute: vector size mismatch");
    const std::size_t n = lower.rows;
    Vec y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= lower(i, k) * y[k];
        y[i] = sum / lower(i, i);
    }
    return y;
}

}  // namespace fsgen
