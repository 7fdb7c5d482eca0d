#include "dnc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dnc/errors.hpp"

namespace dnc {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    Matrix m;
    for (const auto& r : rows) m.push_row(r);
    return m;
}

void Matrix::push_row(std::span<const double> values) {
    if (rows_ == 0 && data_.empty()) {
        cols_ = values.size();
    } else if (values.size() != cols_) {
        throw ShapeError("push_row: row has " + std::to_string(values.size()) +
                         " entries, matrix has " + std::to_string(cols_) + " columns");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ShapeError("dot: dimension mismatch " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > 0.0) || !std::isfinite(n))
        throw DegenerateError("l2_normalize: vector has zero or non-finite norm");
    const double tol = 4.0 * static_cast<double>(v.size() + 2) *
                       std::numeric_limits<double>::epsilon();
    if (std::abs(n - 1.0) <= tol) return Vector(v.begin(), v.end());
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

void l2_normalize_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const Vector u = l2_normalize(m.row(r));
        std::copy(u.begin(), u.end(), m.row(r).begin());
    }
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ShapeError("cosine_distance: dimension mismatch " + std::to_string(u.size()) +
                         " vs " + std::to_string(v.size()));
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (!(nu > 0.0) || !(nv > 0.0))
        throw DegenerateError("cosine_distance: zero vector");
    // Unit inputs skip the division so this agrees exactly with similarity_matrix.
    const double d = dot(u, v);
    const double tol = 4.0 * static_cast<double>(u.size() + 2) *
                       std::numeric_limits<double>::epsilon();
    if (std::abs(nu - 1.0) <= tol && std::abs(nv - 1.0) <= tol) return -d;
    return -d / (nu * nv);
}

Matrix similarity_matrix(const Matrix& x, const Matrix& p) {
    if (x.cols() != p.cols())
        throw ShapeError("similarity_matrix: feature dimension " + std::to_string(x.cols()) +
                         " vs " + std::to_string(p.cols()));
    Matrix s(x.rows(), p.rows());
    for (std::size_t n = 0; n < x.rows(); ++n)
        for (std::size_t m = 0; m < p.rows(); ++m) s(n, m) = dot(x.row(n), p.row(m));
    return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const auto br = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace dnc
