#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dnc {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Rows of a FeatureMatrix are embeddings.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<Vector>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    // Appends a row; the first row fixes the column count of an empty matrix.
    void push_row(std::span<const double> values);

    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Dot product summed left to right over the index.
double dot(std::span<const double> u, std::span<const double> v);

double l2_norm(std::span<const double> v);

// Throws DegenerateError on a zero (or non-finite) vector. Vectors whose norm is
// already 1 to within a few ulps are returned unchanged, so the operation is
// bitwise idempotent.
Vector l2_normalize(std::span<const double> v);

void l2_normalize_rows(Matrix& m);

// Negated cosine similarity: -u.v / (|u||v|).
double cosine_distance(std::span<const double> u, std::span<const double> v);

// S(n, m) = X.row(n) . P.row(m). Inputs are expected to be row-normalized.
Matrix similarity_matrix(const Matrix& x, const Matrix& p);

// a (n x k) times b (k x m), each output entry summed left to right over k.
Matrix matmul(const Matrix& a, const Matrix& b);

// log(sum(exp(v))) with max-shift.
double log_sum_exp(std::span<const double> v);

// Index of the largest entry; ties resolve to the smallest index.
std::size_t argmax(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace dnc
