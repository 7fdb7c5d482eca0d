#pragma once

#include <cstddef>
#include <vector>

#include "dnc/numerics.hpp"

namespace dnc {

struct SinkhornConfig {
    double epsilon = 0.05;
    int iterations = 3;

    void validate() const;
};

// K x N soft assignment of N samples to K clusters. Rows are clusters.
using AssignmentMatrix = Matrix;

// Entropic equipartition assignment over a K x N score matrix.
//
// Runs the online clustering loop: exp(scores / epsilon) normalized to unit
// mass, then `iterations` rounds of row normalization (each row to 1/K) and
// column normalization (each column to 1/N), and a final rescale by N so each
// column sums to 1. Everything is carried in the log domain; the result is
// exponentiated once at the end, so large scores / small epsilon cannot
// overflow.
AssignmentMatrix sinkhorn_soft_assign(const Matrix& scores, const SinkhornConfig& cfg);

// Per-column argmax; ties go to the smallest cluster index.
std::vector<std::size_t> harden(const AssignmentMatrix& q);

// Cluster the rows of `features` (N x d) onto the rows of `centroids` (K x d)
// under the equipartition constraint.
std::vector<std::size_t> cluster_class(const Matrix& features, const Matrix& centroids,
                                       const SinkhornConfig& cfg);

}  // namespace dnc
