#pragma once

#include <cstdint>
#include <span>

#include "dnc/numerics.hpp"

namespace dnc {

// Parametric head: logits = X W + b, W is d x C.
struct LinearClassifier {
    Matrix weight;
    Vector bias;

    std::size_t num_classes() const noexcept { return bias.size(); }
    std::size_t dim() const noexcept { return weight.rows(); }

    // W uniform in +-1/sqrt(d), b zero.
    static LinearClassifier init(std::size_t dim, std::size_t num_classes, std::uint64_t seed);

    bool operator==(const LinearClassifier&) const = default;
};

Matrix linear_logits(const Matrix& features, const LinearClassifier& clf);

struct SoftmaxLossResult {
    double loss = 0.0;
    Matrix grad_features;
    Matrix grad_weight;
    Vector grad_bias;
};

SoftmaxLossResult softmax_ce_loss(const Matrix& features, std::span<const std::size_t> labels,
                                  const LinearClassifier& clf);

}  // namespace dnc
