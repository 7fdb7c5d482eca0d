#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dnc/centroid_bank.hpp"
#include "dnc/numerics.hpp"

namespace dnc {

struct LossConfig {
    double temperature = 1.0;  // logit scale applied to cosine similarities

    void validate() const;
};

// Per-(sample, class) best sub-centroid similarity and the sub index that won.
struct ClassScores {
    Matrix scores;                  // N x C
    std::vector<std::size_t> best;  // N x C row-major, winning sub index
};

struct Prediction {
    std::size_t class_id = 0;
    std::size_t sub_id = 0;  // winning sub-centroid of class_id
    Vector class_scores;
};

struct LossResult {
    double loss = 0.0;
    Matrix grad_features;  // N x d
};

ClassScores class_scores(const Matrix& features, const SubCentroidBank& bank);

// Winner-takes-all over all sub-centroids; ties go to the smallest class, then
// the smallest sub index.
std::vector<Prediction> predict(const Matrix& features, const SubCentroidBank& bank);

// Mean cross-entropy of softmax(temperature * class_scores) against labels.
// The bank is a constant; each class's gradient flows through its winning
// sub-centroid only.
LossResult dnc_loss(const Matrix& features, std::span<const std::size_t> labels,
                    const SubCentroidBank& bank, const LossConfig& cfg);

// Shared by both heads: mean softmax cross-entropy over N x C logits and its
// gradient with respect to the logits.
struct LogitLoss {
    double loss = 0.0;
    Matrix grad_logits;
};
LogitLoss softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

}  // namespace dnc
