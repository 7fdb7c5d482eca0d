#include "dnc/softmax_baseline.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dnc/dnc_head.hpp"
#include "dnc/errors.hpp"

namespace dnc {

LinearClassifier LinearClassifier::init(std::size_t dim, std::size_t num_classes,
                                        std::uint64_t seed) {
    if (dim == 0 || num_classes == 0) throw ConfigError("linear classifier: empty shape");
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LinearClassifier clf{Matrix(dim, num_classes), Vector(num_classes, 0.0)};
    for (double& w : clf.weight.data()) w = dist(rng);
    return clf;
}

Matrix linear_logits(const Matrix& features, const LinearClassifier& clf) {
    if (clf.bias.size() != clf.weight.cols())
        throw ShapeError("linear_logits: bias length does not match class count");
    if (features.cols() != clf.weight.rows())
        throw ShapeError("linear_logits: feature dimension " + std::to_string(features.cols()) +
                         " vs weight rows " + std::to_string(clf.weight.rows()));
    Matrix logits = matmul(features, clf.weight);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += clf.bias[c];
    }
    return logits;
}

SoftmaxLossResult softmax_ce_loss(const Matrix& features, std::span<const std::size_t> labels,
                                  const LinearClassifier& clf) {
    const LogitLoss ce = softmax_cross_entropy(linear_logits(features, clf), labels);
    SoftmaxLossResult out;
    out.loss = ce.loss;
    out.grad_features = matmul(ce.grad_logits, clf.weight.transposed());
    out.grad_weight = matmul(features.transposed(), ce.grad_logits);
    out.grad_bias.assign(clf.num_classes(), 0.0);
    for (std::size_t r = 0; r < ce.grad_logits.rows(); ++r)
        for (std::size_t c = 0; c < clf.num_classes(); ++c) out.grad_bias[c] += ce.grad_logits(r, c);
    return out;
}

}  // namespace dnc
