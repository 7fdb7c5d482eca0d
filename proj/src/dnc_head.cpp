#include "dnc/dnc_head.hpp"

#include <cmath>
#include <string>

#include "dnc/errors.hpp"

namespace dnc {

void LossConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ConfigError("loss: temperature must be positive, got " + std::to_string(temperature));
}

ClassScores class_scores(const Matrix& features, const SubCentroidBank& bank) {
    if (features.cols() != bank.dim())
        throw ShapeError("class_scores: feature dimension " + std::to_string(features.cols()) +
                         " vs bank dimension " + std::to_string(bank.dim()));
    const std::size_t n = features.rows();
    const std::size_t c_count = bank.num_classes();
    const Matrix sims = similarity_matrix(features, bank.centroids());
    ClassScores out{Matrix(n, c_count), std::vector<std::size_t>(n * c_count, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < c_count; ++c) {
            const std::size_t base = bank.offset(c);
            std::size_t best = 0;
            for (std::size_t k = 1; k < bank.subs(c); ++k)
                if (sims(i, base + k) > sims(i, base + best)) best = k;
            out.scores(i, c) = sims(i, base + best);
            out.best[i * c_count + c] = best;
        }
    }
    return out;
}

std::vector<Prediction> predict(const Matrix& features, const SubCentroidBank& bank) {
    const ClassScores cs = class_scores(features, bank);
    std::vector<Prediction> out(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto row = cs.scores.row(i);
        const std::size_t c = argmax(row);
        out[i].class_id = c;
        out[i].sub_id = cs.best[i * bank.num_classes() + c];
        out[i].class_scores.assign(row.begin(), row.end());
    }
    return out;
}

LogitLoss softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
    const std::size_t n = logits.rows();
    const std::size_t c_count = logits.cols();
    if (n == 0) throw ShapeError("cross-entropy: empty batch");
    if (labels.size() != n)
        throw ShapeError("cross-entropy: " + std::to_string(n) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    if (!all_finite(logits.data())) throw DegenerateError("cross-entropy: non-finite logit");

    LogitLoss out{0.0, Matrix(n, c_count)};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c_count)
            throw DataError("cross-entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(c_count) + ")");
        const auto row = logits.row(i);
        const double lse = log_sum_exp(row);
        out.loss += (lse - row[labels[i]]) * inv_n;
        auto g = out.grad_logits.row(i);
        for (std::size_t c = 0; c < c_count; ++c) g[c] = std::exp(row[c] - lse) * inv_n;
        g[labels[i]] -= inv_n;
    }
    return out;
}

LossResult dnc_loss(const Matrix& features, std::span<const std::size_t> labels,
                    const SubCentroidBank& bank, const LossConfig& cfg) {
    cfg.validate();
    if (!all_finite(features.data())) throw DegenerateError("dnc_loss: non-finite feature");
    const ClassScores cs = class_scores(features, bank);
    Matrix logits = cs.scores;
    for (double& v : logits.data()) v *= cfg.temperature;
    const LogitLoss ce = softmax_cross_entropy(logits, labels);

    const std::size_t c_count = bank.num_classes();
    LossResult out{ce.loss, Matrix(features.rows(), features.cols())};
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto g = out.grad_features.row(i);
        for (std::size_t c = 0; c < c_count; ++c) {
            const double w = cfg.temperature * ce.grad_logits(i, c);
            const auto p = bank.centroid(c, cs.best[i * c_count + c]);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * p[j];
        }
    }
    return out;
}

}  // namespace dnc
