#include "dnc/sinkhorn.hpp"

#include <cmath>
#include <string>

#include "dnc/errors.hpp"

namespace dnc {

void SinkhornConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("sinkhorn: epsilon must be positive, got " + std::to_string(epsilon));
    if (iterations < 1)
        throw ConfigError("sinkhorn: iterations must be >= 1, got " + std::to_string(iterations));
}

AssignmentMatrix sinkhorn_soft_assign(const Matrix& scores, const SinkhornConfig& cfg) {
    cfg.validate();
    const std::size_t k = scores.rows();
    const std::size_t n = scores.cols();
    if (k == 0 || n == 0) throw ShapeError("sinkhorn_soft_assign: empty score matrix");
    if (!all_finite(scores.data())) throw DegenerateError("sinkhorn_soft_assign: non-finite score");

    Matrix log_q(k, n);
    for (std::size_t i = 0; i < k * n; ++i) log_q.data()[i] = scores.data()[i] / cfg.epsilon;

    const double total = log_sum_exp(log_q.data());
    for (double& v : log_q.data()) v -= total;

    const double log_k = std::log(static_cast<double>(k));
    const double log_n = std::log(static_cast<double>(n));
    std::vector<double> column(k);
    for (int it = 0; it < cfg.iterations; ++it) {
        for (std::size_t r = 0; r < k; ++r) {
            auto row = log_q.row(r);
            const double shift = log_sum_exp(row) + log_k;
            for (double& v : row) v -= shift;
        }
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t r = 0; r < k; ++r) column[r] = log_q(r, c);
            const double shift = log_sum_exp(column) + log_n;
            for (std::size_t r = 0; r < k; ++r) log_q(r, c) -= shift;
        }
    }

    Matrix q(k, n);
    for (std::size_t i = 0; i < k * n; ++i) q.data()[i] = std::exp(log_q.data()[i] + log_n);
    return q;
}

std::vector<std::size_t> harden(const AssignmentMatrix& q) {
    std::vector<std::size_t> out(q.cols(), 0);
    for (std::size_t c = 0; c < q.cols(); ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < q.rows(); ++r)
            if (q(r, c) > q(best, c)) best = r;
        out[c] = best;
    }
    return out;
}

std::vector<std::size_t> cluster_class(const Matrix& features, const Matrix& centroids,
                                       const SinkhornConfig& cfg) {
    return harden(sinkhorn_soft_assign(similarity_matrix(centroids, features), cfg));
}

}  // namespace dnc
