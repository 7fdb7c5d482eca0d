#include "dnc/centroid_bank.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dnc/errors.hpp"
#include "dnc/feature_net.hpp"

namespace dnc {

void MomentumConfig::validate() const {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw ConfigError("momentum coefficient must lie in [0, 1], got " + std::to_string(mu));
}

SubCentroidBank::SubCentroidBank(std::vector<std::size_t> subs_per_class, Matrix centroids)
    : subs_(std::move(subs_per_class)), centroids_(std::move(centroids)) {
    if (subs_.empty()) throw ConfigError("bank: need at least one class");
    std::size_t total = 0;
    for (std::size_t c = 0; c < subs_.size(); ++c) {
        if (subs_[c] == 0)
            throw ConfigError("bank: class " + std::to_string(c) + " has no sub-centroids");
        offsets_.push_back(total);
        total += subs_[c];
    }
    if (centroids_.rows() != total)
        throw ShapeError("bank: " + std::to_string(centroids_.rows()) + " centroid rows for " +
                         std::to_string(total) + " sub-centroids");
    if (centroids_.cols() == 0) throw ConfigError("bank: dimension must be positive");
}

std::span<const double> SubCentroidBank::centroid(std::size_t c, std::size_t k) const {
    if (k >= subs(c)) throw ShapeError("bank: sub index out of range");
    return centroids_.row(offsets_[c] + k);
}

Matrix SubCentroidBank::class_block(std::size_t c) const {
    Matrix block(subs(c), dim());
    for (std::size_t k = 0; k < subs_[c]; ++k) {
        const auto src = centroids_.row(offsets_[c] + k);
        std::copy(src.begin(), src.end(), block.row(k).begin());
    }
    return block;
}

std::pair<std::size_t, std::size_t> SubCentroidBank::locate(std::size_t flat_row) const {
    if (flat_row >= total_subs()) throw ShapeError("bank: flat row out of range");
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat_row);
    const auto c = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
    return {c, flat_row - offsets_[c]};
}

std::uint64_t SubCentroidBank::anchor_id(std::size_t c, std::size_t k) const {
    if (!anchor_ids_) throw DataError("bank is not anchored");
    if (k >= subs(c)) throw ShapeError("bank: sub index out of range");
    return (*anchor_ids_)[offsets_[c] + k];
}

void SubCentroidBank::set_centroid(std::size_t c, std::size_t k, std::span<const double> v) {
    if (k >= subs(c)) throw ShapeError("bank: sub index out of range");
    if (v.size() != dim()) throw ShapeError("bank: centroid dimension mismatch");
    std::copy(v.begin(), v.end(), centroids_.row(offsets_[c] + k).begin());
}

void SubCentroidBank::set_anchor_ids(std::optional<std::vector<std::uint64_t>> ids) {
    if (ids && ids->size() != total_subs())
        throw ShapeError("bank: " + std::to_string(ids->size()) + " anchor ids for " +
                         std::to_string(total_subs()) + " sub-centroids");
    anchor_ids_ = std::move(ids);
}

SubCentroidBank init_bank(std::span<const std::size_t> subs_per_class, std::size_t dim,
                          std::uint64_t seed) {
    if (dim == 0) throw ConfigError("bank: dimension must be positive");
    std::size_t total = 0;
    for (auto k : subs_per_class) total += k;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix centroids(total, dim);
    for (std::size_t r = 0; r < total; ++r) {
        double n = 0.0;
        do {
            for (double& v : centroids.row(r)) v = normal(rng);
            n = l2_norm(centroids.row(r));
        } while (!(n > 0.0));
    }
    l2_normalize_rows(centroids);
    return SubCentroidBank({subs_per_class.begin(), subs_per_class.end()}, std::move(centroids));
}

SubCentroidBank init_bank(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                          std::uint64_t seed) {
    const std::vector<std::size_t> subs(num_classes, per_class);
    return init_bank(subs, dim, seed);
}

MomentumUpdateReport momentum_update(SubCentroidBank& bank, std::size_t c,
                                     const Matrix& cluster_means,
                                     std::span<const std::size_t> counts,
                                     const MomentumConfig& cfg) {
    cfg.validate();
    if (c >= bank.num_classes()) throw ShapeError("momentum_update: class out of range");
    const std::size_t k_count = bank.subs(c);
    if (cluster_means.rows() != k_count || counts.size() != k_count ||
        cluster_means.cols() != bank.dim())
        throw ShapeError("momentum_update: expected " + std::to_string(k_count) + " x " +
                         std::to_string(bank.dim()) + " means and " + std::to_string(k_count) +
                         " counts");

    MomentumUpdateReport report;
    Vector blend(bank.dim());
    for (std::size_t k = 0; k < k_count; ++k) {
        if (counts[k] == 0) continue;
        const auto old = bank.centroid(c, k);
        const auto mean = cluster_means.row(k);
        for (std::size_t i = 0; i < blend.size(); ++i)
            blend[i] = cfg.mu * old[i] + (1.0 - cfg.mu) * mean[i];
        if (!(l2_norm(blend) > 0.0)) {
            report.degenerate.push_back(k);
            continue;
        }
        bank.set_centroid(c, k, l2_normalize(blend));
        report.updated.push_back(k);
    }
    return report;
}

SubCentroidBank anchor_to_observations(const SubCentroidBank& bank, const Matrix& train_features,
                                       std::span<const std::size_t> train_labels) {
    if (train_features.rows() != train_labels.size())
        throw ShapeError("anchor_to_observations: feature/label count mismatch");
    if (!train_features.empty() && train_features.cols() != bank.dim())
        throw ShapeError("anchor_to_observations: feature dimension mismatch");

    std::vector<std::vector<std::size_t>> members(bank.num_classes());
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
        if (train_labels[i] >= bank.num_classes())
            throw DataError("anchor_to_observations: label " + std::to_string(train_labels[i]) +
                            " out of range");
        members[train_labels[i]].push_back(i);
    }
    std::string empty;
    for (std::size_t c = 0; c < members.size(); ++c)
        if (members[c].empty()) empty += (empty.empty() ? "" : ", ") + std::to_string(c);
    if (!empty.empty())
        throw DataError("anchor_to_observations: no training samples for class(es) " + empty);

    SubCentroidBank out = bank;
    std::vector<std::uint64_t> ids(bank.total_subs());
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        for (std::size_t k = 0; k < bank.subs(c); ++k) {
            const auto p = bank.centroid(c, k);
            std::size_t best = members[c].front();
            double best_sim = dot(p, train_features.row(best));
            for (std::size_t idx : members[c]) {
                const double s = dot(p, train_features.row(idx));
                if (s > best_sim) {
                    best_sim = s;
                    best = idx;
                }
            }
            out.set_centroid(c, k, train_features.row(best));
            ids[bank.offset(c) + k] = best;
        }
    }
    out.set_anchor_ids(std::move(ids));
    return out;
}

SubCentroidBank refresh_anchored(const SubCentroidBank& bank, const Encoder& encoder,
                                 const Matrix& train_inputs) {
    if (!bank.anchored()) throw DataError("refresh_anchored: bank has no anchors");
    const auto& ids = *bank.anchor_ids();
    Matrix anchors(ids.size(), train_inputs.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= train_inputs.rows())
            throw DataError("refresh_anchored: anchor sample " + std::to_string(ids[r]) +
                            " not in dataset of " + std::to_string(train_inputs.rows()) +
                            " rows");
        const auto src = train_inputs.row(ids[r]);
        std::copy(src.begin(), src.end(), anchors.row(r).begin());
    }
    const Matrix features = encoder.embed(anchors);
    SubCentroidBank out = bank;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto [c, k] = bank.locate(r);
        out.set_centroid(c, k, l2_normalize(features.row(r)));
    }
    return out;
}

}  // namespace dnc
