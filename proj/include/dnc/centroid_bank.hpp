#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dnc/numerics.hpp"

namespace dnc {

class Encoder;

struct MomentumConfig {
    double mu = 0.999;

    void validate() const;
};

// C classes, K_c unit-norm sub-centroids per class, all of dimension d.
// Sub-centroids of class c occupy rows [offset(c), offset(c) + subs(c)) of the
// flat centroid matrix.
class SubCentroidBank {
public:
    SubCentroidBank() = default;
    SubCentroidBank(std::vector<std::size_t> subs_per_class, Matrix centroids);

    std::size_t num_classes() const noexcept { return subs_.size(); }
    std::size_t subs(std::size_t c) const { return subs_.at(c); }
    const std::vector<std::size_t>& subs_per_class() const noexcept { return subs_; }
    std::size_t total_subs() const noexcept { return centroids_.rows(); }
    std::size_t dim() const noexcept { return centroids_.cols(); }
    std::size_t offset(std::size_t c) const { return offsets_.at(c); }

    std::span<const double> centroid(std::size_t c, std::size_t k) const;
    const Matrix& centroids() const noexcept { return centroids_; }
    Matrix class_block(std::size_t c) const;

    // Class and sub index owning flat row r.
    std::pair<std::size_t, std::size_t> locate(std::size_t flat_row) const;

    bool anchored() const noexcept { return anchor_ids_.has_value(); }
    // Training-set row of each sub-centroid's anchor, in flat row order.
    const std::optional<std::vector<std::uint64_t>>& anchor_ids() const noexcept {
        return anchor_ids_;
    }
    std::uint64_t anchor_id(std::size_t c, std::size_t k) const;

    void set_centroid(std::size_t c, std::size_t k, std::span<const double> unit_vector);
    void set_anchor_ids(std::optional<std::vector<std::uint64_t>> ids);

    bool operator==(const SubCentroidBank&) const = default;

private:
    std::vector<std::size_t> subs_;
    std::vector<std::size_t> offsets_;
    Matrix centroids_;
    std::optional<std::vector<std::uint64_t>> anchor_ids_;
};

// I.i.d. uniform directions on the unit sphere from a seeded generator.
SubCentroidBank init_bank(std::span<const std::size_t> subs_per_class, std::size_t dim,
                          std::uint64_t seed);
SubCentroidBank init_bank(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                          std::uint64_t seed);

struct MomentumUpdateReport {
    std::vector<std::size_t> updated;     // sub indices that moved
    std::vector<std::size_t> degenerate;  // blend had zero norm; centroid kept
};

// p_k <- normalize(mu * p_k + (1 - mu) * mean_k) for every k with counts[k] > 0.
// Only class c is touched.
MomentumUpdateReport momentum_update(SubCentroidBank& bank, std::size_t c,
                                     const Matrix& cluster_means,
                                     std::span<const std::size_t> counts,
                                     const MomentumConfig& cfg);

// Replace each sub-centroid of class c by the most similar training embedding
// labelled c (ties: lowest row). Several sub-centroids may share an anchor.
SubCentroidBank anchor_to_observations(const SubCentroidBank& bank, const Matrix& train_features,
                                       std::span<const std::size_t> train_labels);

// Re-embed every anchor sample with the current encoder.
SubCentroidBank refresh_anchored(const SubCentroidBank& bank, const Encoder& encoder,
                                 const Matrix& train_inputs);

}  // namespace dnc
