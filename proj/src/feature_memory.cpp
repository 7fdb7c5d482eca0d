#include "dnc/feature_memory.hpp"

#include <string>

#include "dnc/errors.hpp"

namespace dnc {

FeatureMemory::FeatureMemory(std::size_t capacity_batches, std::size_t batch_size,
                             std::size_t num_classes)
    : capacity_batches_(capacity_batches), batch_size_(batch_size), num_classes_(num_classes) {
    if (num_classes == 0) throw ConfigError("memory: need at least one class");
}

void FeatureMemory::push_batch(const Matrix& features, std::span<const std::size_t> labels) {
    if (features.rows() != labels.size())
        throw ShapeError("memory: " + std::to_string(features.rows()) + " features vs " +
                         std::to_string(labels.size()) + " labels");
    for (auto y : labels)
        if (y >= num_classes_)
            throw DataError("memory: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes_) + ")");
    const std::uint64_t age = batches_seen_++;
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        entries_.push_back({Vector(row.begin(), row.end()), labels[r], age});
    }
    while (entries_.size() > capacity()) entries_.pop_front();
}

Matrix FeatureMemory::gather_class(const Matrix& current_features,
                                   std::span<const std::size_t> current_labels,
                                   std::size_t c) const {
    if (current_features.rows() != current_labels.size())
        throw ShapeError("memory: feature/label count mismatch");
    Matrix out(0, current_features.cols());
    for (std::size_t r = 0; r < current_features.rows(); ++r)
        if (current_labels[r] == c) out.push_row(current_features.row(r));
    for (const auto& e : entries_)
        if (e.label == c) out.push_row(e.embedding);
    return out;
}

}  // namespace dnc
