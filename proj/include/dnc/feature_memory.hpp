#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>

#include "dnc/numerics.hpp"

namespace dnc {

// Bounded FIFO of (embedding, label) pairs from earlier batches. Embeddings
// are stored as pushed and never re-encoded. Not checkpointed.
class FeatureMemory {
public:
    struct Entry {
        Vector embedding;
        std::size_t label = 0;
        std::uint64_t age = 0;  // index of the batch that produced it
    };

    FeatureMemory(std::size_t capacity_batches, std::size_t batch_size, std::size_t num_classes);

    std::size_t capacity() const noexcept { return capacity_batches_ * batch_size_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::deque<Entry>& entries() const noexcept { return entries_; }

    // Appends every row, then evicts oldest entries beyond capacity.
    void push_batch(const Matrix& features, std::span<const std::size_t> labels);

    // Rows of the current batch labelled c, followed by memory entries
    // labelled c from oldest to newest.
    Matrix gather_class(const Matrix& current_features, std::span<const std::size_t> current_labels,
                        std::size_t c) const;

private:
    std::size_t capacity_batches_;
    std::size_t batch_size_;
    std::size_t num_classes_;
    std::uint64_t batches_seen_ = 0;
    std::deque<Entry> entries_;
};

}  // namespace dnc
