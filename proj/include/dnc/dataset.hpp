#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnc/numerics.hpp"

namespace dnc {

struct LabeledDataset {
    Matrix inputs;
    std::vector<std::size_t> labels;
    std::optional<std::vector<std::size_t>> fine_labels;
    std::vector<std::string> label_names;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t input_dim() const noexcept { return inputs.cols(); }
    // max label + 1 (0 for an empty dataset)
    std::size_t num_classes() const;

    // Subset by row index, preserving order.
    LabeledDataset select(std::span<const std::size_t> rows) const;

    void validate() const;
};

// Rows: label[,fine_label],x0,...,x{m-1}. A first line whose leading cell is
// not a number is a header; a fine label column is present only when the
// header names its second column "fine_label". Lines starting with '#' are
// comments, except "# label_names=a,b,..." which sets label names.
LabeledDataset load_csv(const std::string& path);
LabeledDataset parse_csv(const std::string& text);

// Always writes a header. Values use round-trip precision.
void save_csv(const std::string& path, const LabeledDataset& data);
std::string format_csv(const LabeledDataset& data);

struct SyntheticSpec {
    std::size_t classes = 4;
    std::size_t subclusters = 4;
    std::size_t dim = 16;
    std::size_t per_cluster = 200;
    double sigma = 0.08;
    std::uint64_t seed = 0;
};

// Each class owns `subclusters` random unit-direction centers; points are
// center + sigma * N(0, I). Coarse label = class, fine label =
// class * subclusters + subcluster. Rows are grouped by fine label.
LabeledDataset gen_synthetic(const SyntheticSpec& spec);

// Deterministic stratified split: within each fine (or coarse, if no fine
// labels) group, the trailing round(test_fraction * group size) rows go to test.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction);

}  // namespace dnc
