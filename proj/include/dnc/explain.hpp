#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnc/centroid_bank.hpp"

namespace dnc {

// [I, own] > [I, rival], where [., .] is cosine similarity and the anchors are
// training-sample ids.
struct RuleClause {
    std::uint64_t own_anchor = 0;
    std::uint64_t rival_anchor = 0;
    std::size_t rival_class = 0;
    std::size_t rival_sub = 0;
};

// IF (clauses of disjunct 0 AND-ed) OR (...) ... THEN class_id.
// One disjunct per sub-centroid of class_id, one clause per rival.
struct Rule {
    std::size_t class_id = 0;
    std::vector<std::vector<RuleClause>> disjuncts;

    std::size_t conjuncts_per_disjunct() const {
        return disjuncts.empty() ? 0 : disjuncts.front().size();
    }
    std::string to_string() const;
};

// Every sub-centroid of every other class.
std::vector<std::pair<std::size_t, std::size_t>> default_rivals(const SubCentroidBank& bank,
                                                                std::size_t c);

Rule build_rule(const SubCentroidBank& bank, std::size_t c,
                std::span<const std::pair<std::size_t, std::size_t>> rivals);

// Anchor ids resolve through the bank's anchor table. Comparisons are strict.
bool evaluate_rule(const Rule& rule, std::span<const double> query_feature,
                   const SubCentroidBank& bank);

struct ReportEntry {
    std::size_t class_id = 0;
    std::size_t sub_id = 0;
    std::optional<std::uint64_t> anchor;
    double similarity = 0.0;
    double normalized = 0.0;  // softmax over the reported similarities
};

struct SimilarityReport {
    std::optional<std::uint64_t> query_id;
    std::size_t predicted = 0;
    std::vector<ReportEntry> entries;  // similarity descending

    std::string to_string() const;
};

SimilarityReport similarity_report(std::span<const double> query_feature,
                                   const SubCentroidBank& bank, std::size_t top_m);

}  // namespace dnc
