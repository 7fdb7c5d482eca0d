#include "dnc/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dnc/dnc_head.hpp"
#include "dnc/errors.hpp"

namespace dnc {
namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string clause_text(const RuleClause& cl) {
    return "[I,#" + std::to_string(cl.own_anchor) + "]>[I,#" + std::to_string(cl.rival_anchor) +
           "]";
}

std::span<const double> resolve_anchor(const SubCentroidBank& bank, std::uint64_t id) {
    const auto& ids = *bank.anchor_ids();
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end())
        throw DataError("rule: anchor sample #" + std::to_string(id) + " is not in the bank");
    return bank.centroids().row(static_cast<std::size_t>(it - ids.begin()));
}

}  // namespace

std::string Rule::to_string() const {
    std::size_t clauses = 0;
    for (const auto& d : disjuncts) clauses += d.size();
    std::string out = "IF ";
    if (clauses == 1) {
        out += clause_text(disjuncts.front().front());
    } else {
        for (std::size_t k = 0; k < disjuncts.size(); ++k) {
            if (k) out += " OR ";
            out += "(";
            for (std::size_t t = 0; t < disjuncts[k].size(); ++t) {
                if (t) out += " AND ";
                out += clause_text(disjuncts[k][t]);
            }
            out += ")";
        }
    }
    return out + " THEN (class " + std::to_string(class_id) + ")";
}

std::vector<std::pair<std::size_t, std::size_t>> default_rivals(const SubCentroidBank& bank,
                                                                std::size_t c) {
    std::vector<std::pair<std::size_t, std::size_t>> rivals;
    for (std::size_t other = 0; other < bank.num_classes(); ++other) {
        if (other == c) continue;
        for (std::size_t k = 0; k < bank.subs(other); ++k) rivals.emplace_back(other, k);
    }
    return rivals;
}

Rule build_rule(const SubCentroidBank& bank, std::size_t c,
                std::span<const std::pair<std::size_t, std::size_t>> rivals) {
    if (!bank.anchored()) throw DataError("rule: bank has no anchors");
    if (c >= bank.num_classes()) throw DataError("rule: class " + std::to_string(c) + " out of range");
    if (rivals.empty()) throw ConfigError("rule: rival list is empty");
    for (const auto& [rc, rk] : rivals) {
        if (rc == c)
            throw ConfigError("rule: rival sub-centroid (" + std::to_string(rc) + "," +
                              std::to_string(rk) + ") belongs to the rule's own class");
        if (rc >= bank.num_classes() || rk >= bank.subs(rc))
            throw DataError("rule: rival (" + std::to_string(rc) + "," + std::to_string(rk) +
                            ") is not in the bank");
    }
    Rule rule{c, {}};
    for (std::size_t k = 0; k < bank.subs(c); ++k) {
        std::vector<RuleClause> conj;
        for (const auto& [rc, rk] : rivals)
            conj.push_back({bank.anchor_id(c, k), bank.anchor_id(rc, rk), rc, rk});
        rule.disjuncts.push_back(std::move(conj));
    }
    return rule;
}

bool evaluate_rule(const Rule& rule, std::span<const double> query_feature,
                   const SubCentroidBank& bank) {
    if (!bank.anchored()) throw DataError("rule: bank has no anchors");
    bool any = false;
    for (const auto& disjunct : rule.disjuncts) {
        bool all = true;
        for (const auto& cl : disjunct) {
            const double own = dot(query_feature, resolve_anchor(bank, cl.own_anchor));
            const double rival = dot(query_feature, resolve_anchor(bank, cl.rival_anchor));
            if (!(own > rival)) all = false;
        }
        if (all) any = true;
    }
    return any;
}

std::string SimilarityReport::to_string() const {
    std::ostringstream out;
    if (query_id) out << "query=" << *query_id << '\n';
    out << "predicted=" << predicted << '\n';
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        out << "rank=" << i + 1 << " class=" << e.class_id << " sub=" << e.sub_id;
        if (e.anchor) out << " anchor=" << *e.anchor;
        out << " similarity=" << fmt(e.similarity) << " normalized=" << fmt(e.normalized) << '\n';
    }
    return out.str();
}

SimilarityReport similarity_report(std::span<const double> query_feature,
                                   const SubCentroidBank& bank, std::size_t top_m) {
    if (top_m < 1 || top_m > bank.num_classes())
        throw ConfigError("report: top-m must lie in [1, " + std::to_string(bank.num_classes()) +
                          "], got " + std::to_string(top_m));
    Matrix q(1, query_feature.size());
    std::copy(query_feature.begin(), query_feature.end(), q.row(0).begin());
    const ClassScores cs = class_scores(q, bank);

    std::vector<std::size_t> order(bank.num_classes());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cs.scores(0, a) > cs.scores(0, b);
    });

    SimilarityReport report;
    std::vector<double> raw;
    for (std::size_t i = 0; i < top_m; ++i) {
        const std::size_t c = order[i];
        ReportEntry e;
        e.class_id = c;
        e.sub_id = cs.best[c];
        if (bank.anchored()) e.anchor = bank.anchor_id(c, e.sub_id);
        e.similarity = cs.scores(0, c);
        raw.push_back(e.similarity);
        report.entries.push_back(e);
    }
    const double lse = log_sum_exp(raw);
    for (auto& e : report.entries) e.normalized = std::exp(e.similarity - lse);
    report.predicted = report.entries.front().class_id;
    return report;
}

}  // namespace dnc
