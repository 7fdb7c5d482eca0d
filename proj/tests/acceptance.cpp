// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Criteria 5-10 share one set of training runs: gen-data C=4, G=4, m=16,
// sigma=0.08, 200 points per subcluster, 80/20 stratified split, five seeds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dnc/checkpoint.hpp"
#include "dnc/dataset.hpp"
#include "dnc/dnc_head.hpp"
#include "dnc/explain.hpp"
#include "dnc/sinkhorn.hpp"
#include "dnc/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dnc;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail, double seconds) {
    std::printf("criterion %2d: %s  %s: %s (%.1fs)\n", id, pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string pct(double v) { return fmt("%.2f%%", 100.0 * v); }

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void criterion_sinkhorn_contract() {
    Timer t;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_col = 0.0, worst_row = 0.0;
    int row_violations = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const std::size_t k = 1 + rng() % 8;
        const std::size_t n = 1 + rng() % 256;
        Matrix s(k, n);
        for (double& v : s.data()) v = u(rng);
        const Matrix q = sinkhorn_soft_assign(s, {0.05, 3});
        for (std::size_t j = 0; j < n; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < k; ++i) col += q(i, j);
            worst_col = std::max(worst_col, std::abs(col - 1.0));
        }

        // equipartition: N divisible by K, R = 50
        const std::size_t nd = k * std::max<std::size_t>(1, n / k);
        Matrix sd(k, nd);
        for (double& v : sd.data()) v = u(rng);
        const Matrix qd = sinkhorn_soft_assign(sd, {0.05, 50});
        const double target = static_cast<double>(nd) / static_cast<double>(k);
        double worst_here = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < nd; ++j) row += qd(i, j);
            worst_here = std::max(worst_here, std::abs(row - target) / target);
        }
        worst_row = std::max(worst_row, worst_here);
        if (worst_here >= 0.01) ++row_violations;
    }
    const bool pass = worst_col < 1e-9 && row_violations == 0;
    report(1, pass, "sinkhorn contract",
           "max |colsum-1| " + fmt("%.2e", worst_col) + "; R=50 row sums outside 1% of N/K in " +
               std::to_string(row_violations) + "/1000 draws (worst " + pct(worst_row) +
               "), scores iid U[-1,1]",
           t.seconds());
}

void criterion_clustering_oracle() {
    Timer t;
    std::mt19937_64 rng(7);
    int instances = 0, misses = 0, divisible = 0, divisible_misses = 0;
    double worst_gap = 0.0;
    for (std::size_t n = 1; n <= 8; ++n)
        for (std::size_t k = 1; k <= 3; ++k)
            for (int rep = 0; rep < 12; ++rep) {
                const std::size_t d = 2 + rng() % 5;
                const Matrix x = oracle::random_unit_rows(rng, n, d);
                const Matrix p = oracle::random_unit_rows(rng, k, d);
                const auto hard = cluster_class(x, p, {0.01, 50});
                const Matrix scores = similarity_matrix(p, x);
                double best = -1e300;
                for (const auto& a : oracle::balanced_assignments(n, k))
                    best = std::max(best, oracle::trace_objective(scores, a));
                const double gap = best - oracle::trace_objective(scores, hard);
                worst_gap = std::max(worst_gap, gap);
                if (gap > 1e-9) ++misses;
                ++instances;
                if (n % k == 0) {
                    ++divisible;
                    if (gap > 1e-9) ++divisible_misses;
                }
            }
    report(2, instances >= 200 && misses == 0, "clustering oracle",
           std::to_string(instances) + " instances (N<=8, K<=3, R=50, eps=0.01), " +
               std::to_string(misses) + " below the balanced optimum (N divisible by K: " +
               std::to_string(divisible_misses) + "/" + std::to_string(divisible) +
               "; otherwise: " + std::to_string(misses - divisible_misses) + "/" +
               std::to_string(instances - divisible) + "), worst shortfall " + fmt("%.2e", worst_gap),
           t.seconds());
}

void criterion_gradients() {
    Timer t;
    const auto a = gradcheck::sweep(gradcheck::dnc_loss_check, 100);
    const auto b = gradcheck::sweep(gradcheck::softmax_loss_check, 100);
    const auto c = gradcheck::sweep(
        [](std::uint64_t s) { return gradcheck::encoder_chain_check(s, gradcheck::Head::dnc); }, 100);
    const auto d = gradcheck::sweep(
        [](std::uint64_t s) { return gradcheck::encoder_chain_check(s, gradcheck::Head::softmax); }, 100);
    const double worst = std::max({a.worst, b.worst, c.worst, d.worst});
    report(3, worst < 1e-4, "gradient exactness",
           "100 seeds each; worst rel. error dnc_loss " + fmt("%.1e", a.worst) + ", softmax_ce " +
               fmt("%.1e", b.worst) + ", encoder+dnc " + fmt("%.1e", c.worst) + ", encoder+softmax " +
               fmt("%.1e", d.worst) + "; kink-adjacent seeds skipped " +
               std::to_string(a.skipped + c.skipped + d.skipped),
           t.seconds());
}

void criterion_ncm_reduction() {
    Timer t;
    std::mt19937_64 rng(11);
    int mismatches = 0, queries = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t classes = 2 + inst % 6, d = 2 + inst % 7;
        const Matrix train = oracle::random_matrix(rng, 100, d);
        std::vector<std::size_t> labels(100);
        for (std::size_t i = 0; i < 100; ++i) labels[i] = i < classes ? i : rng() % classes;
        Matrix means(classes, d);
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t j = 0; j < d; ++j) means(labels[i], j) += train(i, j);
        l2_normalize_rows(means);
        const SubCentroidBank bank(std::vector<std::size_t>(classes, 1), means);
        const Matrix q = oracle::random_unit_rows(rng, 100, d);
        const auto preds = predict(q, bank);
        for (std::size_t n = 0; n < 100; ++n, ++queries) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (cosine_distance(q.row(n), means.row(c)) < cosine_distance(q.row(n), means.row(best)))
                    best = c;
            if (preds[n].class_id != best) ++mismatches;
        }
    }
    report(4, mismatches == 0, "nearest-class-mean reduction",
           std::to_string(queries) + " queries over 100 instances, " + std::to_string(mismatches) +
               " disagreements",
           t.seconds());
}

struct Run {
    double top1 = 0.0;
    double knn = 0.0;
    bool anchors_exact = true;
};

struct Variant {
    std::string name;
    std::function<void(TrainConfig&)> tweak;
    std::vector<Run> runs;
    std::vector<double> top1() const {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.top1);
        return v;
    }
    std::vector<double> knn() const {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.knn);
        return v;
    }
};

TrainConfig base_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.k = 4;
    cfg.mu = 0.999;
    cfg.epsilon = 0.05;
    cfg.sinkhorn_iters = 3;
    cfg.memory_batches = 4;
    cfg.temperature = 10.0;
    cfg.learning_rate = 0.05;
    cfg.hidden = {64, 64};
    cfg.feature_dim = 16;
    cfg.seed = seed;
    return cfg;
}

std::pair<LabeledDataset, LabeledDataset> trend_data(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.subclusters = 4;
    spec.dim = 16;
    spec.per_cluster = 200;
    spec.sigma = 0.08;
    spec.seed = 100 + seed;
    return split_train_test(gen_synthetic(spec), 0.2);
}

bool anchors_are_embeddings(const Model& model, const Matrix& train_inputs) {
    const auto& bank = model.bank();
    if (!bank.anchored()) return false;
    const Matrix feats = model.encoder.embed(train_inputs);
    for (std::size_t r = 0; r < bank.total_subs(); ++r) {
        bool found = false;
        for (std::size_t i = 0; i < feats.rows() && !found; ++i)
            found = oracle::bitwise_equal(bank.centroids().row(r), feats.row(i));
        if (!found) return false;
    }
    return true;
}

std::string medians(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4f", v[i]);
    return s + "]";
}

void trend_criteria() {
    constexpr int kSeeds = 5;
    std::vector<Variant> variants{
        {"dnc K=4", [](TrainConfig&) {}, {}},
        {"dnc K=1", [](TrainConfig& c) { c.k = 1; }, {}},
        {"dnc mu=0", [](TrainConfig& c) { c.mu = 0.0; }, {}},
        {"softmax", [](TrainConfig& c) { c.classifier = ClassifierKind::softmax; }, {}},
        {"dnc anchored", [](TrainConfig& c) { c.anchor_after_epoch = 16; }, {}},
        {"dnc k-means", [](TrainConfig& c) { c.clusterer = Clusterer::kmeans; }, {}},
    };
    std::vector<double> seconds(variants.size(), 0.0);
    for (int s = 0; s < kSeeds; ++s) {
        const auto [train_set, test_set] = trend_data(s);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            Timer t;
            TrainConfig cfg = base_config(s);
            variants[v].tweak(cfg);
            const auto result = train(train_set, cfg);
            Run run;
            run.top1 = evaluate(result.state.model, test_set).top1;
            run.knn = knn_induction_eval(result.state.model.encoder, train_set.inputs,
                                         *train_set.fine_labels, test_set.inputs,
                                         *test_set.fine_labels);
            if (cfg.anchor_after_epoch)
                run.anchors_exact = anchors_are_embeddings(result.state.model, train_set.inputs);
            variants[v].runs.push_back(run);
            seconds[v] += t.seconds();
        }
    }
    for (const auto& v : variants)
        std::printf("  %-13s test top-1 %s median %s | 1-NN fine %s median %s\n", v.name.c_str(),
                    medians(v.top1()).c_str(), pct(median(v.top1())).c_str(), medians(v.knn()).c_str(),
                    pct(median(v.knn())).c_str());

    const double k4 = median(variants[0].top1()), k1 = median(variants[1].top1()),
                 mu0 = median(variants[2].top1()), soft = median(variants[3].top1()),
                 anch = median(variants[4].top1()), km = median(variants[5].top1());
    const double knn_dnc = median(variants[0].knn()), knn_soft = median(variants[3].knn());

    report(5, k4 >= k1 + 0.05, "multimodality trend",
           "median top-1 K=4 " + pct(k4) + " vs K=1 " + pct(k1) + ", need K=4 >= K=1 + 5 points",
           seconds[0] + seconds[1]);
    report(6, k4 >= mu0, "momentum trend", "median top-1 mu=0.999 " + pct(k4) + " vs mu=0 " + pct(mu0),
           seconds[0] + seconds[2]);
    report(7, k4 >= soft - 0.01, "parity with softmax",
           "median top-1 DNC (K=4, tau=10) " + pct(k4) + " vs softmax " + pct(soft), seconds[0] + seconds[3]);
    bool exact = true;
    for (const auto& r : variants[4].runs) exact = exact && r.anchors_exact;
    report(8, std::abs(anch - k4) <= 0.02 && exact, "anchoring cost",
           "median top-1 anchored " + pct(anch) + " vs unanchored " + pct(k4) +
               (exact ? "; every sub-centroid bitwise equals a training embedding"
                      : "; some sub-centroid is not a training embedding"),
           seconds[4]);
    report(9, knn_dnc >= knn_soft + 0.05, "induction protocol",
           "median 1-NN fine top-1 DNC " + pct(knn_dnc) + " vs softmax " + pct(knn_soft), seconds[0] + seconds[3]);
    report(10, km <= k4 + 0.01, "sinkhorn vs k-means",
           "median top-1 k-means " + pct(km) + " vs sinkhorn " + pct(k4) + " (gap " +
               fmt("%+.2f", 100.0 * (km - k4)) + " points)",
           seconds[5]);
}

void criterion_determinism() {
    Timer t;
    const auto [train_set, test_set] = trend_data(0);
    auto cfg = base_config(0);
    cfg.epochs = 4;
    cfg.anchor_after_epoch = 2;
    const auto a = train(train_set, cfg);
    const auto b = train(train_set, cfg);
    const std::string bytes_a = serialize_checkpoint(make_checkpoint(a.state));
    const bool identical = bytes_a == serialize_checkpoint(make_checkpoint(b.state));

    const auto path = (std::filesystem::temp_directory_path() / "dnc_acceptance.ckpt").string();
    save_checkpoint(path, make_checkpoint(a.state));
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    const bool round_trip = loaded.model.encoder.layers() == a.state.model.encoder.layers() &&
                            loaded.model.bank() == a.state.model.bank() &&
                            loaded.config == a.state.config &&
                            serialize_checkpoint(loaded) == bytes_a;

    auto soft_cfg = cfg;
    soft_cfg.classifier = ClassifierKind::softmax;
    soft_cfg.anchor_after_epoch.reset();
    const auto s1 = train(train_set, soft_cfg);
    const auto s2 = train(train_set, soft_cfg);
    const bool soft_identical = serialize_checkpoint(make_checkpoint(s1.state)) ==
                                serialize_checkpoint(make_checkpoint(s2.state));

    // rules and reports from the loaded model
    const auto& bank = loaded.model.bank();
    const std::size_t c_count = bank.num_classes();
    std::size_t rules = 0, reports = 0, bad = 0;
    for (std::size_t c = 0; c < c_count; ++c) {
        const Rule r = build_rule(bank, c, default_rivals(bank, c));
        ++rules;
        if (r.disjuncts.size() != bank.subs(c)) ++bad;
        for (const auto& d : r.disjuncts)
            if (d.size() != (c_count - 1) * cfg.k) ++bad;
    }
    const Matrix feats = loaded.model.encoder.embed(test_set.inputs);
    const auto preds = predict(feats, bank);
    for (std::size_t i = 0; i < feats.rows(); ++i)
        for (std::size_t m = 1; m <= c_count; ++m) {
            const auto rep = similarity_report(feats.row(i), bank, m);
            ++reports;
            double sum = 0.0;
            for (std::size_t e = 0; e < rep.entries.size(); ++e) {
                sum += rep.entries[e].normalized;
                if (e && rep.entries[e - 1].similarity < rep.entries[e].similarity) ++bad;
            }
            if (std::abs(sum - 1.0) > 1e-9 || rep.entries.size() != m || rep.predicted != preds[i].class_id)
                ++bad;
        }
    const bool pass = identical && soft_identical && round_trip && bad == 0;
    report(11, pass, "determinism and persistence",
           std::string("repeat runs ") + (identical && soft_identical ? "byte-identical" : "DIFFER") +
               ", save/load " + (round_trip ? "lossless" : "LOSSY") + ", " + std::to_string(rules) +
               " rules and " + std::to_string(reports) + " reports checked, " + std::to_string(bad) +
               " invariant violations",
           t.seconds());
}

}  // namespace

int main() {
    criterion_sinkhorn_contract();
    criterion_clustering_oracle();
    criterion_gradients();
    criterion_ncm_reduction();
    trend_criteria();
    criterion_determinism();
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
