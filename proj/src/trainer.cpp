#include "dnc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dnc/errors.hpp"

namespace dnc {
namespace {

// Mixes a base seed with stream identifiers (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = base ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xBF58476D1CE4E5B9ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Relabels k-means clusters so cluster j feeds the sub-centroid it is most
// similar to, maximizing total similarity over permutations (exhaustive up
// to K = 8, greedy beyond).
std::vector<std::size_t> match_clusters(const Matrix& features,
                                        const std::vector<std::size_t>& assign,
                                        const Matrix& centroids) {
    const std::size_t k = centroids.rows();
    Matrix means(k, features.cols());
    for (std::size_t i = 0; i < assign.size(); ++i) {
        auto m = means.row(assign[i]);
        const auto x = features.row(i);
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += x[j];
    }
    const Matrix sim = similarity_matrix(means, centroids);  // unnormalized means: ranking only

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    if (k <= 8) {
        double best_score = -std::numeric_limits<double>::infinity();
        do {
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j) s += sim(j, perm[j]);
            if (s > best_score) {
                best_score = s;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        std::vector<bool> used(k, false);
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t pick = k;
            for (std::size_t t = 0; t < k; ++t)
                if (!used[t] && (pick == k || sim(j, t) > sim(j, pick))) pick = t;
            used[pick] = true;
            best[j] = pick;
        }
    }
    std::vector<std::size_t> out(assign.size());
    for (std::size_t i = 0; i < assign.size(); ++i) out[i] = best[assign[i]];
    return out;
}

std::vector<std::size_t> nearest_centroid(const Matrix& features, const Matrix& centroids) {
    const Matrix sim = similarity_matrix(features, centroids);
    std::vector<std::size_t> out(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) out[i] = argmax(sim.row(i));
    return out;
}

void update_bank_for_class(TrainState& state, const Matrix& features,
                           std::span<const std::size_t> labels, std::size_t c,
                           StepStats& stats) {
    const auto& cfg = state.config;
    SubCentroidBank& bank = state.model.bank();
    const Matrix population = state.memory.gather_class(features, labels, c);
    const std::size_t batch_members =
        static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
    if (batch_members == 0 || population.empty()) return;

    const Matrix block = bank.class_block(c);
    const std::size_t k = block.rows();
    std::vector<std::size_t> assign;
    if (cfg.clusterer == Clusterer::sinkhorn) {
        assign = cluster_class(population, block, {cfg.epsilon, cfg.sinkhorn_iters});
    } else if (population.rows() >= k) {
        assign = match_clusters(
            population,
            kmeans_baseline_cluster(population, k, derive_seed(cfg.seed, state.step, c)), block);
    } else {
        assign = nearest_centroid(population, block);
    }

    // Means over current-batch members only; the batch rows lead the population.
    Matrix means(k, bank.dim());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < batch_members; ++i) {
        auto m = means.row(assign[i]);
        const auto x = population.row(i);
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += x[j];
        ++counts[assign[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] == 0) continue;
        if (!(l2_norm(means.row(j)) > 0.0)) {
            counts[j] = 0;
            continue;
        }
        const Vector unit = l2_normalize(means.row(j));
        std::copy(unit.begin(), unit.end(), means.row(j).begin());
    }
    const auto report = momentum_update(bank, c, means, counts, {cfg.mu});
    stats.degenerate_updates += report.degenerate.size();
}

}  // namespace

std::string to_string(ClassifierKind kind) {
    return kind == ClassifierKind::dnc ? "dnc" : "softmax";
}
std::string to_string(Clusterer clusterer) {
    return clusterer == Clusterer::sinkhorn ? "sinkhorn" : "kmeans";
}
ClassifierKind parse_classifier_kind(const std::string& s) {
    if (s == "dnc") return ClassifierKind::dnc;
    if (s == "softmax") return ClassifierKind::softmax;
    throw ConfigError("unknown classifier kind '" + s + "'");
}
Clusterer parse_clusterer(const std::string& s) {
    if (s == "sinkhorn") return Clusterer::sinkhorn;
    if (s == "kmeans") return Clusterer::kmeans;
    throw ConfigError("unknown clusterer '" + s + "'");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (k == 0) throw ConfigError("k must be positive");
    for (const auto& [c, kc] : k_map)
        if (kc == 0) throw ConfigError("k-map: class " + std::to_string(c) + " has k = 0");
    MomentumConfig{mu}.validate();
    SinkhornConfig{epsilon, sinkhorn_iters}.validate();
    LossConfig{temperature}.validate();
    SgdConfig{learning_rate, seed}.validate();
    if (anchor_after_epoch && (*anchor_after_epoch < 0 || *anchor_after_epoch >= epochs))
        throw ConfigError("anchor-after-epoch must lie in [0, epochs)");
    if (feature_dim == 0) throw ConfigError("feature dimension must be positive");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("hidden widths must be positive");
}

std::vector<std::size_t> TrainConfig::subs_per_class(std::size_t num_classes) const {
    std::vector<std::size_t> subs(num_classes, k);
    for (const auto& [c, kc] : k_map) {
        if (c >= num_classes)
            throw ConfigError("k-map: class " + std::to_string(c) + " outside [0, " +
                              std::to_string(num_classes) + ")");
        subs[c] = kc;
    }
    return subs;
}

Matrix Model::scores(const Matrix& inputs) const {
    const Matrix features = encoder.embed(inputs);
    if (is_dnc()) return class_scores(features, bank()).scores;
    return linear_logits(features, linear());
}

TrainState make_train_state(const TrainConfig& config, std::size_t num_classes,
                            std::size_t input_dim) {
    config.validate();
    if (num_classes == 0) throw DataError("training data has no classes");
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(config.feature_dim);

    Encoder encoder = Encoder::init(widths, derive_seed(config.seed, 1));
    Head head = config.classifier == ClassifierKind::dnc
                    ? Head(init_bank(config.subs_per_class(num_classes), config.feature_dim,
                                     derive_seed(config.seed, 2)))
                    : Head(LinearClassifier::init(config.feature_dim, num_classes,
                                                  derive_seed(config.seed, 3)));
    return TrainState{config,
                      num_classes,
                      Model{std::move(encoder), std::move(head)},
                      FeatureMemory(config.memory_batches, config.batch_size, num_classes),
                      std::mt19937_64(derive_seed(config.seed, 4)),
                      0,
                      0};
}

StepStats train_step(const Batch& batch, TrainState& state) {
    const auto& cfg = state.config;
    if (batch.inputs.rows() != batch.labels.size())
        throw ShapeError("train_step: input/label count mismatch");
    if (batch.labels.empty()) throw ShapeError("train_step: empty batch");

    auto fwd = state.model.encoder.forward(batch.inputs);
    const Matrix& x = fwd.features;
    StepStats stats;

    double lr = cfg.learning_rate;
    if (cfg.poly_lr && state.total_steps > 0) {
        const double frac = static_cast<double>(state.step) / static_cast<double>(state.total_steps);
        lr *= std::pow(std::max(0.0, 1.0 - frac), 0.9);
    }

    Matrix grad_features;
    if (state.model.is_dnc()) {
        auto loss = dnc_loss(x, batch.labels, state.model.bank(), {cfg.temperature});
        stats.loss = loss.loss;
        grad_features = std::move(loss.grad_features);
        if (!state.model.bank().anchored()) {
            std::vector<bool> present(state.num_classes, false);
            for (auto y : batch.labels) present.at(y) = true;
            for (std::size_t c = 0; c < state.num_classes; ++c)
                if (present[c]) update_bank_for_class(state, x, batch.labels, c, stats);
        }
    } else {
        auto loss = softmax_ce_loss(x, batch.labels, state.model.linear());
        stats.loss = loss.loss;
        grad_features = std::move(loss.grad_features);
        if (lr > 0.0) {
            auto& clf = state.model.linear();
            sgd_update(clf.weight.data(), loss.grad_weight.data(), lr);
            sgd_update(clf.bias, loss.grad_bias, lr);
        }
    }

    state.memory.push_batch(x, batch.labels);

    const auto grads = state.model.encoder.backward(fwd.tape, grad_features);
    if (lr > 0.0) state.model.encoder.sgd_step(grads, {lr, cfg.seed});
    ++state.step;
    return stats;
}

TrainResult train(const LabeledDataset& data, const TrainConfig& config) {
    data.validate();
    if (data.size() == 0) throw DataError("training data is empty");
    TrainResult result{make_train_state(config, data.num_classes(), data.input_dim()), {}};
    TrainState& state = result.state;
    const std::size_t n = data.size();
    const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    state.total_steps = steps_per_epoch * static_cast<std::uint64_t>(config.epochs);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (state.model.is_dnc() && config.anchor_after_epoch &&
            epoch == *config.anchor_after_epoch) {
            state.model.bank() = anchor_to_observations(
                state.model.bank(), state.model.encoder.embed(data.inputs), data.labels);
        }
        std::shuffle(order.begin(), order.end(), state.rng);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * config.batch_size;
            const std::size_t end = std::min(n, begin + config.batch_size);
            Batch batch{Matrix(end - begin, data.input_dim()), {}};
            for (std::size_t i = begin; i < end; ++i) {
                const auto src = data.inputs.row(order[i]);
                std::copy(src.begin(), src.end(), batch.inputs.row(i - begin).begin());
                batch.labels.push_back(data.labels[order[i]]);
            }
            epoch_loss += train_step(batch, state).loss;
            if (state.model.is_dnc() && state.model.bank().anchored())
                state.model.bank() =
                    refresh_anchored(state.model.bank(), state.model.encoder, data.inputs);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
    }
    return result;
}

Metrics evaluate(const Model& model, const LabeledDataset& data) {
    if (data.size() == 0) throw DataError("evaluate: empty dataset");
    const Matrix scores = model.scores(data.inputs);
    const std::size_t c_count = scores.cols();
    Metrics m;
    m.samples = data.size();
    m.top5_defined = c_count >= 5;
    std::size_t hit1 = 0, hit5 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = scores.row(i);
        const std::size_t y = data.labels[i];
        if (y < c_count && argmax(row) == y) ++hit1;
        if (y >= c_count) continue;
        // Rank of y under (score desc, class id asc).
        std::size_t ahead = 0;
        for (std::size_t c = 0; c < c_count; ++c)
            if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++ahead;
        if (ahead < 5) ++hit5;
    }
    m.top1 = static_cast<double>(hit1) / static_cast<double>(data.size());
    m.top5 = m.top5_defined ? static_cast<double>(hit5) / static_cast<double>(data.size()) : 1.0;
    return m;
}

double knn_induction_eval(const Encoder& encoder, const Matrix& train_inputs,
                          std::span<const std::size_t> train_fine, const Matrix& test_inputs,
                          std::span<const std::size_t> test_fine) {
    if (train_inputs.empty()) throw DataError("knn: empty training set");
    if (test_inputs.empty()) throw DataError("knn: empty test set");
    if (train_inputs.rows() != train_fine.size() || test_inputs.rows() != test_fine.size())
        throw ShapeError("knn: label count mismatch");
    const Matrix sim = similarity_matrix(encoder.embed(test_inputs), encoder.embed(train_inputs));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sim.rows(); ++i)
        if (train_fine[argmax(sim.row(i))] == test_fine[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(sim.rows());
}

double knn_leave_one_out(const Encoder& encoder, const Matrix& inputs,
                         std::span<const std::size_t> fine) {
    if (inputs.rows() < 2) throw DataError("knn: leave-one-out needs at least two samples");
    if (inputs.rows() != fine.size()) throw ShapeError("knn: label count mismatch");
    const Matrix features = encoder.embed(inputs);
    const Matrix sim = similarity_matrix(features, features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < sim.cols(); ++j)
            if (j != i && sim(i, j) > sim(i, best)) best = j;
        if (fine[best] == fine[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sim.rows());
}

std::vector<std::size_t> kmeans_baseline_cluster(const Matrix& features, std::size_t k,
                                                 std::uint64_t seed) {
    const std::size_t n = features.rows();
    if (k == 0) throw ConfigError("kmeans: k must be positive");
    if (n < k)
        throw DataError("kmeans: " + std::to_string(n) + " samples cannot fill " +
                        std::to_string(k) + " clusters");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    Matrix centers(k, features.cols());
    for (std::size_t j = 0; j < k; ++j) {
        const auto src = features.row(order[j]);
        std::copy(src.begin(), src.end(), centers.row(j).begin());
    }

    std::vector<std::size_t> assign(n, k);
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = squared_distance(features.row(i), centers.row(0));
            for (std::size_t j = 1; j < k; ++j) {
                const double d = squared_distance(features.row(i), centers.row(j));
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        Matrix sums(k, features.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(assign[i]);
            const auto x = features.row(i);
            for (std::size_t d = 0; d < s.size(); ++d) s[d] += x[d];
            ++counts[assign[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;  // empty cluster keeps its center
            auto c = centers.row(j);
            const auto s = sums.row(j);
            for (std::size_t d = 0; d < c.size(); ++d) c[d] = s[d] / static_cast<double>(counts[j]);
        }
    }
    return assign;
}

}  // namespace dnc
