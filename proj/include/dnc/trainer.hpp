#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dnc/centroid_bank.hpp"
#include "dnc/dataset.hpp"
#include "dnc/dnc_head.hpp"
#include "dnc/feature_memory.hpp"
#include "dnc/feature_net.hpp"
#include "dnc/sinkhorn.hpp"
#include "dnc/softmax_baseline.hpp"

namespace dnc {

enum class ClassifierKind { dnc, softmax };
enum class Clusterer { sinkhorn, kmeans };

std::string to_string(ClassifierKind kind);
std::string to_string(Clusterer clusterer);
ClassifierKind parse_classifier_kind(const std::string& s);
Clusterer parse_clusterer(const std::string& s);

struct TrainConfig {
    int epochs = 20;
    std::size_t batch_size = 64;
    ClassifierKind classifier = ClassifierKind::dnc;
    std::size_t k = 4;
    std::map<std::size_t, std::size_t> k_map;  // per-class overrides of k
    double mu = 0.999;
    double epsilon = 0.05;
    int sinkhorn_iters = 3;
    std::size_t memory_batches = 4;
    double temperature = 1.0;
    double learning_rate = 0.05;
    bool poly_lr = false;  // lr * (1 - step / total_steps)^0.9
    std::uint64_t seed = 0;
    std::optional<int> anchor_after_epoch;
    Clusterer clusterer = Clusterer::sinkhorn;
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t feature_dim = 16;

    void validate() const;
    std::vector<std::size_t> subs_per_class(std::size_t num_classes) const;

    bool operator==(const TrainConfig&) const = default;
};

using Head = std::variant<SubCentroidBank, LinearClassifier>;

struct Model {
    Encoder encoder;
    Head head;

    bool is_dnc() const noexcept { return std::holds_alternative<SubCentroidBank>(head); }
    const SubCentroidBank& bank() const { return std::get<SubCentroidBank>(head); }
    SubCentroidBank& bank() { return std::get<SubCentroidBank>(head); }
    const LinearClassifier& linear() const { return std::get<LinearClassifier>(head); }
    LinearClassifier& linear() { return std::get<LinearClassifier>(head); }

    // N x C score matrix used for ranking (class similarities or logits).
    Matrix scores(const Matrix& inputs) const;
};

struct TrainState {
    TrainConfig config;
    std::size_t num_classes = 0;
    Model model;
    FeatureMemory memory;
    std::mt19937_64 rng;
    std::uint64_t step = 0;
    std::uint64_t total_steps = 0;  // for the polynomial schedule; 0 = unknown
};

// Fresh encoder, head, and memory derived from config.seed.
TrainState make_train_state(const TrainConfig& config, std::size_t num_classes,
                            std::size_t input_dim);

struct Batch {
    Matrix inputs;
    std::vector<std::size_t> labels;
};

struct StepStats {
    double loss = 0.0;
    std::size_t degenerate_updates = 0;
};

// One alternation: embed, loss and gradient against the current head,
// class-wise clustering and momentum update of the bank (DNC, unanchored),
// memory push, then backward and SGD.
StepStats train_step(const Batch& batch, TrainState& state);

struct TrainResult {
    TrainState state;
    std::vector<double> loss_curve;  // mean batch loss per epoch
};

// Shuffled mini-batch epochs. From epoch anchor_after_epoch on, the bank is
// anchored to training samples and re-embedded after every step.
TrainResult train(const LabeledDataset& data, const TrainConfig& config);

struct Metrics {
    double top1 = 0.0;
    double top5 = 0.0;
    bool top5_defined = true;  // false when C < 5; top5 is then reported as 1
    std::size_t samples = 0;
    std::vector<double> loss_curve;
};

Metrics evaluate(const Model& model, const LabeledDataset& data);

// 1-NN over cosine similarity in feature space, scored against fine labels.
double knn_induction_eval(const Encoder& encoder, const Matrix& train_inputs,
                          std::span<const std::size_t> train_fine, const Matrix& test_inputs,
                          std::span<const std::size_t> test_fine);

// Leave-one-out variant over a single labelled set.
double knn_leave_one_out(const Encoder& encoder, const Matrix& inputs,
                         std::span<const std::size_t> fine);

// Lloyd's algorithm from K distinct seeded sample rows; stops at an
// assignment fixpoint or after 100 iterations.
std::vector<std::size_t> kmeans_baseline_cluster(const Matrix& features, std::size_t k,
                                                 std::uint64_t seed);

}  // namespace dnc
