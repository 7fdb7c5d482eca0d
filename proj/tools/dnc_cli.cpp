// dnc: command-line driver for data generation, training, evaluation and
// explanation of nearest-centroid classifiers.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.

#include <cstdio>
#include <map>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dnc/checkpoint.hpp"
#include "dnc/dataset.hpp"
#include "dnc/errors.hpp"
#include "dnc/explain.hpp"
#include "dnc/trainer.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Lines "class,k"; '#' starts a comment.
std::map<std::size_t, std::size_t> load_k_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw dnc::DataError("cannot open k-map '" + path + "'");
    std::map<std::size_t, std::size_t> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        long long c = -1, k = -1;
        char comma = 0;
        if (!(ss >> c >> comma >> k) || comma != ',' || c < 0 || k < 1)
            throw dnc::DataError("k-map line " + std::to_string(line_no) +
                                 ": expected 'class,k' with k >= 1");
        out[static_cast<std::size_t>(c)] = static_cast<std::size_t>(k);
    }
    return out;
}

struct GenOptions {
    dnc::SyntheticSpec spec;
    std::string out;
    std::string test_out;
    double test_fraction = 0.2;
};

struct TrainOptions {
    dnc::TrainConfig config;
    std::string data;
    std::string classifier = "dnc";
    std::string clusterer = "sinkhorn";
    std::string k_map;
    int anchor_after_epoch = -1;
    std::string out;
};

struct EvalOptions {
    std::string ckpt;
    std::string data;
    bool knn_fine = false;
    std::string knn_train;
};

struct ExplainOptions {
    std::string ckpt;
    std::string data;
    std::size_t query_index = 0;
    std::size_t top_m = 1;
    long long emit_rule = -1;
};

int run_gen(const GenOptions& o) {
    const auto data = dnc::gen_synthetic(o.spec);
    if (o.test_out.empty()) {
        dnc::save_csv(o.out, data);
        std::cout << "samples=" << data.size() << '\n';
        return 0;
    }
    const auto [train, test] = dnc::split_train_test(data, o.test_fraction);
    dnc::save_csv(o.out, train);
    dnc::save_csv(o.test_out, test);
    std::cout << "train_samples=" << train.size() << "\ntest_samples=" << test.size() << '\n';
    return 0;
}

int run_train(TrainOptions o) {
    o.config.classifier = dnc::parse_classifier_kind(o.classifier);
    o.config.clusterer = dnc::parse_clusterer(o.clusterer);
    if (o.anchor_after_epoch >= 0) o.config.anchor_after_epoch = o.anchor_after_epoch;
    if (!o.k_map.empty()) o.config.k_map = load_k_map(o.k_map);
    const auto data = dnc::load_csv(o.data);
    const auto result = dnc::train(data, o.config);
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
        std::cout << "epoch=" << e + 1 << " loss=" << fmt(result.loss_curve[e]) << '\n';
    const auto metrics = dnc::evaluate(result.state.model, data);
    std::cout << "train_top1=" << fmt(metrics.top1) << '\n';
    dnc::save_checkpoint(o.out, dnc::make_checkpoint(result.state));
    return 0;
}

int run_eval(const EvalOptions& o) {
    const auto ckpt = dnc::load_checkpoint(o.ckpt);
    const auto data = dnc::load_csv(o.data);
    const auto m = dnc::evaluate(ckpt.model, data);
    std::cout << "samples=" << m.samples << '\n'
              << "top1=" << fmt(m.top1) << '\n'
              << "top5=" << fmt(m.top5) << '\n'
              << "top5_defined=" << (m.top5_defined ? "true" : "false") << '\n';
    if (o.knn_fine) {
        if (!data.fine_labels) throw dnc::DataError("--knn-fine needs a fine_label column in --data");
        double acc = 0.0;
        if (o.knn_train.empty()) {
            acc = dnc::knn_leave_one_out(ckpt.model.encoder, data.inputs, *data.fine_labels);
        } else {
            const auto ref = dnc::load_csv(o.knn_train);
            if (!ref.fine_labels)
                throw dnc::DataError("--knn-train needs a fine_label column");
            acc = dnc::knn_induction_eval(ckpt.model.encoder, ref.inputs, *ref.fine_labels,
                                          data.inputs, *data.fine_labels);
        }
        std::cout << "knn_fine_top1=" << fmt(acc) << '\n';
    }
    return 0;
}

int run_explain(const ExplainOptions& o) {
    const auto ckpt = dnc::load_checkpoint(o.ckpt);
    if (!ckpt.model.is_dnc()) throw dnc::DataError("explain needs a dnc checkpoint");
    const auto data = dnc::load_csv(o.data);
    if (o.query_index >= data.size())
        throw dnc::DataError("query index " + std::to_string(o.query_index) + " outside dataset of " +
                             std::to_string(data.size()) + " rows");
    const auto& bank = ckpt.model.bank();
    const auto features = ckpt.model.encoder.embed(data.inputs);
    const auto query = features.row(o.query_index);

    auto report = dnc::similarity_report(query, bank, o.top_m);
    report.query_id = o.query_index;
    std::cout << report.to_string();

    if (o.emit_rule >= 0) {
        const auto c = static_cast<std::size_t>(o.emit_rule);
        if (c >= bank.num_classes())
            throw dnc::DataError("rule class " + std::to_string(c) + " not in the model");
        const auto rivals = dnc::default_rivals(bank, c);
        const auto rule = dnc::build_rule(bank, c, rivals);
        std::cout << "rule_class=" << rule.class_id << '\n'
                  << "disjuncts=" << rule.disjuncts.size() << '\n'
                  << "conjuncts=" << rule.conjuncts_per_disjunct() << '\n'
                  << "rule=" << rule.to_string() << '\n'
                  << "rule_holds=" << (dnc::evaluate_rule(rule, query, bank) ? "true" : "false")
                  << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep nearest centroids: train, evaluate and explain sub-centroid classifiers"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic multimodal dataset");
    gen_cmd->add_option("--classes", gen.spec.classes, "Number of classes")->required();
    gen_cmd->add_option("--subclusters", gen.spec.subclusters, "Subclusters per class")->required();
    gen_cmd->add_option("--dim", gen.spec.dim, "Input dimension")->required();
    gen_cmd->add_option("--per-cluster", gen.spec.per_cluster, "Points per subcluster")->required();
    gen_cmd->add_option("--sigma", gen.spec.sigma, "Gaussian spread")->required();
    gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->required();
    gen_cmd->add_option("--out", gen.out, "Output CSV (training part when --test-out is set)")
        ->required();
    gen_cmd->add_option("--test-out", gen.test_out, "Write a held-out split here");
    gen_cmd->add_option("--test-fraction", gen.test_fraction, "Held-out fraction per subcluster")
        ->capture_default_str();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train an encoder with a DNC or softmax head");
    train_cmd->add_option("--data", tr.data, "Training CSV")->required();
    train_cmd->add_option("--classifier", tr.classifier, "dnc or softmax")
        ->check(CLI::IsMember({"dnc", "softmax"}))
        ->capture_default_str();
    train_cmd->add_option("--k", tr.config.k, "Sub-centroids per class")->capture_default_str();
    train_cmd->add_option("--k-map", tr.k_map, "Per-class K overrides, lines 'class,k'");
    train_cmd->add_option("--mu", tr.config.mu, "Momentum coefficient")->capture_default_str();
    train_cmd->add_option("--epsilon", tr.config.epsilon, "Sinkhorn temperature")
        ->capture_default_str();
    train_cmd->add_option("--sinkhorn-iters", tr.config.sinkhorn_iters, "Sinkhorn iterations")
        ->capture_default_str();
    train_cmd->add_option("--memory-batches", tr.config.memory_batches, "Feature memory size in batches")
        ->capture_default_str();
    train_cmd->add_option("--temperature", tr.config.temperature, "Logit scale for the DNC loss")
        ->capture_default_str();
    train_cmd->add_option("--epochs", tr.config.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", tr.config.batch_size, "Batch size")->capture_default_str();
    train_cmd->add_option("--lr", tr.config.learning_rate, "SGD learning rate")->capture_default_str();
    train_cmd->add_flag("--poly-lr", tr.config.poly_lr, "Polynomial learning-rate decay (power 0.9)");
    train_cmd->add_option("--seed", tr.config.seed, "Seed")->capture_default_str();
    train_cmd->add_option("--anchor-after-epoch", tr.anchor_after_epoch,
                          "Anchor sub-centroids to training samples from this epoch on");
    train_cmd->add_option("--clusterer", tr.clusterer, "sinkhorn or kmeans")
        ->check(CLI::IsMember({"sinkhorn", "kmeans"}))
        ->capture_default_str();
    train_cmd->add_option("--hidden", tr.config.hidden, "Hidden layer widths")->capture_default_str();
    train_cmd->add_option("--feature-dim", tr.config.feature_dim, "Embedding dimension")
        ->capture_default_str();
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "Evaluation CSV")->required();
    eval_cmd->add_flag("--knn-fine", ev.knn_fine, "Also report 1-NN accuracy on fine labels");
    eval_cmd->add_option("--knn-train", ev.knn_train,
                         "Reference CSV for --knn-fine (default: leave-one-out within --data)");

    ExplainOptions ex;
    auto* explain_cmd = app.add_subcommand("explain", "Similarity report and IF-THEN rule for a query");
    explain_cmd->add_option("--ckpt", ex.ckpt, "Checkpoint")->required();
    explain_cmd->add_option("--data", ex.data, "CSV holding the query")->required();
    explain_cmd->add_option("--query-index", ex.query_index, "Row of the query")->required();
    explain_cmd->add_option("--top-m", ex.top_m, "Classes in the report")->required();
    explain_cmd->add_option("--emit-rule", ex.emit_rule, "Print the rule for this class");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*train_cmd) return run_train(tr);
        if (*eval_cmd) return run_eval(ev);
        if (*explain_cmd) return run_explain(ex);
    } catch (const dnc::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const dnc::DegenerateError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const dnc::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
