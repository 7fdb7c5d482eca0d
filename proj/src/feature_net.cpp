#include "dnc/feature_net.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "dnc/errors.hpp"

namespace dnc {
namespace {

std::uint64_t next_stamp() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("sgd: learning rate must be positive, got " +
                          std::to_string(learning_rate));
}

void sgd_update(std::span<double> params, std::span<const double> grads, double learning_rate) {
    if (params.size() != grads.size())
        throw ShapeError("sgd_update: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
}

Encoder::Encoder(std::vector<DenseLayer> layers) : layers_(std::move(layers)), stamp_(next_stamp()) {
    validate_chain();
}

Encoder Encoder::init(std::span<const std::size_t> widths, std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("encoder: need at least input and output widths");
    for (auto w : widths)
        if (w == 0) throw ConfigError("encoder: layer widths must be positive");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Matrix(in, out), Vector(out, 0.0)};
        for (double& w : layer.weight.data()) w = dist(rng);
        layers.push_back(std::move(layer));
    }
    return Encoder(std::move(layers));
}

void Encoder::validate_chain() const {
    if (layers_.empty()) throw ConfigError("encoder: no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.bias.size() != layer.weight.cols())
            throw ShapeError("encoder: layer " + std::to_string(l) + " bias has " +
                             std::to_string(layer.bias.size()) + " entries, expected " +
                             std::to_string(layer.weight.cols()));
        if (l > 0 && layers_[l - 1].weight.cols() != layer.weight.rows())
            throw ShapeError("encoder: layer " + std::to_string(l) + " input width " +
                             std::to_string(layer.weight.rows()) + " does not chain with " +
                             std::to_string(layers_[l - 1].weight.cols()));
    }
}

std::size_t Encoder::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Encoder::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

std::vector<DenseLayer>& Encoder::mutable_layers() {
    stamp_ = next_stamp();
    return layers_;
}

Encoder::Output Encoder::forward(const Matrix& inputs) const {
    if (layers_.empty()) throw ConfigError("encoder: no layers");
    if (inputs.cols() != input_dim())
        throw ShapeError("encoder: input width " + std::to_string(inputs.cols()) + ", expected " +
                         std::to_string(input_dim()));
    Output out;
    out.tape.stamp = stamp_;
    Matrix act = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        Matrix z = matmul(act, layer.weight);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
        }
        out.tape.layer_inputs.push_back(std::move(act));
        if (l + 1 < layers_.size()) {
            act = z;
            for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
        } else {
            act = std::move(z);
            out.tape.pre_activations.push_back(act);
            break;
        }
        out.tape.pre_activations.push_back(std::move(z));
    }

    out.tape.raw_norms.resize(act.rows());
    for (std::size_t r = 0; r < act.rows(); ++r) {
        out.tape.raw_norms[r] = l2_norm(act.row(r));
        if (!(out.tape.raw_norms[r] > 0.0) || !std::isfinite(out.tape.raw_norms[r]))
            throw DegenerateError("encoder: output row " + std::to_string(r) +
                                  " has zero or non-finite norm before normalization");
    }
    l2_normalize_rows(act);
    out.tape.features = act;
    out.features = std::move(act);
    return out;
}

Matrix normalization_backward(const Matrix& features, std::span<const double> raw_norms,
                              const Matrix& grad_features) {
    if (features.rows() != grad_features.rows() || features.cols() != grad_features.cols() ||
        raw_norms.size() != features.rows())
        throw ShapeError("normalization_backward: shape mismatch");
    Matrix g(features.rows(), features.cols());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto x = features.row(r);
        const auto gf = grad_features.row(r);
        const double proj = dot(x, gf);
        auto out = g.row(r);
        for (std::size_t c = 0; c < x.size(); ++c) out[c] = (gf[c] - x[c] * proj) / raw_norms[r];
    }
    return g;
}

EncoderGradients Encoder::backward(const ForwardTape& tape, const Matrix& grad_features) const {
    if (tape.stamp != stamp_)
        throw ShapeError("encoder: stale tape (parameters changed since forward)");
    if (grad_features.rows() != tape.features.rows() ||
        grad_features.cols() != tape.features.cols())
        throw ShapeError("encoder: gradient shape does not match forward output");

    EncoderGradients grads(layers_.size());
    Matrix dz = normalization_backward(tape.features, tape.raw_norms, grad_features);
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& layer = layers_[li];
        const Matrix& a = tape.layer_inputs[li];
        grads[li].weight = matmul(a.transposed(), dz);
        grads[li].bias.assign(dz.cols(), 0.0);
        for (std::size_t r = 0; r < dz.rows(); ++r)
            for (std::size_t c = 0; c < dz.cols(); ++c) grads[li].bias[c] += dz(r, c);
        if (li == 0) break;
        Matrix da = matmul(dz, layer.weight.transposed());
        const Matrix& z_prev = tape.pre_activations[li - 1];
        for (std::size_t i = 0; i < da.data().size(); ++i)
            if (!(z_prev.data()[i] > 0.0)) da.data()[i] = 0.0;
        dz = std::move(da);
    }
    return grads;
}

void Encoder::sgd_step(const EncoderGradients& grads, const SgdConfig& cfg) {
    cfg.validate();
    if (grads.size() != layers_.size()) throw ShapeError("sgd_step: layer count mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        sgd_update(layers_[l].weight.data(), grads[l].weight.data(), cfg.learning_rate);
        sgd_update(layers_[l].bias, grads[l].bias, cfg.learning_rate);
    }
    stamp_ = next_stamp();
}

}  // namespace dnc
