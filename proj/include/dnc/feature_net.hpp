#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dnc/numerics.hpp"

namespace dnc {

// Affine layer y = x W + b with W stored in x out.
struct DenseLayer {
    Matrix weight;
    Vector bias;

    bool operator==(const DenseLayer&) const = default;
};

// Gradients share the parameter layout.
using EncoderGradients = std::vector<DenseLayer>;

struct SgdConfig {
    double learning_rate = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

// p <- p - lr * g, elementwise.
void sgd_update(std::span<double> params, std::span<const double> grads, double learning_rate);

// Activations cached by Encoder::forward for the matching backward pass.
struct ForwardTape {
    std::uint64_t stamp = 0;
    std::vector<Matrix> layer_inputs;  // input to layer l (post-rectifier for l > 0)
    std::vector<Matrix> pre_activations;
    Matrix features;
    Vector raw_norms;  // norm of each output row before normalization
};

// Fully connected encoder: rectified hidden layers, an affine output layer,
// and a final row-wise L2 normalization.
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(std::vector<DenseLayer> layers);

    // widths = {input, hidden..., output}. Weights uniform in +-sqrt(6 / (in + out)),
    // biases zero.
    static Encoder init(std::span<const std::size_t> widths, std::uint64_t seed);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    struct Output {
        Matrix features;
        ForwardTape tape;
    };

    // Rows are processed independently, so a sample's embedding does not
    // depend on the rest of the batch (bitwise).
    Output forward(const Matrix& inputs) const;
    Matrix embed(const Matrix& inputs) const { return forward(inputs).features; }

    // Throws ShapeError if the tape was produced before the last parameter change.
    EncoderGradients backward(const ForwardTape& tape, const Matrix& grad_features) const;

    void sgd_step(const EncoderGradients& grads, const SgdConfig& cfg);

    // Direct parameter access for checkpoint loading and gradient checks.
    std::vector<DenseLayer>& mutable_layers();

private:
    void validate_chain() const;

    std::vector<DenseLayer> layers_;
    std::uint64_t stamp_ = 0;
};

// Backprop through row normalization x = y / |y|: dL/dy = (g - x (x.g)) / |y|.
Matrix normalization_backward(const Matrix& features, std::span<const double> raw_norms,
                              const Matrix& grad_features);

}  // namespace dnc
