#pragma once
// Fixed-topology MLP encoder with a linear head, reverse-mode gradients with
// respect to both parameters and input, and an AdamW updater.
//
//   a_0 = x
//   a_l = relu(W_l a_{l-1} + b_l)       hidden layers
//   z   = W_L a_{L-1} + b_L             embedding (no activation)
//   f   = z / ||z||                     unit feature
//   logits = W_h f + b_h

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ltc/dense.hpp"

namespace ltc {

struct Layer {
    DenseMatrix weight;  // out x in
    Vector bias;         // out

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

struct ModelShape {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t feature_dim = 32;
    std::size_t num_classes = 5;
};

struct ModelParams {
    std::vector<Layer> encoder;  // last layer is linear
    Layer head;

    std::size_t input_dim() const { return encoder.front().in_dim(); }
    std::size_t feature_dim() const { return encoder.back().out_dim(); }
    std::size_t num_classes() const { return head.out_dim(); }

    // Flat views over every tensor in a fixed order: encoder layers
    // (weight, bias) first, then the head.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

    // Same shapes, all zeros.
    ModelParams zeros_like() const;
    // Throws DimensionError if the layer chain is inconsistent.
    void validate() const;

    bool operator==(const ModelParams& o) const;
};

// He-normal hidden layers, Xavier-normal embedding layer and head, zero biases.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct ForwardTrace {
    Vector input;
    std::vector<Vector> pre;   // per encoder layer, before activation
    std::vector<Vector> post;  // per encoder layer, after activation (last = z)
    double embedding_norm = 0.0;
    Vector feature;  // f(x)
    Vector logits;

    const Vector& embedding() const { return post.back(); }
};

// Throws DimensionError on input size mismatch, DegenerateError when
// ||z(x)|| < 1e-12.
ForwardTrace forward(const ModelParams& params, std::span<const double> x);

// Loss gradient at the trace outputs. Empty members are treated as zero.
struct OutputGrad {
    Vector d_embedding;  // dL/dz, added to what flows back through f
    Vector d_feature;    // dL/df
    Vector d_logits;     // dL/dlogits
};

// Accumulates dL/dparams into param_grads and/or dL/dx into input_grad
// (either may be null).
void backward(const ModelParams& params, const ForwardTrace& trace, const OutputGrad& grad,
              ModelParams* param_grads, Vector* input_grad);

ModelParams backprop_params(const ModelParams& params, const ForwardTrace& trace,
                            const OutputGrad& grad);

struct ObjectiveValue {
    double value = 0.0;
    OutputGrad grad;
};
using OutputObjective = std::function<ObjectiveValue(const ForwardTrace&)>;

struct InputGradient {
    double value = 0.0;  // objective at x
    Vector grad;         // d objective / dx
};

// Gradient of a scalar functional of (f(x), logits(x)) with respect to x.
InputGradient grad_wrt_input(const ModelParams& params, std::span<const double> x,
                             const OutputObjective& objective);

struct AdamWConfig {
    double lr = 1e-2;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    AdamWConfig config;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::uint64_t step = 0;

    static OptimizerState for_params(const ModelParams& params, const AdamWConfig& config);
};

// Decoupled weight decay Adam:
//   w <- w - lr*wd*w;  m,v moment updates;  w <- w - lr * m_hat / (sqrt(v_hat) + eps)
// Throws InvalidArgument on non-finite gradients (parameters untouched).
void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state);

}  // namespace ltc
