#include <cmath>
#include <random>
#include <string>

#include "ltc/error.hpp"
#include "ltc/neuralcore.hpp"
#include "ltc/simd.hpp"

namespace ltc {
namespace {

Layer random_layer(std::size_t in, std::size_t out, double stddev, std::mt19937_64& rng) {
    Layer layer{DenseMatrix(out, in), Vector(out, 0.0)};
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& w : layer.weight.values()) w = normal(rng);
    return layer;
}

Layer zero_layer_like(const Layer& l) {
    return Layer{DenseMatrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)};
}

void affine(const Layer& layer, std::span<const double> in, Vector& out) {
    out.resize(layer.out_dim());
    simd::active().gemv(layer.weight.values().data(), layer.weight.rows(), layer.weight.cols(),
                        in.data(), layer.bias.data(), out.data());
}

}  // namespace

std::vector<std::span<double>> ModelParams::tensors() {
    std::vector<std::span<double>> out;
    for (auto& l : encoder) {
        out.emplace_back(l.weight.values());
        out.emplace_back(l.bias);
    }
    out.emplace_back(head.weight.values());
    out.emplace_back(head.bias);
    return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : encoder) {
        out.emplace_back(l.weight.values());
        out.emplace_back(l.bias);
    }
    out.emplace_back(head.weight.values());
    out.emplace_back(head.bias);
    return out;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    for (const auto& l : encoder) z.encoder.push_back(zero_layer_like(l));
    z.head = zero_layer_like(head);
    return z;
}

void ModelParams::validate() const {
    if (encoder.empty()) throw DimensionError("model has no encoder layers");
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        const Layer& l = encoder[i];
        if (l.bias.size() != l.out_dim()) {
            throw DimensionError("encoder layer " + std::to_string(i) + ": bias size mismatch");
        }
        if (i > 0 && l.in_dim() != encoder[i - 1].out_dim()) {
            throw DimensionError("encoder layer " + std::to_string(i) + ": input dim " +
                                 std::to_string(l.in_dim()) + " != previous output dim " +
                                 std::to_string(encoder[i - 1].out_dim()));
        }
    }
    if (head.in_dim() != feature_dim()) throw DimensionError("head input dim != feature dim");
    if (head.bias.size() != head.out_dim()) throw DimensionError("head bias size mismatch");
}

bool ModelParams::operator==(const ModelParams& o) const {
    if (encoder.size() != o.encoder.size()) return false;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        if (!(encoder[i].weight == o.encoder[i].weight) || encoder[i].bias != o.encoder[i].bias) return false;
    }
    return head.weight == o.head.weight && head.bias == o.head.bias;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
    if (shape.input_dim == 0 || shape.feature_dim == 0 || shape.num_classes == 0) {
        throw InvalidArgument("init_params: zero-sized dimension");
    }
    std::mt19937_64 rng(seed);
    ModelParams p;
    std::size_t in = shape.input_dim;
    for (std::size_t width : shape.hidden) {
        p.encoder.push_back(random_layer(in, width, std::sqrt(2.0 / static_cast<double>(in)), rng));
        in = width;
    }
    p.encoder.push_back(random_layer(
        in, shape.feature_dim, std::sqrt(2.0 / static_cast<double>(in + shape.feature_dim)), rng));
    p.head = random_layer(shape.feature_dim, shape.num_classes,
                          std::sqrt(2.0 / static_cast<double>(shape.feature_dim + shape.num_classes)),
                          rng);
    return p;
}

ForwardTrace forward(const ModelParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim()) {
        throw DimensionError("forward: input dim " + std::to_string(x.size()) + " != model input dim " +
                             std::to_string(params.input_dim()));
    }
    ForwardTrace t;
    t.input.assign(x.begin(), x.end());
    const std::size_t n_layers = params.encoder.size();
    t.pre.resize(n_layers);
    t.post.resize(n_layers);
    std::span<const double> in = t.input;
    for (std::size_t i = 0; i < n_layers; ++i) {
        affine(params.encoder[i], in, t.pre[i]);
        t.post[i] = t.pre[i];
        if (i + 1 < n_layers) {
            for (double& v : t.post[i]) v = v > 0.0 ? v : 0.0;
        }
        in = t.post[i];
    }
    const Vector& z = t.post.back();
    t.embedding_norm = l2_norm(z);
    if (!(t.embedding_norm >= 1e-12)) {
        throw DegenerateError("forward: embedding norm " + std::to_string(t.embedding_norm) +
                              " below 1e-12");
    }
    t.feature = z;
    for (double& v : t.feature) v /= t.embedding_norm;
    affine(params.head, t.feature, t.logits);
    return t;
}

void backward(const ModelParams& params, const ForwardTrace& trace, const OutputGrad& grad,
              ModelParams* param_grads, Vector* input_grad) {
    const auto& k = simd::active();
    const std::size_t d = params.feature_dim();
    const std::size_t n_classes = params.num_classes();

    Vector d_feature(d, 0.0);
    if (!grad.d_feature.empty()) {
        if (grad.d_feature.size() != d) throw DimensionError("backward: d_feature size mismatch");
        d_feature = grad.d_feature;
    }
    if (!grad.d_logits.empty()) {
        if (grad.d_logits.size() != n_classes) throw DimensionError("backward: d_logits size mismatch");
        if (param_grads) {
            k.outer_acc(grad.d_logits.data(), n_classes, trace.feature.data(), d,
                        param_grads->head.weight.values().data());
            for (std::size_t c = 0; c < n_classes; ++c) param_grads->head.bias[c] += grad.d_logits[c];
        }
        k.gemv_t_acc(params.head.weight.values().data(), n_classes, d, grad.d_logits.data(),
                     d_feature.data());
    }

    // f = z/|z|  =>  dz = (df - f (f.df)) / |z|
    const double proj = k.dot(trace.feature.data(), d_feature.data(), d);
    Vector delta(d);
    for (std::size_t i = 0; i < d; ++i) {
        delta[i] = (d_feature[i] - trace.feature[i] * proj) / trace.embedding_norm;
    }
    if (!grad.d_embedding.empty()) {
        if (grad.d_embedding.size() != d) throw DimensionError("backward: d_embedding size mismatch");
        for (std::size_t i = 0; i < d; ++i) delta[i] += grad.d_embedding[i];
    }

    for (std::size_t li = params.encoder.size(); li-- > 0;) {
        const Layer& layer = params.encoder[li];
        if (li + 1 < params.encoder.size()) {
            for (std::size_t j = 0; j < delta.size(); ++j) {
                if (!(trace.pre[li][j] > 0.0)) delta[j] = 0.0;
            }
        }
        const Vector& in = li == 0 ? trace.input : trace.post[li - 1];
        if (param_grads) {
            Layer& g = param_grads->encoder[li];
            k.outer_acc(delta.data(), layer.out_dim(), in.data(), layer.in_dim(), g.weight.values().data());
            for (std::size_t j = 0; j < delta.size(); ++j) g.bias[j] += delta[j];
        }
        if (li == 0 && !input_grad) break;
        Vector next(layer.in_dim(), 0.0);
        k.gemv_t_acc(layer.weight.values().data(), layer.out_dim(), layer.in_dim(), delta.data(),
                     next.data());
        delta = std::move(next);
    }
    if (input_grad) {
        if (input_grad->empty()) input_grad->assign(delta.size(), 0.0);
        for (std::size_t i = 0; i < delta.size(); ++i) (*input_grad)[i] += delta[i];
    }
}

ModelParams backprop_params(const ModelParams& params, const ForwardTrace& trace,
                            const OutputGrad& grad) {
    ModelParams g = params.zeros_like();
    backward(params, trace, grad, &g, nullptr);
    return g;
}

InputGradient grad_wrt_input(const ModelParams& params, std::span<const double> x,
                             const OutputObjective& objective) {
    const ForwardTrace trace = forward(params, x);
    ObjectiveValue obj = objective(trace);
    InputGradient out;
    out.value = obj.value;
    out.grad.assign(x.size(), 0.0);
    backward(params, trace, obj.grad, nullptr, &out.grad);
    return out;
}

}  // namespace ltc
