#include <algorithm>
#include <cmath>
#include <ostream>

#include "ltc/error.hpp"
#include "ltc/mkee.hpp"
#include "ltc/simd.hpp"

namespace ltc {

void MkeeConfig::validate() const {
    if (!(eta > 0.0)) throw ConfigError("mkee.eta must be > 0");
    if (!(epsilon >= 0.0)) throw ConfigError("mkee.epsilon must be >= 0");
    if (!(lambda_rho >= 0.0)) throw ConfigError("mkee.lambda_rho must be >= 0");
    if (!(sigma0 > 0.0)) throw ConfigError("mkee.sigma0 must be > 0");
    if (!(p_gen >= 0.0 && p_gen <= 1.0)) throw ConfigError("mkee.p_gen must lie in [0, 1]");
    if (warmup_epochs < 0) throw ConfigError("mkee.warmup_epochs must be >= 0");
}

Vector mix(std::span<const double> a, std::span<const double> b, double lambda) {
    if (a.size() != b.size()) throw DimensionError("mix: size mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
    return out;
}

double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x + y > 0.0 ? x / (x + y) : 0.5;
}

MixupAnchors mixup_pairs(const DenseMatrix& inputs, std::span<const int> labels, std::size_t count,
                         double eta, Rng& rng, std::optional<double> forced_lambda) {
    if (labels.size() != inputs.rows()) throw DimensionError("mixup_pairs: label count != input rows");
    MixupAnchors out;
    out.anchors = DenseMatrix(0, inputs.cols());
    const std::size_t n = inputs.rows();
    bool mixed = false;
    for (std::size_t i = 1; i < n && !mixed; ++i) mixed = labels[i] != labels[0];
    if (!mixed) return out;

    // Rejection sampling on ordered pairs is uniform over the cross-class ones.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t a = 0; a < count; ++a) {
        std::size_t i = 0, j = 0;
        do {
            i = pick(rng);
            j = pick(rng);
        } while (labels[i] == labels[j]);
        const double lambda = forced_lambda ? *forced_lambda : sample_beta(eta, eta, rng);
        out.anchors.append_row(mix(inputs.row(i), inputs.row(j), lambda));
        out.pairs.emplace_back(i, j);
        out.lambdas.push_back(lambda);
    }
    return out;
}

ScalarGrad predictive_entropy_grad(std::span<const double> logits) {
    ScalarGrad out;
    out.grad.assign(logits.size(), 0.0);
    if (logits.empty()) return out;
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    const double lse = m + std::log(z);
    Vector logp(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        logp[c] = logits[c] - lse;
        const double p = std::exp(logp[c]);
        if (p > 0.0) out.value -= p * logp[c];
    }
    out.value = std::max(out.value, 0.0);
    // dH/dl_c = -p_c (log p_c + H)
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out.grad[c] = -std::exp(logp[c]) * (logp[c] + out.value);
    }
    return out;
}

double predictive_entropy(std::span<const double> logits) { return predictive_entropy_grad(logits).value; }

ScalarGrad batch_density_grad(std::span<const double> feature, const DenseMatrix& refs, double sigma) {
    if (refs.rows() == 0) throw InvalidArgument("batch_density: empty reference set");
    if (refs.cols() != feature.size()) throw DimensionError("batch_density: dimension mismatch");
    if (!(sigma > 0.0)) throw InvalidArgument("batch_density: sigma must be > 0");
    const auto& k = simd::active();
    const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
    const double inv_r = 1.0 / static_cast<double>(refs.rows());
    ScalarGrad out;
    out.grad.assign(feature.size(), 0.0);
    for (std::size_t r = 0; r < refs.rows(); ++r) {
        const auto ref = refs.row(r);
        const double w = std::exp(-k.squared_distance(feature.data(), ref.data(), feature.size()) * inv_two_s2);
        out.value += w * inv_r;
        // d/df exp(-|f-r|^2/(2s^2)) = -w (f - r) / s^2
        const double c = -w * inv_r * 2.0 * inv_two_s2;
        for (std::size_t i = 0; i < feature.size(); ++i) out.grad[i] += c * (feature[i] - ref[i]);
    }
    return out;
}

double batch_density(std::span<const double> feature, const DenseMatrix& refs, double sigma) {
    return batch_density_grad(feature, refs, sigma).value;
}

double median_bandwidth(const DenseMatrix& batch_features, const DenseMatrix& refs, double sigma0) {
    if (batch_features.rows() == 0 || refs.rows() == 0) throw InvalidArgument("median_bandwidth: empty set");
    if (batch_features.cols() != refs.cols()) throw DimensionError("median_bandwidth: dimension mismatch");
    const auto& k = simd::active();
    Vector dist;
    dist.reserve(batch_features.rows() * refs.rows());
    for (std::size_t b = 0; b < batch_features.rows(); ++b) {
        for (std::size_t r = 0; r < refs.rows(); ++r) {
            dist.push_back(std::sqrt(
                k.squared_distance(batch_features.row(b).data(), refs.row(r).data(), refs.cols())));
        }
    }
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    if (!(median > 0.0)) throw DegenerateError("median_bandwidth: median pairwise distance is 0");
    return sigma0 * median;
}

ObjectiveValue mkee_output_objective(const ForwardTrace& trace, const DenseMatrix& refs, double lambda_rho,
                                     double sigma) {
    ScalarGrad h = predictive_entropy_grad(trace.logits);
    ObjectiveValue out;
    out.value = h.value;
    out.grad.d_logits = std::move(h.grad);
    if (lambda_rho != 0.0) {
        ScalarGrad rho = batch_density_grad(trace.feature, refs, sigma);
        out.value -= lambda_rho * rho.value;
        for (double& g : rho.grad) g *= -lambda_rho;
        out.grad.d_feature = std::move(rho.grad);
    }
    return out;
}

double mkee_objective(const ModelParams& params, std::span<const double> x, const DenseMatrix& refs,
                      double lambda_rho, double sigma) {
    const ForwardTrace t = forward(params, x);
    double v = predictive_entropy(t.logits);
    if (lambda_rho != 0.0) v -= lambda_rho * batch_density(t.feature, refs, sigma);
    return v;
}

StepResult normalized_ascent_step(std::span<const double> x, std::span<const double> grad, double epsilon) {
    if (x.size() != grad.size()) throw DimensionError("normalized_ascent_step: size mismatch");
    StepResult out;
    out.x.assign(x.begin(), x.end());
    out.grad_norm = l2_norm(grad);
    if (!(out.grad_norm > 1e-12)) {
        out.vanished = true;
        return out;
    }
    const double scale = epsilon / out.grad_norm;
    for (std::size_t i = 0; i < x.size(); ++i) out.x[i] += scale * grad[i];
    return out;
}

PerturbResult one_step_perturb(const ModelParams& params, std::span<const double> x_mix,
                               const DenseMatrix& refs, const MkeeConfig& cfg, double sigma) {
    const InputGradient g = grad_wrt_input(params, x_mix, [&](const ForwardTrace& t) {
        return mkee_output_objective(t, refs, cfg.lambda_rho, sigma);
    });
    return PerturbResult{normalized_ascent_step(x_mix, g.grad, cfg.epsilon), g.value};
}

PseudoBatch generate_pseudo_batch(const ModelParams& params, const DenseMatrix& inputs,
                                  std::span<const int> labels, const MkeeConfig& cfg, int epoch, Rng& rng) {
    if (epoch < cfg.warmup_epochs) return {};
    DenseMatrix refs(0, params.feature_dim());
    for (std::size_t i = 0; i < inputs.rows(); ++i) refs.append_row(forward(params, inputs.row(i)).feature);
    return generate_pseudo_batch(params, inputs, labels, refs, cfg, epoch, rng);
}

PseudoBatch generate_pseudo_batch(const ModelParams& params, const DenseMatrix& inputs,
                                  std::span<const int> labels, const DenseMatrix& ref_features,
                                  const MkeeConfig& cfg, int epoch, Rng& rng) {
    PseudoBatch out;
    if (epoch < cfg.warmup_epochs) return out;
    std::bernoulli_distribution trigger(cfg.p_gen);
    if (!trigger(rng)) return out;
    out.triggered = true;
    out.mixup = mixup_pairs(inputs, labels, inputs.rows(), cfg.eta, rng);
    out.outputs = DenseMatrix(0, inputs.cols());
    if (out.mixup.anchors.rows() == 0) return out;

    out.sigma = median_bandwidth(ref_features, ref_features, cfg.sigma0);
    for (std::size_t a = 0; a < out.mixup.anchors.rows(); ++a) {
        const auto x_mix = out.mixup.anchors.row(a);
        const PerturbResult p = one_step_perturb(params, x_mix, ref_features, cfg, out.sigma);
        out.outputs.append_row(p.step.x);

        const ForwardTrace before = forward(params, x_mix);
        const ForwardTrace after = forward(params, p.step.x);
        PseudoDiagnostics d;
        d.entropy_before = predictive_entropy(before.logits);
        d.entropy_after = predictive_entropy(after.logits);
        d.density_before = batch_density(before.feature, ref_features, out.sigma);
        d.density_after = batch_density(after.feature, ref_features, out.sigma);
        d.objective_before = d.entropy_before - cfg.lambda_rho * d.density_before;
        d.objective_after = d.entropy_after - cfg.lambda_rho * d.density_after;
        d.grad_norm = p.step.grad_norm;
        d.vanished = p.step.vanished;
        out.diagnostics.push_back(d);
    }
    return out;
}

void write_diagnostics_header(std::ostream& out) {
    out << "iteration,anchor,entropy_before,entropy_after,density_before,density_after,"
           "objective_before,objective_after,grad_norm,vanished\n";
}

void write_diagnostics(std::ostream& out, std::size_t iteration, const PseudoBatch& batch) {
    for (std::size_t a = 0; a < batch.diagnostics.size(); ++a) {
        const PseudoDiagnostics& d = batch.diagnostics[a];
        out << iteration << ',' << a << ',' << d.entropy_before << ',' << d.entropy_after << ','
            << d.density_before << ',' << d.density_after << ',' << d.objective_before << ','
            << d.objective_after << ',' << d.grad_norm << ',' << (d.vanished ? 1 : 0) << '\n';
    }
}

}  // namespace ltc
