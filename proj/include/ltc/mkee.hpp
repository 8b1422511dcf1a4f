#pragma once
// Pseudo-unknown generation: cross-class mixup anchors pushed one normalized
// gradient-ascent step along
//
//   J(x) = H(softmax(logits(x))) - lambda_rho * rho_batch(f(x))
//
// where rho_batch is a Gaussian KDE of f(x) against reference features with a
// median-heuristic bandwidth.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ltc/dense.hpp"
#include "ltc/neuralcore.hpp"

namespace ltc {

using Rng = std::mt19937_64;

struct MkeeConfig {
    double eta = 1.0;  // Beta(eta, eta) mixing
    double epsilon = 0.05;
    double lambda_rho = 0.1;
    double sigma0 = 1.0;
    double p_gen = 0.3;
    int warmup_epochs = 1;

    void validate() const;
};

struct MixupAnchors {
    DenseMatrix anchors;  // one row per anchor
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (i, j), labels differ
    Vector lambdas;
};

// lambda * a + (1 - lambda) * b
Vector mix(std::span<const double> a, std::span<const double> b, double lambda);

// Draws `count` anchors, each from a uniformly chosen ordered cross-class pair
// with lambda ~ Beta(eta, eta). Returns no anchors when only one class is
// present. When forced_lambda is set it replaces the Beta draw.
MixupAnchors mixup_pairs(const DenseMatrix& inputs, std::span<const int> labels, std::size_t count,
                         double eta, Rng& rng, std::optional<double> forced_lambda = std::nullopt);

double sample_beta(double a, double b, Rng& rng);

struct ScalarGrad {
    double value = 0.0;
    Vector grad;
};

double predictive_entropy(std::span<const double> logits);
// Entropy and its gradient with respect to the logits.
ScalarGrad predictive_entropy_grad(std::span<const double> logits);

// Mean Gaussian kernel exp(-|f - r|^2 / (2 sigma^2)) over reference rows.
double batch_density(std::span<const double> feature, const DenseMatrix& refs, double sigma);
ScalarGrad batch_density_grad(std::span<const double> feature, const DenseMatrix& refs, double sigma);

// sigma0 * median of all |b - r| over batch rows b and reference rows r.
// Even counts take the mean of the two middle values. Throws DegenerateError
// when the median is 0.
double median_bandwidth(const DenseMatrix& batch_features, const DenseMatrix& refs, double sigma0);

// J evaluated on a forward trace, with gradients at logits and feature.
ObjectiveValue mkee_output_objective(const ForwardTrace& trace, const DenseMatrix& refs,
                                     double lambda_rho, double sigma);
double mkee_objective(const ModelParams& params, std::span<const double> x, const DenseMatrix& refs,
                      double lambda_rho, double sigma);

struct StepResult {
    Vector x;
    double grad_norm = 0.0;
    bool vanished = false;
};

// x + epsilon * g / |g|; when |g| <= 1e-12 returns x unchanged, flagged.
StepResult normalized_ascent_step(std::span<const double> x, std::span<const double> grad, double epsilon);

struct PerturbResult {
    StepResult step;
    double objective_before = 0.0;
};

PerturbResult one_step_perturb(const ModelParams& params, std::span<const double> x_mix,
                               const DenseMatrix& refs, const MkeeConfig& cfg, double sigma);

struct PseudoDiagnostics {
    double entropy_before = 0.0, entropy_after = 0.0;
    double density_before = 0.0, density_after = 0.0;
    double objective_before = 0.0, objective_after = 0.0;
    double grad_norm = 0.0;
    bool vanished = false;
};

struct PseudoBatch {
    bool triggered = false;
    MixupAnchors mixup;
    DenseMatrix outputs;  // x_pus, one row per anchor
    double sigma = 0.0;
    std::vector<PseudoDiagnostics> diagnostics;

    std::size_t size() const { return outputs.rows(); }
    bool empty() const { return outputs.rows() == 0; }
};

// Empty unless epoch >= warmup_epochs and a Bernoulli(p_gen) trigger fires.
// Reference features are the batch's own unit features. One pseudo sample
// per batch element when triggered.
PseudoBatch generate_pseudo_batch(const ModelParams& params, const DenseMatrix& inputs,
                                  std::span<const int> labels, const MkeeConfig& cfg, int epoch, Rng& rng);

// Same, with the reference features already computed (rows of f(inputs)).
PseudoBatch generate_pseudo_batch(const ModelParams& params, const DenseMatrix& inputs,
                                  std::span<const int> labels, const DenseMatrix& ref_features,
                                  const MkeeConfig& cfg, int epoch, Rng& rng);

// CSV: iteration,anchor,entropy_before,entropy_after,density_before,
// density_after,objective_before,objective_after,grad_norm,vanished
void write_diagnostics_header(std::ostream& out);
void write_diagnostics(std::ostream& out, std::size_t iteration, const PseudoBatch& batch);

}  // namespace ltc
