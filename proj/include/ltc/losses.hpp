#pragma once
// Training objectives. Each returns its value together with the gradient at
// the quantity it consumes (features, logits or scores).

#include <span>
#include <vector>

#include "ltc/dense.hpp"

namespace ltc {

struct LossConfig {
    double temperature = 0.07;
    double alpha = 0.3;      // supervised contrastive weight
    double gamma_mm = 0.05;  // dual max-margin weight
    double m_pos = 0.05;
    double m_neg = 0.05;

    void validate() const;
};

struct MatrixLoss {
    double value = 0.0;
    DenseMatrix grad;  // same shape as the input
};

struct SupConLoss : MatrixLoss {
    Vector per_anchor;
};

// Supervised contrastive loss over all views in the batch (rows of
// `features`, unit norm). Positives of anchor i are every other row with the
// same label; the denominator runs over every row except i. Mean over anchors.
// Throws InvalidArgument when an anchor has no positive.
SupConLoss sup_con_loss(const DenseMatrix& features, std::span<const int> labels, double temperature);

// Mean softmax cross-entropy; grad = (softmax - onehot) / N.
MatrixLoss ce_loss(const DenseMatrix& logits, std::span<const int> labels);

struct MarginLoss {
    double pos = 0.0;
    double neg = 0.0;
    double total = 0.0;
    Vector grad_known;   // d total / d known score
    Vector grad_pseudo;  // d total / d pseudo score
};

// Dual hinge around tau: known scores pushed above tau + m_pos, pseudo scores
// below tau - m_neg. An empty pseudo set contributes 0. Subgradient at the
// kink is 0.
MarginLoss max_margin_loss(std::span<const double> known_scores, std::span<const double> pseudo_scores,
                           double tau, double m_pos, double m_neg);

// ce + alpha*sup + gamma_mm*mm
double total_loss(double ce, double sup, double mm, double alpha, double gamma_mm);

}  // namespace ltc
