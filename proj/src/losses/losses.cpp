#include <algorithm>
#include <cmath>
#include <string>

#include "ltc/error.hpp"
#include "ltc/losses.hpp"
#include "ltc/simd.hpp"

namespace ltc {

void LossConfig::validate() const {
    if (!(temperature > 0.0)) throw ConfigError("loss.temperature must be > 0");
    if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
    if (!(gamma_mm >= 0.0)) throw ConfigError("loss.gamma_mm must be >= 0");
    if (!(m_pos >= 0.0) || !(m_neg >= 0.0)) throw ConfigError("loss margins must be >= 0");
}

SupConLoss sup_con_loss(const DenseMatrix& features, std::span<const int> labels, double temperature) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (labels.size() != n) throw DimensionError("sup_con_loss: label count != feature rows");
    if (n < 2) throw InvalidArgument("sup_con_loss: need at least 2 views");
    if (!(temperature > 0.0)) throw InvalidArgument("sup_con_loss: temperature must be > 0");

    const auto& k = simd::active();
    DenseMatrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double s = k.dot(features.row(i).data(), features.row(j).data(), d) / temperature;
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }

    SupConLoss out;
    out.grad = DenseMatrix(n, d);
    out.per_anchor.assign(n, 0.0);
    // dL/dsim, later folded into feature gradients.
    DenseMatrix dsim(n, n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double max_s = -INFINITY;
        std::size_t n_pos = 0;
        for (std::size_t b = 0; b < n; ++b) {
            if (b == i) continue;
            max_s = std::max(max_s, sim(i, b));
            if (labels[b] == labels[i]) ++n_pos;
        }
        if (n_pos == 0) {
            throw InvalidArgument("sup_con_loss: anchor " + std::to_string(i) + " has no positive");
        }
        double denom = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            if (b != i) denom += std::exp(sim(i, b) - max_s);
        }
        const double log_denom = max_s + std::log(denom);
        const double inv_pos = 1.0 / static_cast<double>(n_pos);
        double loss = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            if (b == i) continue;
            const double q = std::exp(sim(i, b) - log_denom);
            double g = q;
            if (labels[b] == labels[i]) {
                loss += log_denom - sim(i, b);
                g -= inv_pos;
            }
            dsim(i, b) += g * inv_n;
        }
        out.per_anchor[i] = loss * inv_pos;
        out.value += out.per_anchor[i] * inv_n;
    }

    // sim(i,b) = f_i.f_b / T
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < n; ++b) {
            const double g = (dsim(i, b) + dsim(b, i)) / temperature;
            if (g != 0.0) k.axpy(g, features.row(b).data(), out.grad.row(i).data(), d);
        }
    }
    return out;
}

MatrixLoss ce_loss(const DenseMatrix& logits, std::span<const int> labels) {
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    if (labels.size() != n) throw DimensionError("ce_loss: label count != logit rows");
    if (n == 0) throw InvalidArgument("ce_loss: empty batch");
    MatrixLoss out;
    out.grad = DenseMatrix(n, k);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw InvalidArgument("ce_loss: label " + std::to_string(y) + " out of range");
        }
        const auto row = logits.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - m);
        const double lse = m + std::log(z);
        out.value += (lse - row[y]) * inv_n;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = std::exp(row[c] - lse);
            out.grad(i, c) = (p - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    return out;
}

MarginLoss max_margin_loss(std::span<const double> known_scores, std::span<const double> pseudo_scores,
                           double tau, double m_pos, double m_neg) {
    if (known_scores.empty()) throw InvalidArgument("max_margin_loss: empty known batch");
    MarginLoss out;
    out.grad_known.assign(known_scores.size(), 0.0);
    out.grad_pseudo.assign(pseudo_scores.size(), 0.0);

    const double inv_k = 1.0 / static_cast<double>(known_scores.size());
    const double upper = tau + m_pos;
    for (std::size_t i = 0; i < known_scores.size(); ++i) {
        const double gap = upper - known_scores[i];
        if (gap > 0.0) {
            out.pos += gap * inv_k;
            out.grad_known[i] = -inv_k;
        }
    }
    if (!pseudo_scores.empty()) {
        const double inv_p = 1.0 / static_cast<double>(pseudo_scores.size());
        const double lower = tau - m_neg;
        for (std::size_t i = 0; i < pseudo_scores.size(); ++i) {
            const double gap = pseudo_scores[i] - lower;
            if (gap > 0.0) {
                out.neg += gap * inv_p;
                out.grad_pseudo[i] = inv_p;
            }
        }
    }
    out.total = out.pos + out.neg;
    return out;
}

double total_loss(double ce, double sup, double mm, double alpha, double gamma_mm) {
    return ce + alpha * sup + gamma_mm * mm;
}

}  // namespace ltc
