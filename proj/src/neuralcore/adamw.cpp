#include <cmath>

#include "ltc/error.hpp"
#include "ltc/neuralcore.hpp"

namespace ltc {

OptimizerState OptimizerState::for_params(const ModelParams& params, const AdamWConfig& config) {
    OptimizerState s;
    s.config = config;
    for (auto t : params.tensors()) {
        s.first_moment.emplace_back(t.size(), 0.0);
        s.second_moment.emplace_back(t.size(), 0.0);
    }
    return s;
}

void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state) {
    auto p = params.tensors();
    const auto g = grads.tensors();
    if (p.size() != g.size() || p.size() != state.first_moment.size()) {
        throw DimensionError("adamw_step: tensor count mismatch");
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t].size() != g[t].size() || p[t].size() != state.first_moment[t].size()) {
            throw DimensionError("adamw_step: tensor shape mismatch");
        }
        for (double v : g[t]) {
            if (!std::isfinite(v)) throw InvalidArgument("adamw_step: non-finite gradient entry");
        }
    }

    const AdamWConfig& c = state.config;
    ++state.step;
    const double step = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, step);
    const double bc2 = 1.0 - std::pow(c.beta2, step);
    const double decay = 1.0 - c.lr * c.weight_decay;
    for (std::size_t t = 0; t < p.size(); ++t) {
        Vector& m = state.first_moment[t];
        Vector& v = state.second_moment[t];
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            const double gi = g[t][i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[t][i] = p[t][i] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

}  // namespace ltc
