#include "maelab/adamw.hpp"

#include <cmath>

namespace maelab {

void AdamW::step(ParamSet& params) {
    if (first_moment_.empty()) {
        first_moment_.resize(params.size());
        second_moment_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            if (params.tensor(i).requires_grad) {
                first_moment_[i].assign(params.tensor(i).numel(), 0.0);
                second_moment_[i].assign(params.tensor(i).numel(), 0.0);
            }
        }
    }
    if (first_moment_.size() != params.size()) {
        throw TensorError("adamw: parameter set changed since first step");
    }

    step_count_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.tensor(i);
        if (!p.requires_grad) continue;
        if (!p.grad || p.grad->size() != p.numel()) {
            throw TensorError("adamw: gradient shape mismatch at '" + params.name(i) + "'");
        }
        if (first_moment_[i].size() != p.numel()) {
            throw TensorError("adamw: state shape mismatch at '" + params.name(i) + "'");
        }
        const double* g = p.grad->data();
        for (size_t j = 0; j < p.numel(); ++j) {
            if (!std::isfinite(g[j])) {
                throw NumericError("adamw: non-finite gradient at '" + params.name(i) + "'");
            }
        }

        double* value = p.data->data();
        double* m = first_moment_[i].data();
        double* v = second_moment_[i].data();
        for (size_t j = 0; j < p.numel(); ++j) {
            value[j] *= decay;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            value[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

}  // namespace maelab
