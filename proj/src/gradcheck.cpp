#include "maelab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "maelab/rng.hpp"

namespace maelab {

double grad_check(const std::function<Tensor()>& loss_fn, ParamSet& params, int probe_count,
                  uint64_t seed, double step) {
    if (probe_count < 1) throw TensorError("grad_check: probe_count must be >= 1");

    params.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);

    // Trainable coordinates, flattened across parameters.
    std::vector<size_t> trainable;
    size_t total = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        if (params.tensor(i).requires_grad) {
            trainable.push_back(i);
            total += params.tensor(i).numel();
        }
    }
    if (total == 0) throw TensorError("grad_check: no trainable parameters");

    std::vector<double> analytic;
    analytic.reserve(total);
    for (size_t i : trainable) {
        const auto& g = *params.tensor(i).grad;
        analytic.insert(analytic.end(), g.begin(), g.end());
    }

    Rng rng(seed);
    double worst = 0.0;
    for (int probe = 0; probe < probe_count; ++probe) {
        size_t flat = static_cast<size_t>(rng.below(total));
        size_t which = 0, offset = flat;
        while (offset >= params.tensor(trainable[which]).numel()) {
            offset -= params.tensor(trainable[which]).numel();
            ++which;
        }
        double& coord = (*params.tensor(trainable[which]).data)[offset];
        const double original = coord;

        double f_plus, f_minus;
        {
            NoGradGuard no_grad;
            coord = original + step;
            f_plus = loss_fn().scalar();
            coord = original - step;
            f_minus = loss_fn().scalar();
        }
        coord = original;

        const double numeric = (f_plus - f_minus) / (2.0 * step);
        const double a = analytic[flat];
        if (std::max(std::fabs(a), std::fabs(numeric)) < kGradMeasurableFloor) {
            // Too small for a finite-difference ratio; require absolute
            // agreement at the oracle's noise floor instead.
            if (std::fabs(a - numeric) > kGradConsistencyBound) {
                throw NumericError("grad_check: sub-resolution coordinate disagrees: analytic " +
                                   std::to_string(a) + " vs numeric " + std::to_string(numeric));
            }
            continue;
        }
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace maelab
