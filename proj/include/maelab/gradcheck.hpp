#pragma once

#include <functional>

#include "maelab/params.hpp"

namespace maelab {

// Compares reverse-mode gradients against central finite differences
// along `probe_count` randomly chosen parameter coordinates.
//
// `loss_fn` must be a pure function of the current parameter values
// returning a scalar tensor. The default step 1e-5 balances truncation
// against round-off at double precision.
//
// Two comparison regimes per coordinate:
//  - measurable (max(|analytic|, |numeric|) >= 1e-5): relative error
//    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
//  - below that, a central difference carries ~1e-9 of round-off and
//    cannot support a relative comparison; the two values must instead
//    agree within 1e-7 absolute and contribute zero relative error.
// Returns the worst relative error; throws NumericError if an
// unmeasurable coordinate fails its absolute consistency bound.
inline constexpr double kGradMeasurableFloor = 1e-5;
inline constexpr double kGradConsistencyBound = 1e-7;

double grad_check(const std::function<Tensor()>& loss_fn, ParamSet& params, int probe_count,
                  uint64_t seed, double step = 1e-5);

}  // namespace maelab
