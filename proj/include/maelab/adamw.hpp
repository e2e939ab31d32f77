#pragma once

#include "maelab/params.hpp"

namespace maelab {

struct AdamWConfig {
    double lr = 1.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.05;
    double eps = 1e-8;
};

// AdamW with decoupled weight decay and bias correction. The decay is
// applied as p *= (1 - lr * weight_decay) before the moment update, so
// with zero gradients and zero decay a step is an exact fixed point.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    // One update over every trainable parameter, reading .grad buffers.
    // Throws on shape drift or non-finite gradients.
    void step(ParamSet& params);

    long step_count() const { return step_count_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const AdamWConfig& config() const { return cfg_; }

private:
    AdamWConfig cfg_;
    long step_count_ = 0;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
};

}  // namespace maelab
