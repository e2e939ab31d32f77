#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maelab {

enum class MaskStrategy { random, content_aware };

std::string to_string(MaskStrategy s);
MaskStrategy mask_strategy_from_string(const std::string& s);

// Exact partition of patch indices into masked and visible sets.
struct MaskPlan {
    int n_total = 0;
    std::vector<int> masked;   // sorted ascending
    std::vector<int> visible;  // sorted ascending, complement of masked
    MaskStrategy strategy = MaskStrategy::random;
    uint64_t seed = 0;
};

// floor(ratio * n_total) clamped to [1, n_total - 1] so at least one
// patch stays on each side. Requires n_total >= 2 and ratio in (0, 1).
int mask_count(int n_total, double ratio);

// Uniform sample without replacement of mask_count indices.
MaskPlan random_mask(int n_total, double ratio, uint64_t seed);

// High-saliency candidate pool: the ceil(max(high_share * n_masked,
// 0.5 * n_total)) indices of highest variance, ties broken by lower
// index first. Returned ascending.
std::vector<int> saliency_pool(const std::vector<double>& variances, int n_masked, int n_total,
                               double high_share = 0.7);

// Hybrid plan: floor(high_share * n_masked) indices sampled uniformly
// from the saliency pool, the remainder sampled uniformly from indices
// outside the pool. If the outside set is too small for the remainder
// (possible at extreme ratios since pool size rounds up and the quota
// rounds down), the overflow is drawn from the unused pool indices.
MaskPlan content_aware_mask(const std::vector<double>& variances, double ratio, uint64_t seed,
                            double high_share = 0.7);

// One JSON line {"sample_id", "strategy", "seed", "masked"} for audit logs.
std::string mask_plan_json(const MaskPlan& plan, const std::string& sample_id);

}  // namespace maelab
