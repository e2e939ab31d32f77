#include "maelab/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maelab/errors.hpp"
#include "maelab/rng.hpp"

namespace maelab {

std::string to_string(MaskStrategy s) {
    return s == MaskStrategy::random ? "random" : "content_aware";
}

MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "random") return MaskStrategy::random;
    if (s == "content_aware") return MaskStrategy::content_aware;
    throw ConfigError("unknown mask strategy '" + s + "'");
}

int mask_count(int n_total, double ratio) {
    if (n_total < 2) throw TensorError("mask_count: need at least 2 patches");
    if (!(ratio > 0.0 && ratio < 1.0)) throw TensorError("mask_count: ratio must be in (0, 1)");
    int count = static_cast<int>(std::floor(ratio * n_total));
    return std::clamp(count, 1, n_total - 1);
}

namespace {

MaskPlan finalize_plan(int n_total, std::vector<int> masked, MaskStrategy strategy,
                       uint64_t seed) {
    std::sort(masked.begin(), masked.end());
    MaskPlan plan;
    plan.n_total = n_total;
    plan.strategy = strategy;
    plan.seed = seed;
    plan.masked = std::move(masked);
    plan.visible.reserve(n_total - plan.masked.size());
    size_t m = 0;
    for (int i = 0; i < n_total; ++i) {
        if (m < plan.masked.size() && plan.masked[m] == i) {
            ++m;
        } else {
            plan.visible.push_back(i);
        }
    }
    return plan;
}

}  // namespace

MaskPlan random_mask(int n_total, double ratio, uint64_t seed) {
    const int n_masked = mask_count(n_total, ratio);
    Rng rng(seed);
    std::vector<int> all(n_total);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> masked = rng.sample_without_replacement(std::move(all), n_masked);
    return finalize_plan(n_total, std::move(masked), MaskStrategy::random, seed);
}

std::vector<int> saliency_pool(const std::vector<double>& variances, int n_masked, int n_total,
                               double high_share) {
    if (static_cast<int>(variances.size()) != n_total) {
        throw TensorError("saliency_pool: variance count " + std::to_string(variances.size()) +
                          " != n_total " + std::to_string(n_total));
    }
    const int pool_size = static_cast<int>(
        std::ceil(std::max(high_share * n_masked, 0.5 * n_total)));
    std::vector<int> order(n_total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (variances[a] != variances[b]) return variances[a] > variances[b];
        return a < b;
    });
    order.resize(std::min(pool_size, n_total));
    std::sort(order.begin(), order.end());
    return order;
}

MaskPlan content_aware_mask(const std::vector<double>& variances, double ratio, uint64_t seed,
                            double high_share) {
    const int n_total = static_cast<int>(variances.size());
    const int n_masked = mask_count(n_total, ratio);
    const std::vector<int> pool = saliency_pool(variances, n_masked, n_total, high_share);

    std::vector<int> outside;
    outside.reserve(n_total - pool.size());
    size_t p = 0;
    for (int i = 0; i < n_total; ++i) {
        if (p < pool.size() && pool[p] == i) {
            ++p;
        } else {
            outside.push_back(i);
        }
    }

    // Quota rounds down while the pool rounds up, so the pool always
    // covers its share of the quota.
    const int high_quota = static_cast<int>(std::floor(high_share * n_masked));
    const int remainder = n_masked - high_quota;

    Rng rng(seed);
    std::vector<int> masked = rng.sample_without_replacement(pool, high_quota);

    if (remainder <= static_cast<int>(outside.size())) {
        std::vector<int> low = rng.sample_without_replacement(std::move(outside), remainder);
        masked.insert(masked.end(), low.begin(), low.end());
    } else {
        // Outside set exhausted: take all of it and overflow into pool
        // indices not already masked.
        masked.insert(masked.end(), outside.begin(), outside.end());
        const int overflow = remainder - static_cast<int>(outside.size());
        std::vector<int> taken = masked;
        std::sort(taken.begin(), taken.end());
        std::vector<int> unused;
        for (int idx : pool) {
            if (!std::binary_search(taken.begin(), taken.end(), idx)) unused.push_back(idx);
        }
        std::vector<int> extra = rng.sample_without_replacement(std::move(unused), overflow);
        masked.insert(masked.end(), extra.begin(), extra.end());
    }
    return finalize_plan(n_total, std::move(masked), MaskStrategy::content_aware, seed);
}

std::string mask_plan_json(const MaskPlan& plan, const std::string& sample_id) {
    std::string out = "{\"sample_id\":\"" + sample_id + "\",\"strategy\":\"" +
                      to_string(plan.strategy) + "\",\"seed\":" + std::to_string(plan.seed) +
                      ",\"masked\":[";
    for (size_t i = 0; i < plan.masked.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(plan.masked[i]);
    }
    out += "]}";
    return out;
}

}  // namespace maelab
