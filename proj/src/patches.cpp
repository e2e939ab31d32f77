#include "maelab/patches.hpp"

#include <cmath>

#include "maelab/errors.hpp"

namespace maelab {

PatchGrid patchify(const Spectrogram& s, int patch_size) {
    if (patch_size <= 0) throw TensorError("patchify: patch_size must be positive");
    if (s.n_mels % patch_size != 0) {
        throw TensorError("patchify: n_mels " + std::to_string(s.n_mels) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    }
    if (s.n_frames < patch_size) {
        throw TensorError("patchify: spectrogram shorter than one patch");
    }

    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.rows = s.n_mels / patch_size;
    grid.cols = s.n_frames / patch_size;
    const int k = grid.patch_elems();
    grid.values.resize(static_cast<size_t>(grid.n_patches()) * k);
    grid.per_patch_mean.resize(grid.n_patches());
    grid.per_patch_var.resize(grid.n_patches());

    for (int pr = 0; pr < grid.rows; ++pr) {
        for (int pc = 0; pc < grid.cols; ++pc) {
            const int p = pr * grid.cols + pc;
            double* dst = grid.values.data() + static_cast<size_t>(p) * k;
            for (int i = 0; i < patch_size; ++i) {
                for (int j = 0; j < patch_size; ++j) {
                    dst[i * patch_size + j] =
                        static_cast<double>(s.at(pr * patch_size + i, pc * patch_size + j));
                }
            }
            double mean = 0.0;
            for (int e = 0; e < k; ++e) mean += dst[e];
            mean /= k;
            double var = 0.0;
            for (int e = 0; e < k; ++e) {
                const double d = dst[e] - mean;
                var += d * d;
            }
            var /= k;
            grid.per_patch_mean[p] = mean;
            grid.per_patch_var[p] = var;
        }
    }
    return grid;
}

Spectrogram reassemble(const PatchGrid& grid) {
    Spectrogram s;
    s.n_mels = grid.rows * grid.patch_size;
    s.n_frames = grid.cols * grid.patch_size;
    s.values.resize(static_cast<size_t>(s.n_mels) * s.n_frames);
    const int ps = grid.patch_size;
    for (int pr = 0; pr < grid.rows; ++pr) {
        for (int pc = 0; pc < grid.cols; ++pc) {
            const double* src = grid.patch(pr * grid.cols + pc);
            for (int i = 0; i < ps; ++i) {
                for (int j = 0; j < ps; ++j) {
                    s.at(pr * ps + i, pc * ps + j) = static_cast<float>(src[i * ps + j]);
                }
            }
        }
    }
    return s;
}

NormalizedPatch patch_normalize(const double* patch, int len, double eps) {
    if (len <= 0) throw TensorError("patch_normalize: empty patch");
    NormalizedPatch out;
    out.values.resize(len);
    double mean = 0.0;
    for (int i = 0; i < len; ++i) mean += patch[i];
    mean /= len;
    double var = 0.0;
    for (int i = 0; i < len; ++i) {
        const double d = patch[i] - mean;
        var += d * d;
    }
    var /= len;
    out.mean = mean;
    out.stddev = std::sqrt(var);
    const double denom = out.stddev + eps;
    for (int i = 0; i < len; ++i) out.values[i] = (patch[i] - mean) / denom;
    return out;
}

NormalizedPatch patch_normalize(const std::vector<double>& patch, double eps) {
    return patch_normalize(patch.data(), static_cast<int>(patch.size()), eps);
}

Tensor patches_to_tensor(const PatchGrid& grid) {
    return Tensor::from_values(grid.values, grid.n_patches(), grid.patch_elems());
}

}  // namespace maelab
