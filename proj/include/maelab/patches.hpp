#pragma once

#include <vector>

#include "maelab/spectrogram.hpp"
#include "maelab/tensor.hpp"

namespace maelab {

// Non-overlapping 16x16 tiling of a spectrogram with per-patch
// statistics. Patch ordering is row-major over (frequency block, time
// block) with frequency varying slowest; within a patch, values are
// row-major with the mel band varying slowest. Positional embeddings
// index patches in exactly this order.
struct PatchGrid {
    int patch_size = 16;
    int rows = 0;  // n_mels / patch_size
    int cols = 0;  // floor(n_frames / patch_size)
    std::vector<double> values;  // n_patches() * patch_size^2, patch-major
    std::vector<double> per_patch_mean;
    std::vector<double> per_patch_var;  // population variance, divisor K

    int n_patches() const { return rows * cols; }
    int patch_elems() const { return patch_size * patch_size; }
    const double* patch(int p) const {
        return values.data() + static_cast<size_t>(p) * patch_elems();
    }
};

// Trailing frames that do not fill a whole patch column are dropped.
// Throws if n_mels is not divisible by patch_size or the spectrogram is
// shorter than one patch.
PatchGrid patchify(const Spectrogram& s, int patch_size = 16);

// Inverse of patchify over the cropped region, bit-exact.
Spectrogram reassemble(const PatchGrid& grid);

struct NormalizedPatch {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation of the input
};

// (x - mean) / (stddev + eps); the returned statistics allow
// de-normalising reconstructions. Constant patches map to zeros.
NormalizedPatch patch_normalize(const std::vector<double>& patch, double eps = 1e-6);
NormalizedPatch patch_normalize(const double* patch, int len, double eps = 1e-6);

// All patches as a [n_patches, patch_size^2] tensor (no gradient).
Tensor patches_to_tensor(const PatchGrid& grid);

}  // namespace maelab
