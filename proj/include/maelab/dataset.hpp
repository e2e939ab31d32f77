#pragma once

#include <filesystem>
#include <vector>

#include "maelab/manifest.hpp"
#include "maelab/patches.hpp"

namespace maelab {

// A manifest record with its spectrogram loaded, length-normalised and
// patchified, ready for training loops.
struct LabeledSample {
    std::string record_id;
    std::string participant_id;
    LabelSet labels{};
    std::vector<double> static_features;
    PatchGrid patches;
    Tensor patch_tensor;  // [n_patches, patch_size^2], constant
};

std::vector<LabeledSample> load_samples(const std::vector<Record>& records,
                                        const std::filesystem::path& manifest_dir,
                                        int target_frames, int patch_size);

}  // namespace maelab
