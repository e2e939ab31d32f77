#include "maelab/dataset.hpp"

namespace maelab {

std::vector<LabeledSample> load_samples(const std::vector<Record>& records,
                                        const std::filesystem::path& manifest_dir,
                                        int target_frames, int patch_size) {
    std::vector<LabeledSample> samples;
    samples.reserve(records.size());
    for (const Record& r : records) {
        LabeledSample s;
        s.record_id = r.record_id;
        s.participant_id = r.participant_id;
        s.labels = r.labels;
        s.static_features = r.static_features;
        Spectrogram spec = read_spectrogram(resolve_record_path(manifest_dir, r));
        s.patches = patchify(crop_or_pad(spec, target_frames), patch_size);
        s.patch_tensor = patches_to_tensor(s.patches);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace maelab
