#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace maelab {

// Log-mel magnitude raster. Values are log-decibel floats stored
// row-major with the mel band varying slowest, matching the SPGM
// on-disk layout so write/read round-trips are bit-exact.
struct Spectrogram {
    int n_mels = 0;
    int n_frames = 0;
    std::vector<float> values;  // n_mels * n_frames
    std::string id;

    float at(int mel, int frame) const {
        return values[static_cast<size_t>(mel) * n_frames + frame];
    }
    float& at(int mel, int frame) {
        return values[static_cast<size_t>(mel) * n_frames + frame];
    }
};

// SPGM container: magic "SPGM", version u32 = 1, n_mels u32, n_frames
// u32, then n_mels * n_frames f32 little-endian, mel band slowest.
inline constexpr uint32_t kSpgmVersion = 1;

Spectrogram read_spectrogram(const std::filesystem::path& path);
void write_spectrogram(const Spectrogram& s, const std::filesystem::path& path);

// Center-crop when longer than target, right-pad with the spectrogram's
// minimum value (silence floor) when shorter.
Spectrogram crop_or_pad(const Spectrogram& s, int target_frames);

}  // namespace maelab
