#include "maelab/spectrogram.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "maelab/errors.hpp"

namespace maelab {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("spgm: truncated ") + what);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

Spectrogram read_spectrogram(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("spgm: cannot open '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SPGM", 4) != 0) {
        throw FormatError("spgm: bad magic in '" + path.string() + "'");
    }
    uint32_t version = get_u32(is, "version");
    if (version != kSpgmVersion) {
        throw FormatError("spgm: unsupported version " + std::to_string(version));
    }
    uint32_t n_mels = get_u32(is, "n_mels");
    uint32_t n_frames = get_u32(is, "n_frames");
    if (n_mels == 0 || n_frames == 0 ||
        static_cast<uint64_t>(n_mels) * n_frames > (1ull << 30)) {
        throw FormatError("spgm: extent overflow " + std::to_string(n_mels) + "x" +
                          std::to_string(n_frames));
    }
    Spectrogram s;
    s.n_mels = static_cast<int>(n_mels);
    s.n_frames = static_cast<int>(n_frames);
    s.values.resize(static_cast<size_t>(n_mels) * n_frames);
    for (float& v : s.values) {
        unsigned char b[4];
        if (!is.read(reinterpret_cast<char*>(b), 4)) {
            throw FormatError("spgm: truncated payload in '" + path.string() + "'");
        }
        uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
        v = std::bit_cast<float>(bits);
    }
    s.id = path.stem().string();
    return s;
}

void write_spectrogram(const Spectrogram& s, const std::filesystem::path& path) {
    if (s.values.size() != static_cast<size_t>(s.n_mels) * s.n_frames) {
        throw FormatError("spgm: value count does not match extents");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("spgm: cannot open '" + path.string() + "' for writing");
    os.write("SPGM", 4);
    put_u32(os, kSpgmVersion);
    put_u32(os, static_cast<uint32_t>(s.n_mels));
    put_u32(os, static_cast<uint32_t>(s.n_frames));
    for (float v : s.values) {
        uint32_t bits = std::bit_cast<uint32_t>(v);
        unsigned char b[4] = {static_cast<unsigned char>(bits),
                              static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16),
                              static_cast<unsigned char>(bits >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!os) throw FormatError("spgm: write failed for '" + path.string() + "'");
}

Spectrogram crop_or_pad(const Spectrogram& s, int target_frames) {
    if (target_frames <= 0) throw FormatError("crop_or_pad: target_frames must be positive");
    if (s.n_frames == target_frames) return s;

    Spectrogram out;
    out.n_mels = s.n_mels;
    out.n_frames = target_frames;
    out.id = s.id;
    out.values.resize(static_cast<size_t>(s.n_mels) * target_frames);

    if (s.n_frames > target_frames) {
        const int start = (s.n_frames - target_frames) / 2;
        for (int m = 0; m < s.n_mels; ++m) {
            for (int f = 0; f < target_frames; ++f) out.at(m, f) = s.at(m, start + f);
        }
    } else {
        const float floor = *std::min_element(s.values.begin(), s.values.end());
        for (int m = 0; m < s.n_mels; ++m) {
            for (int f = 0; f < target_frames; ++f) {
                out.at(m, f) = f < s.n_frames ? s.at(m, f) : floor;
            }
        }
    }
    return out;
}

}  // namespace maelab
