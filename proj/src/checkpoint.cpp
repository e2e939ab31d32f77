#include "maelab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace maelab {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
    uint64_t v = std::bit_cast<uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("checkpoint: truncated ") + what);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw FormatError(std::string("checkpoint: truncated ") + what);
    }
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open '" + path.string() + "' for writing");
    os.write("TGCK", 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<uint32_t>(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        const Tensor& t = params.tensor(i);
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, 2);
        put_u32(os, static_cast<uint32_t>(t.rows()));
        put_u32(os, static_cast<uint32_t>(t.cols()));
        for (double v : *t.data) put_f64(os, v);
    }
    if (!os) throw FormatError("checkpoint: write failed for '" + path.string() + "'");
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TGCK", 4) != 0) {
        throw FormatError("checkpoint: bad magic in '" + path.string() + "'");
    }
    uint32_t version = get_u32(is, "version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    uint32_t count = get_u32(is, "count");
    std::vector<std::pair<std::string, Tensor>> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = get_u32(is, "name length");
        if (name_len > (1u << 20)) throw FormatError("checkpoint: name length overflow");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw FormatError("checkpoint: truncated name");
        uint32_t rank = get_u32(is, "rank");
        if (rank != 2) throw FormatError("checkpoint: unsupported rank " + std::to_string(rank));
        uint32_t rows = get_u32(is, "extent");
        uint32_t cols = get_u32(is, "extent");
        if (rows == 0 || cols == 0 ||
            static_cast<uint64_t>(rows) * cols > (1ull << 32)) {
            throw FormatError("checkpoint: extent overflow in '" + name + "'");
        }
        std::vector<double> values(static_cast<size_t>(rows) * cols);
        for (double& v : values) v = get_f64(is, "values");
        entries.emplace_back(std::move(name),
                             Tensor::from_values(std::move(values), static_cast<int>(rows),
                                                 static_cast<int>(cols)));
    }
    return entries;
}

size_t load_checkpoint(ParamSet& params, const std::filesystem::path& path,
                       const std::string& prefix) {
    auto entries = read_checkpoint(path);
    size_t loaded = 0;
    for (auto& [name, tensor] : entries) {
        if (name.rfind(prefix, 0) != 0) continue;
        if (!params.contains(name)) {
            throw FormatError("checkpoint: '" + name + "' not present in target parameters");
        }
        Tensor& dst = params.at(name);
        if (dst.shape != tensor.shape) {
            throw FormatError("checkpoint: shape mismatch for '" + name + "'");
        }
        *dst.data = *tensor.data;
        ++loaded;
    }
    if (loaded == 0) {
        throw FormatError("checkpoint: no entries matching prefix '" + prefix + "' in '" +
                          path.string() + "'");
    }
    return loaded;
}

}  // namespace maelab
