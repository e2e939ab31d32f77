#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maelab/labels.hpp"

namespace maelab {

// One corpus recording. `path` is relative to the manifest's directory
// so a corpus can be moved as a unit without rewriting the manifest.
struct Record {
    std::string record_id;
    std::string participant_id;
    std::string path;
    LabelSet labels{};
    std::vector<double> static_features;  // kStaticDim entries
};

// JSON Lines, one record per line:
// {"record_id": str, "participant_id": str, "path": str,
//  "labels": [bool x4], "static": [real x131]}
std::vector<Record> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<Record>& records, const std::filesystem::path& path);

std::filesystem::path resolve_record_path(const std::filesystem::path& manifest_dir,
                                          const Record& record);

}  // namespace maelab
