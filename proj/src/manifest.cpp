#include "maelab/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "maelab/errors.hpp"

namespace maelab {

using nlohmann::json;

std::vector<Record> read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("manifest: cannot open '" + path.string() + "'");

    std::vector<Record> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError("manifest: bad JSON at line " + std::to_string(line_no) + ": " +
                              e.what());
        }
        Record r;
        try {
            r.record_id = j.at("record_id").get<std::string>();
            r.participant_id = j.at("participant_id").get<std::string>();
            r.path = j.at("path").get<std::string>();
            const auto& labels = j.at("labels");
            if (labels.size() != kNumLabels) {
                throw FormatError("manifest: expected " + std::to_string(kNumLabels) +
                                  " labels in record '" + r.record_id + "'");
            }
            for (int k = 0; k < kNumLabels; ++k) r.labels[k] = labels[k].get<bool>();
            r.static_features = j.at("static").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw FormatError("manifest: malformed record at line " + std::to_string(line_no) +
                              ": " + e.what());
        }
        if (r.static_features.size() != kStaticDim) {
            throw FormatError("manifest: record '" + r.record_id + "' has " +
                              std::to_string(r.static_features.size()) +
                              " static features, expected " + std::to_string(kStaticDim));
        }
        if (!seen_ids.insert(r.record_id).second) {
            throw FormatError("manifest: duplicate record_id '" + r.record_id + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void write_manifest(const std::vector<Record>& records, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("manifest: cannot open '" + path.string() + "' for writing");
    for (const Record& r : records) {
        json j;
        j["record_id"] = r.record_id;
        j["participant_id"] = r.participant_id;
        j["path"] = r.path;
        j["labels"] = r.labels;
        j["static"] = r.static_features;
        os << j.dump() << '\n';
    }
    if (!os) throw FormatError("manifest: write failed for '" + path.string() + "'");
}

std::filesystem::path resolve_record_path(const std::filesystem::path& manifest_dir,
                                          const Record& record) {
    std::filesystem::path p(record.path);
    return p.is_absolute() ? p : manifest_dir / p;
}

}  // namespace maelab
