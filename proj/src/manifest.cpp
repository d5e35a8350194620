#include <fstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "leakscan/error.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line,
                            const std::filesystem::path& path) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        fail(ErrorKind::Schema, fmt::format("{}:{}: field '{}' must be a string", path.string(), line, key));
    }
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key,
                                           std::size_t line, const std::filesystem::path& path) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        fail(ErrorKind::Schema, fmt::format("{}:{}: field '{}' must be a string or null", path.string(), line, key));
    }
    return it->get<std::string>();
}

ordered_json nullable(const std::optional<std::string>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

Manifest::Manifest(std::vector<ManifestRecord> records) : records_(std::move(records)) {
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (!index_.emplace(records_[i].id, i).second) {
            fail(ErrorKind::Schema, fmt::format("duplicate manifest id '{}' at record {}", records_[i].id, i));
        }
    }
}

std::optional<std::size_t> Manifest::find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Manifest::has_labels() const {
    for (const auto& r : records_) {
        if (r.label) return true;
    }
    return false;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    for (const auto& r : manifest.records()) {
        ordered_json line;
        line["id"] = r.id;
        line["path"] = r.path;
        line["label"] = nullable(r.label);
        line["caption"] = nullable(r.caption);
        line["split"] = r.split;
        line["dataset"] = r.dataset;
        if (r.provenance) line["provenance"] = *r.provenance;
        out << line.dump() << '\n';
    }
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Storage, fmt::format("{}: cannot open manifest", path.string()));
    std::vector<ManifestRecord> records;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::Format, fmt::format("{}:{}: {}", path.string(), line, e.what()));
        }
        if (!obj.is_object()) fail(ErrorKind::Format, fmt::format("{}:{}: expected a JSON object", path.string(), line));
        ManifestRecord r;
        r.id = required_string(obj, "id", line, path);
        r.path = required_string(obj, "path", line, path);
        r.label = optional_string(obj, "label", line, path);
        r.caption = optional_string(obj, "caption", line, path);
        r.split = required_string(obj, "split", line, path);
        r.dataset = required_string(obj, "dataset", line, path);
        r.provenance = optional_string(obj, "provenance", line, path);
        records.push_back(std::move(r));
    }
    return Manifest(std::move(records));
}

}  // namespace leakscan
