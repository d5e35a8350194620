#include "leakscan/leakage.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "leakscan/csv.hpp"
#include "leakscan/error.hpp"

namespace leakscan {

namespace {

const std::vector<std::string> kRecordColumns{"query_id", "best_match_id", "similarity", "degree",
                                              "label_agreement"};

LabelAgreement agreement(const ManifestRecord& query, const ManifestRecord& match) {
    if (!query.label || !match.label) return LabelAgreement::Unknown;
    return *query.label == *match.label ? LabelAgreement::Same : LabelAgreement::Different;
}

std::string format_ids(const std::vector<std::string>& ids) {
    constexpr std::size_t kShown = 10;
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < kShown; ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    if (ids.size() > kShown) out += fmt::format(" and {} more", ids.size() - kShown);
    return out;
}

}  // namespace

std::string_view to_string(Degree d) noexcept {
    switch (d) {
        case Degree::Hard: return "hard";
        case Degree::Soft: return "soft";
        case Degree::None: return "none";
    }
    return "none";
}

std::string_view to_string(LabelAgreement a) noexcept {
    switch (a) {
        case LabelAgreement::Same: return "same";
        case LabelAgreement::Different: return "different";
        case LabelAgreement::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(CoverageMode c) noexcept {
    return c == CoverageMode::Intra ? "intra" : "inter";
}

std::optional<Degree> parse_degree(std::string_view s) noexcept {
    if (s == "hard") return Degree::Hard;
    if (s == "soft") return Degree::Soft;
    if (s == "none") return Degree::None;
    return std::nullopt;
}

std::optional<LabelAgreement> parse_label_agreement(std::string_view s) noexcept {
    if (s == "same") return LabelAgreement::Same;
    if (s == "different") return LabelAgreement::Different;
    if (s == "unknown") return LabelAgreement::Unknown;
    return std::nullopt;
}

std::optional<CoverageMode> parse_coverage(std::string_view s) noexcept {
    if (s == "intra") return CoverageMode::Intra;
    if (s == "inter") return CoverageMode::Inter;
    return std::nullopt;
}

Degree classify_degree(float similarity, const ThresholdConfig& thresholds) {
    if (std::isnan(similarity)) fail(ErrorKind::InvalidInput, "similarity is NaN");
    if (similarity >= thresholds.tau_hard) return Degree::Hard;
    if (similarity >= thresholds.tau_soft) return Degree::Soft;
    return Degree::None;
}

Exclusion Exclusion::none() {
    Exclusion e;
    e.kind_ = Kind::None;
    return e;
}

Exclusion Exclusion::same_id() { return Exclusion{}; }

Exclusion Exclusion::canonical(std::unordered_map<std::string, std::string> canonical_ids) {
    Exclusion e;
    e.kind_ = Kind::Canonical;
    e.canonical_ = std::move(canonical_ids);
    return e;
}

Exclusion Exclusion::load_canonical_map(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> map;
    for (auto& row : csv::read_table(path, {"id", "canonical_id"})) {
        auto [it, inserted] = map.emplace(row[0], row[1]);
        if (!inserted && it->second != row[1]) {
            fail(ErrorKind::Schema, fmt::format("{}: id '{}' mapped to both '{}' and '{}'", path.string(),
                                                row[0], it->second, row[1]));
        }
    }
    return canonical(std::move(map));
}

bool Exclusion::excludes(const std::string& query_id, const std::string& match_id) const {
    switch (kind_) {
        case Kind::None: return false;
        case Kind::SameId: return query_id == match_id;
        case Kind::Canonical: {
            const auto q = canonical_.find(query_id);
            const auto m = canonical_.find(match_id);
            const std::string& qc = q == canonical_.end() ? query_id : q->second;
            const std::string& mc = m == canonical_.end() ? match_id : m->second;
            return qc == mc;
        }
    }
    return false;
}

std::vector<LeakageRecord> scan(const MatchSet& matches, const ThresholdConfig& thresholds,
                                const Exclusion& exclusion, const Manifest& query_manifest,
                                const Manifest& collection_manifest) {
    thresholds.validate();
    if (matches.size() != query_manifest.size()) {
        fail(ErrorKind::Schema, fmt::format("match set covers {} queries, manifest has {}", matches.size(),
                                            query_manifest.size()));
    }
    std::vector<LeakageRecord> records;
    records.reserve(matches.size());
    for (std::size_t q = 0; q < matches.size(); ++q) {
        const ManifestRecord& query = query_manifest[q];
        LeakageRecord rec;
        rec.query_id = query.id;
        rec.query_row = q;
        rec.exclusion_exhausted = true;
        for (const Match& m : matches[q]) {
            if (m.row >= collection_manifest.size()) {
                fail(ErrorKind::Schema, fmt::format("match row {} outside collection manifest of {} records",
                                                    m.row, collection_manifest.size()));
            }
            const ManifestRecord& row = collection_manifest[m.row];
            if (exclusion.excludes(query.id, row.id)) continue;
            // Lists are ranked, so the first survivor is the best one.
            rec.best_match_id = row.id;
            rec.best_similarity = m.similarity;
            rec.match_row = m.row;
            rec.degree = classify_degree(m.similarity, thresholds);
            rec.label_agreement = agreement(query, row);
            rec.exclusion_exhausted = false;
            break;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

LeakageReport rates(const std::vector<LeakageRecord>& records, const ThresholdConfig& thresholds,
                    CoverageMode coverage, std::string query_dataset, std::string collection_dataset) {
    if (records.empty()) fail(ErrorKind::EmptyEvaluation, "no leakage records: rates are undefined");
    LeakageReport report;
    report.n_queries = records.size();
    for (const auto& r : records) {
        if (r.degree == Degree::Hard) ++report.n_hard;
        if (r.degree == Degree::Soft) ++report.n_soft;
        if (r.exclusion_exhausted) ++report.n_exhausted;
    }
    const double n = static_cast<double>(report.n_queries);
    report.hard_rate = static_cast<double>(report.n_hard) / n;
    report.soft_rate = static_cast<double>(report.n_soft) / n;
    report.thresholds = thresholds;
    report.coverage = coverage;
    report.query_dataset = std::move(query_dataset);
    report.collection_dataset = std::move(collection_dataset);
    return report;
}

LabelPartition label_agreement_partition(const std::vector<LeakageRecord>& records,
                                         std::optional<Degree> degree) {
    LabelPartition out;
    std::vector<std::string> unknown;
    for (const auto& r : records) {
        const bool selected = degree ? r.degree == *degree : r.degree != Degree::None;
        if (!selected) continue;
        switch (r.label_agreement) {
            case LabelAgreement::Same: out.same.push_back(r.query_id); break;
            case LabelAgreement::Different: out.different.push_back(r.query_id); break;
            case LabelAgreement::Unknown: unknown.push_back(r.query_id); break;
        }
    }
    if (!unknown.empty()) {
        fail(ErrorKind::UnknownLabel,
             fmt::format("{} leaked records lack labels: {}", unknown.size(), format_ids(unknown)));
    }
    return out;
}

void write_records_csv(const std::vector<LeakageRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    csv::write_row(out, kRecordColumns);
    for (const auto& r : records) {
        csv::write_row(out, {r.query_id, r.best_match_id,
                             r.exclusion_exhausted ? std::string() : fmt::format("{:.6f}", r.best_similarity),
                             std::string(to_string(r.degree)), std::string(to_string(r.label_agreement))});
    }
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

std::vector<LeakageRecord> read_records_csv(const std::filesystem::path& path) {
    std::vector<LeakageRecord> records;
    const auto rows = csv::read_table(path, kRecordColumns);
    records.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        LeakageRecord r;
        r.query_id = row[0];
        r.best_match_id = row[1];
        r.query_row = i;
        const auto degree = parse_degree(row[3]);
        const auto agree = parse_label_agreement(row[4]);
        if (!degree || !agree) {
            fail(ErrorKind::Format, fmt::format("{}: record {} has an unknown degree or label agreement",
                                                path.string(), i + 1));
        }
        r.degree = *degree;
        r.label_agreement = *agree;
        if (row[2].empty()) {
            r.exclusion_exhausted = true;
        } else {
            try {
                std::size_t used = 0;
                r.best_similarity = std::stof(row[2], &used);
                if (used != row[2].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                fail(ErrorKind::Format, fmt::format("{}: record {} has a malformed similarity '{}'",
                                                    path.string(), i + 1, row[2]));
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace leakscan
