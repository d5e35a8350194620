#pragma once

// Per-query leakage verdicts and aggregate hard/soft rates.
//
// A query's verdict uses the best match that survives the exclusion
// predicate: Hard when s >= tau_hard, Soft when tau_soft <= s < tau_hard,
// None otherwise. Rates count leaked queries, not leaked pairs.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "leakscan/retrieval.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

enum class Degree { Hard, Soft, None };
enum class LabelAgreement { Same, Different, Unknown };
enum class CoverageMode { Intra, Inter };

std::string_view to_string(Degree d) noexcept;
std::string_view to_string(LabelAgreement a) noexcept;
std::string_view to_string(CoverageMode c) noexcept;
std::optional<Degree> parse_degree(std::string_view s) noexcept;
std::optional<LabelAgreement> parse_label_agreement(std::string_view s) noexcept;
std::optional<CoverageMode> parse_coverage(std::string_view s) noexcept;

// Throws Error(InvalidInput) on NaN.
Degree classify_degree(float similarity, const ThresholdConfig& thresholds);

struct LeakageRecord {
    std::string query_id;
    std::string best_match_id;  // empty when exclusion_exhausted
    float best_similarity = 0.0f;
    Degree degree = Degree::None;
    LabelAgreement label_agreement = LabelAgreement::Unknown;
    // Every retrieved match was excluded; degree is None.
    bool exclusion_exhausted = false;
    // Manifest rows; match_row is meaningless when exclusion_exhausted.
    std::size_t query_row = 0;
    std::size_t match_row = 0;

    bool operator==(const LeakageRecord&) const = default;
};

// Decides which (query id, match id) pairs are not evidence of leakage.
class Exclusion {
public:
    static Exclusion none();
    // A query never matches a row carrying its own id.
    static Exclusion same_id();
    // Ids with equal canonical ids are the same image; unmapped ids are
    // their own canonical id.
    static Exclusion canonical(std::unordered_map<std::string, std::string> canonical_ids);
    // CSV with header "id,canonical_id".
    static Exclusion load_canonical_map(const std::filesystem::path& path);

    bool excludes(const std::string& query_id, const std::string& match_id) const;

private:
    enum class Kind { None, SameId, Canonical };
    Kind kind_ = Kind::SameId;
    std::unordered_map<std::string, std::string> canonical_;
};

inline constexpr std::size_t kDefaultScanK = 5;

// One record per query, in query order. matches[i] must hold the ranked
// collection rows of query_manifest[i].
std::vector<LeakageRecord> scan(const MatchSet& matches, const ThresholdConfig& thresholds,
                                const Exclusion& exclusion, const Manifest& query_manifest,
                                const Manifest& collection_manifest);

struct LeakageReport {
    std::size_t n_queries = 0;
    std::size_t n_hard = 0;
    std::size_t n_soft = 0;
    std::size_t n_exhausted = 0;
    double hard_rate = 0.0;  // fraction in [0, 1]
    double soft_rate = 0.0;
    ThresholdConfig thresholds;
    CoverageMode coverage = CoverageMode::Inter;
    std::string query_dataset;
    std::string collection_dataset;
};

// Throws Error(EmptyEvaluation) on an empty record list. Degrees are taken
// from the records as classified by scan under `thresholds`.
LeakageReport rates(const std::vector<LeakageRecord>& records, const ThresholdConfig& thresholds,
                    CoverageMode coverage, std::string query_dataset, std::string collection_dataset);

struct LabelPartition {
    std::vector<std::string> same;
    std::vector<std::string> different;
};

// Splits leaked records (degree == `degree`, or any leaked degree when
// nullopt) by label agreement. Throws Error(UnknownLabel) naming the records
// whose agreement is Unknown.
LabelPartition label_agreement_partition(const std::vector<LeakageRecord>& records,
                                         std::optional<Degree> degree = std::nullopt);

// CSV: query_id,best_match_id,similarity,degree,label_agreement. The
// similarity column is empty for exclusion-exhausted records.
void write_records_csv(const std::vector<LeakageRecord>& records, const std::filesystem::path& path);
std::vector<LeakageRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace leakscan
