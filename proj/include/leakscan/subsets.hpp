#pragma once

// Evaluation subsets of a benchmark split by leakage verdict, and metrics
// aggregated over them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakscan/leakage.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

enum class SubsetKind {
    Original,
    Leaked,
    NonLeaked,
    // NonLeaked sampled down to the Leaked size; only when requested.
    NonLeakedSample,
    Random,
    SameLabel,
    DifferentLabel,
};

// File-name slug: original, leaked, nonleaked, nonleaked-sample, random,
// same-label, different-label.
std::string_view slug(SubsetKind kind) noexcept;
std::optional<SubsetKind> parse_subset_kind(std::string_view slug) noexcept;

struct SubsetSpec {
    SubsetKind kind = SubsetKind::Original;
    Degree degree = Degree::Hard;
    std::vector<std::string> ids;  // benchmark manifest order
    std::optional<std::uint64_t> seed;  // sampled subsets only
    std::size_t parent_size = 0;

    std::size_t size() const noexcept { return ids.size(); }
    // "Original", "LeakedHard", "NonLeakedSoft", "RandomHard", ...
    std::string name() const;
};

struct SubsetOptions {
    bool size_matched_nonleaked = false;
};

struct SubsetBuild {
    std::vector<SubsetSpec> subsets;
    std::vector<std::string> warnings;
};

// Original, Leaked, NonLeaked and Random (|Random| = |Leaked|, drawn from
// Original) for one degree, plus SameLabel/DifferentLabel refinements of
// Leaked when every leaked record has a known label agreement. Records must
// cover every benchmark id (Error(Coverage)); degree must be Hard or Soft
// (Error(Parameter)).
SubsetBuild build_subsets(const Manifest& benchmark, const std::vector<LeakageRecord>& records, Degree degree,
                          std::uint64_t seed, const SubsetOptions& options = {});

// "<benchmark>.<degree>.<slug>.ids", one id per line.
std::filesystem::path subset_file_name(const std::string& benchmark, const SubsetSpec& subset);
std::vector<std::filesystem::path> write_subset_files(const std::vector<SubsetSpec>& subsets,
                                                      const std::string& benchmark,
                                                      const std::filesystem::path& directory);
std::vector<std::string> read_id_list(const std::filesystem::path& path);

struct SubsetMetric {
    std::string subset;
    std::string metric;  // "accuracy", "R@1", "R@5", "R@10"
    std::size_t size = 0;
    double value = 0.0;  // percent
    double gain = 0.0;   // value minus the Original value
    std::size_t trials = 1;
    std::optional<double> stddev;  // present iff trials > 1
    // Subset smaller than the per-trial query count: every trial used all ids.
    bool full_inclusion = false;
};

struct SubsetMetrics {
    std::vector<SubsetMetric> rows;
    std::vector<std::string> warnings;
};

// Accuracy over each subset from per-id correctness. The subset list must
// contain Original. Empty subsets are skipped with a warning. Missing ids
// raise Error(Coverage) listing them.
SubsetMetrics subset_metrics(const std::unordered_map<std::string, bool>& correct,
                             const std::vector<SubsetSpec>& subsets);

struct RepeatedTrialConfig {
    std::size_t caption_collection_size = 0;  // ranks must lie in [1, size]
    std::size_t trials = 10;
    std::size_t per_trial_queries = 200;
    std::uint64_t seed = 0;
    std::vector<std::size_t> ks{1, 5, 10};
};

// Per subset and k: mean and sample standard deviation (n - 1 denominator)
// of R@k over trials, each trial drawing per_trial_queries ids without
// replacement. The stream for a trial depends only on (seed, subset name,
// trial). Throws Error(Parameter) when trials < 1.
SubsetMetrics repeated_retrieval_eval(const std::vector<SubsetSpec>& subsets,
                                      const std::unordered_map<std::string, std::size_t>& rank_of_true_caption,
                                      const RepeatedTrialConfig& config);

// CSV query_id,predicted_label -> correctness against the manifest labels.
std::unordered_map<std::string, bool> read_classification_predictions(const std::filesystem::path& path,
                                                                      const Manifest& benchmark);
// CSV query_id,rank_of_true_caption (1-based).
std::unordered_map<std::string, std::size_t> read_caption_ranks(const std::filesystem::path& path);

// Two-decimal display used in tables.
std::string format_percent(double value);

// metrics.csv (two-decimal display) and metrics.json (full precision).
void write_metrics(const SubsetMetrics& metrics, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path);

}  // namespace leakscan
