#pragma once

// Declarative audit plan, read from YAML. Relative paths resolve against the
// plan file's directory. Every source of randomness derives from `seed`.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscan/leakage.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

enum class StoreRole { Pretraining, Training, Benchmark };

std::string_view to_string(StoreRole role) noexcept;

struct StoreRef {
    std::string name;
    std::string path_text;           // as written in the plan
    std::filesystem::path path;      // resolved
    StoreRole role = StoreRole::Training;
};

struct PairSpec {
    std::string query;
    std::string collection;
    CoverageMode coverage = CoverageMode::Inter;
    // "same-id" (default), "none", or a canonical-id map CSV.
    std::string exclusion = "same-id";
    std::optional<std::filesystem::path> canonical_map;
};

struct RocSpec {
    std::optional<std::filesystem::path> pairs_csv;  // similarity,is_true_match
    std::optional<std::string> queries;              // or all pairs of two stores
    std::optional<std::string> collection;
    std::optional<std::filesystem::path> ground_truth;  // default: same id
    std::vector<float> thresholds;                    // default: every observed value
};

struct RobustnessSpec {
    std::string collection;
    std::map<std::string, std::string> queries;  // transformation -> store
    std::optional<std::filesystem::path> ground_truth;
};

struct SubsetsSpec {
    std::string benchmark;
    std::optional<std::filesystem::path> records;  // default: scan the benchmark's pairs
    std::vector<Degree> degrees{Degree::Hard, Degree::Soft};
    bool size_matched_nonleaked = false;
};

struct MetricsSpec {
    std::optional<std::filesystem::path> classification;  // query_id,predicted_label
    std::optional<std::filesystem::path> ranks;           // query_id,rank_of_true_caption
    std::size_t caption_collection_size = 0;
    std::size_t trials = 10;
    std::size_t per_trial_queries = 200;
};

struct AuditPlan {
    std::filesystem::path base_dir;
    std::vector<StoreRef> stores;
    std::vector<PairSpec> pairs;
    ThresholdConfig thresholds;
    std::size_t k = kDefaultScanK;
    std::size_t partition_size = 1'000'000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> threads;
    std::optional<RocSpec> roc;
    std::optional<RobustnessSpec> robustness;
    std::optional<SubsetsSpec> subsets;
    std::optional<MetricsSpec> metrics;

    const StoreRef& store(const std::string& name) const;  // Error(UnknownStore)
};

// Command-line values that take precedence over the plan file.
struct PlanOverrides {
    std::optional<float> tau_soft;
    std::optional<float> tau_hard;
};

// Parses, applies overrides and validates. Throws Error(Validation) for
// malformed or inconsistent plans and Error(UnknownStore) for references to
// undeclared stores. No store data is read.
AuditPlan load_plan(const std::filesystem::path& path, const PlanOverrides& overrides = {});
AuditPlan parse_plan(const std::string& yaml_text, const std::filesystem::path& base_dir,
                     const PlanOverrides& overrides = {});

void validate(const AuditPlan& plan);

// Canonical JSON echo of the plan (no thread count, paths as written).
nlohmann::ordered_json plan_json(const AuditPlan& plan);

}  // namespace leakscan
