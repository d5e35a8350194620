#pragma once

// Detector quality: recall at k under query transformations and empirical
// ROC / AUC over labeled similarity pairs.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakscan/retrieval.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

// query id -> id of the collection row that is its true original.
using GroundTruth = std::unordered_map<std::string, std::string>;

// Fraction of queries whose true original is within the first k matches.
// Throws Error(Schema) if a query has no ground-truth entry and
// Error(InvalidInput) if a query has no matches.
double recall_at_k(const MatchSet& matches, const Manifest& query_manifest, const Manifest& collection_manifest,
                   const GroundTruth& truth, std::size_t k);

inline double recall_at_1(const MatchSet& matches, const Manifest& query_manifest,
                          const Manifest& collection_manifest, const GroundTruth& truth) {
    return recall_at_k(matches, query_manifest, collection_manifest, truth, 1);
}

// Ground truth pairing each query with the collection record of the same id.
// Queries without a namesake are left out.
GroundTruth same_id_truth(const Manifest& query_manifest, const Manifest& collection_manifest);

// CSV with header "query_id,collection_id".
GroundTruth read_ground_truth(const std::filesystem::path& path);

struct LabeledPair {
    float similarity = 0.0f;
    bool is_true_match = false;
};

struct RocPoint {
    float threshold = 0.0f;
    double tpr = 0.0;
    double fpr = 0.0;

    bool operator==(const RocPoint&) const = default;
};

// Points ordered by strictly decreasing threshold. A pair counts as detected
// at threshold t when similarity >= t.
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// With no thresholds the sweep is every distinct observed similarity.
// Throws Error(DegenerateSet) without positives or negatives and
// Error(InvalidInput) on non-finite similarities or thresholds.
RocCurve roc_curve(const std::vector<LabeledPair>& pairs, std::vector<float> thresholds = {});

// Trapezoidal area over the curve's points plus the (0,0) and (1,1)
// anchors. Throws Error(InvalidCurve) if thresholds do not strictly decrease,
// rates leave [0,1], or either rate decreases along the sweep.
double auc(const RocCurve& curve);

struct OperatingPoint {
    double tpr = 0.0;
    double fpr = 0.0;
};

OperatingPoint operating_point(const std::vector<LabeledPair>& pairs, float threshold);

// Every query x collection pair; positive iff the collection id is the
// query's ground-truth original. Negatives are all remaining pairs, not only
// the retrieved top k.
std::vector<LabeledPair> labeled_pairs_all(const EmbeddingMatrix& queries, const Manifest& query_manifest,
                                           const EmbeddingMatrix& collection, const Manifest& collection_manifest,
                                           const GroundTruth& truth);

// CSV threshold,tpr,fpr.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

// CSV similarity,is_true_match (is_true_match is 0 or 1).
std::vector<LabeledPair> read_labeled_pairs(const std::filesystem::path& path);

// {"<transformation>": recall, ...} with keys in lexicographic order.
void write_recall_summary(const std::map<std::string, double>& recall_by_transform,
                          const std::filesystem::path& path);

}  // namespace leakscan
