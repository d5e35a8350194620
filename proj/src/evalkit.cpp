#include "leakscan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "leakscan/csv.hpp"
#include "leakscan/error.hpp"

namespace leakscan {

namespace {

// Number of values in an ascending array that are >= t.
std::size_t count_at_least(const std::vector<float>& sorted, float t) {
    return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

void split_pairs(const std::vector<LabeledPair>& pairs, std::vector<float>& pos, std::vector<float>& neg) {
    for (const auto& p : pairs) {
        if (!std::isfinite(p.similarity)) fail(ErrorKind::InvalidInput, "labeled pair similarity is not finite");
        (p.is_true_match ? pos : neg).push_back(p.similarity);
    }
    if (pos.empty()) fail(ErrorKind::DegenerateSet, "no positive pairs: TPR is undefined");
    if (neg.empty()) fail(ErrorKind::DegenerateSet, "no negative pairs: FPR is undefined");
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
}

}  // namespace

double recall_at_k(const MatchSet& matches, const Manifest& query_manifest, const Manifest& collection_manifest,
                   const GroundTruth& truth, std::size_t k) {
    if (k == 0) fail(ErrorKind::Parameter, "recall cutoff k must be at least 1");
    if (matches.size() != query_manifest.size()) {
        fail(ErrorKind::Schema, fmt::format("match set covers {} queries, manifest has {}", matches.size(),
                                            query_manifest.size()));
    }
    if (matches.size() == 0) fail(ErrorKind::EmptyEvaluation, "no queries: recall is undefined");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < matches.size(); ++q) {
        const std::string& qid = query_manifest[q].id;
        const auto it = truth.find(qid);
        if (it == truth.end()) fail(ErrorKind::Schema, fmt::format("query '{}' has no ground truth", qid));
        const auto list = matches[q];
        if (list.empty()) fail(ErrorKind::InvalidInput, fmt::format("query '{}' has no matches", qid));
        const std::size_t n = std::min(k, list.size());
        for (std::size_t j = 0; j < n; ++j) {
            if (list[j].row < collection_manifest.size() && collection_manifest[list[j].row].id == it->second) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(matches.size());
}

GroundTruth same_id_truth(const Manifest& query_manifest, const Manifest& collection_manifest) {
    GroundTruth truth;
    for (const auto& r : query_manifest.records()) {
        if (collection_manifest.find(r.id)) truth.emplace(r.id, r.id);
    }
    return truth;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    GroundTruth truth;
    for (auto& row : csv::read_table(path, {"query_id", "collection_id"})) {
        if (!truth.emplace(row[0], row[1]).second) {
            fail(ErrorKind::Schema, fmt::format("{}: duplicate query id '{}'", path.string(), row[0]));
        }
    }
    return truth;
}

RocCurve roc_curve(const std::vector<LabeledPair>& pairs, std::vector<float> thresholds) {
    std::vector<float> pos, neg;
    split_pairs(pairs, pos, neg);
    if (thresholds.empty()) {
        thresholds.reserve(pos.size() + neg.size());
        thresholds.insert(thresholds.end(), pos.begin(), pos.end());
        thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    }
    for (float t : thresholds) {
        if (std::isnan(t)) fail(ErrorKind::InvalidInput, "ROC threshold is NaN");
    }
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocCurve curve;
    curve.positives = pos.size();
    curve.negatives = neg.size();
    curve.points.reserve(thresholds.size());
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    for (float t : thresholds) {
        curve.points.push_back({t, static_cast<double>(count_at_least(pos, t)) / np,
                                static_cast<double>(count_at_least(neg, t)) / nn});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    double prev_tpr = 0.0;
    double prev_fpr = 0.0;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const RocPoint& p = curve.points[i];
        if (i > 0 && !(p.threshold < curve.points[i - 1].threshold)) {
            fail(ErrorKind::InvalidCurve, fmt::format("ROC thresholds not strictly decreasing at point {}", i));
        }
        if (!(p.tpr >= prev_tpr && p.fpr >= prev_fpr && p.tpr <= 1.0 && p.fpr <= 1.0)) {
            fail(ErrorKind::InvalidCurve, fmt::format("ROC rates not monotone in [0,1] at point {}", i));
        }
        area += (p.fpr - prev_fpr) * (p.tpr + prev_tpr) * 0.5;
        prev_tpr = p.tpr;
        prev_fpr = p.fpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) * 0.5;
    return std::clamp(area, 0.0, 1.0);
}

OperatingPoint operating_point(const std::vector<LabeledPair>& pairs, float threshold) {
    const RocCurve c = roc_curve(pairs, {threshold});
    return {c.points.front().tpr, c.points.front().fpr};
}

std::vector<LabeledPair> labeled_pairs_all(const EmbeddingMatrix& queries, const Manifest& query_manifest,
                                           const EmbeddingMatrix& collection, const Manifest& collection_manifest,
                                           const GroundTruth& truth) {
    if (queries.count() != query_manifest.size() || collection.count() != collection_manifest.size()) {
        fail(ErrorKind::Schema, "embedding matrix and manifest sizes differ");
    }
    if (queries.dim() != collection.dim() && !queries.empty() && !collection.empty()) {
        fail(ErrorKind::DimensionMismatch,
             fmt::format("query dim {} differs from collection dim {}", queries.dim(), collection.dim()));
    }
    std::vector<LabeledPair> pairs;
    pairs.reserve(queries.count() * collection.count());
    for (std::size_t q = 0; q < queries.count(); ++q) {
        const auto it = truth.find(query_manifest[q].id);
        const std::string* want = it == truth.end() ? nullptr : &it->second;
        for (std::size_t r = 0; r < collection.count(); ++r) {
            pairs.push_back({cosine_similarity(queries.row(q), collection.row(r)),
                             want && collection_manifest[r].id == *want});
        }
    }
    return pairs;
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    out << "threshold,tpr,fpr\n";
    for (const auto& p : curve.points) out << fmt::format("{:.9g},{:.17g},{:.17g}\n", p.threshold, p.tpr, p.fpr);
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

std::vector<LabeledPair> read_labeled_pairs(const std::filesystem::path& path) {
    std::vector<LabeledPair> pairs;
    const auto rows = csv::read_table(path, {"similarity", "is_true_match"});
    pairs.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        LabeledPair p;
        try {
            std::size_t used = 0;
            p.similarity = std::stof(rows[i][0], &used);
            if (used != rows[i][0].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(ErrorKind::Format, fmt::format("{}: row {} has a malformed similarity", path.string(), i + 1));
        }
        const std::string& flag = rows[i][1];
        if (flag == "1" || flag == "true") {
            p.is_true_match = true;
        } else if (flag != "0" && flag != "false") {
            fail(ErrorKind::Format, fmt::format("{}: row {} has is_true_match '{}'", path.string(), i + 1, flag));
        }
        pairs.push_back(p);
    }
    return pairs;
}

void write_recall_summary(const std::map<std::string, double>& recall_by_transform,
                          const std::filesystem::path& path) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, r] : recall_by_transform) j[name] = r;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    out << j.dump(2) << '\n';
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

}  // namespace leakscan
