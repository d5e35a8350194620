#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "leakscan/error.hpp"
#include "leakscan/evalkit.hpp"
#include "support/errors.hpp"
#include "support/oracle.hpp"
#include "support/planted.hpp"
#include "support/temp_dir.hpp"

using namespace leakscan;
using fixtures::kind_of;

namespace {

// Pairwise Mann-Whitney statistic, ties counted as one half.
double pairwise_auc(const std::vector<LabeledPair>& pairs) {
    double wins = 0.0;
    std::size_t np = 0, nn = 0;
    for (const auto& p : pairs) (p.is_true_match ? np : nn)++;
    for (const auto& p : pairs) {
        if (!p.is_true_match) continue;
        for (const auto& n : pairs) {
            if (n.is_true_match) continue;
            wins += p.similarity > n.similarity ? 1.0 : p.similarity == n.similarity ? 0.5 : 0.0;
        }
    }
    return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

std::vector<LabeledPair> flipped(std::vector<LabeledPair> pairs) {
    for (auto& p : pairs) p.is_true_match = !p.is_true_match;
    return pairs;
}

std::vector<LabeledPair> null_pairs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<LabeledPair> pairs(n);
    for (std::size_t i = 0; i < n; ++i) pairs[i] = {u(rng), i % 2 == 0};
    return pairs;
}

Manifest ids(std::size_t n, const std::string& prefix) {
    return fixtures::synthetic_manifest(n, prefix, "d", "s");
}

}  // namespace

TEST(Recall, UntransformedQueriesFromCollectionScoreOne) {
    const auto collection = fixtures::random_unit_matrix(3'000, 48, 3);
    const Manifest cm = ids(3'000, "x");
    const auto queries = collection.slice(1'000, 1'500);
    const Manifest qm(std::vector<ManifestRecord>(cm.records().begin() + 1'000, cm.records().begin() + 1'500));
    const MatchSet m = direct_search(queries, collection, 1);
    EXPECT_EQ(recall_at_1(m, qm, cm, same_id_truth(qm, cm)), 1.0);
}

TEST(Recall, EveryTopOneWrongScoresZero) {
    const Manifest qm = ids(4, "a");
    const Manifest cm = ids(4, "a");
    MatchSet m(4, 1);
    for (std::size_t q = 0; q < 4; ++q) m.assign(q, {{(q + 1) % 4, 0.9f}});
    EXPECT_EQ(recall_at_1(m, qm, cm, same_id_truth(qm, cm)), 0.0);
}

TEST(Recall, CountedFixture) {
    const Manifest qm = ids(5'000, "a");
    const Manifest cm = ids(5'000, "a");
    MatchSet m(5'000, 2);
    for (std::size_t q = 0; q < 5'000; ++q) {
        const bool hit = q < 4'483;
        m.assign(q, {{hit ? q : (q + 1) % 5'000, 0.9f}, {q, 0.8f}});
    }
    const GroundTruth truth = same_id_truth(qm, cm);
    EXPECT_DOUBLE_EQ(recall_at_1(m, qm, cm, truth), 0.8966);
    EXPECT_DOUBLE_EQ(recall_at_k(m, qm, cm, truth, 2), 1.0);
}

TEST(Recall, InvariantUnderQueryPermutation) {
    const std::size_t n = 200;
    const Manifest cm = ids(n, "a");
    std::mt19937_64 rng(4);
    std::vector<std::size_t> top(n);
    for (auto& t : top) t = rng() % n;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    MatchSet a(n, 1), b(n, 1);
    std::vector<ManifestRecord> permuted;
    for (std::size_t i = 0; i < n; ++i) {
        a.assign(i, {{top[i], 0.5f}});
        b.assign(i, {{top[perm[i]], 0.5f}});
        permuted.push_back(cm[perm[i]]);
    }
    const Manifest qb(std::move(permuted));
    EXPECT_EQ(recall_at_1(a, cm, cm, same_id_truth(cm, cm)), recall_at_1(b, qb, cm, same_id_truth(qb, cm)));
}

TEST(Recall, MissingGroundTruthIsSchemaError) {
    const Manifest qm = ids(2, "a");
    MatchSet m(2, 1);
    m.assign(0, {{0, 1.0f}});
    m.assign(1, {{1, 1.0f}});
    GroundTruth truth{{"a000000", "a000000"}};
    EXPECT_EQ(kind_of([&] { recall_at_1(m, qm, qm, truth); }), ErrorKind::Schema);
}

TEST(Roc, PerfectlySeparated) {
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 50; ++i) pairs.push_back({0.99f, true});
    for (int i = 0; i < 500; ++i) pairs.push_back({0.10f, false});
    const auto op = operating_point(pairs, 0.5f);
    EXPECT_EQ(op.tpr, 1.0);
    EXPECT_EQ(op.fpr, 0.0);
    EXPECT_NEAR(auc(roc_curve(pairs)), 1.0, 1e-9);
}

TEST(Roc, BelowMinimumSimilarityDetectsEverything) {
    const auto pairs = null_pairs(1'000, 9);
    float lo = 1.0f;
    for (const auto& p : pairs) lo = std::min(lo, p.similarity);
    const auto op = operating_point(pairs, std::nextafter(lo, -2.0f));
    EXPECT_EQ(op.tpr, 1.0);
    EXPECT_EQ(op.fpr, 1.0);
}

TEST(Roc, AboveMaximumSimilarityDetectsNothing) {
    const auto pairs = null_pairs(1'000, 10);
    const auto op = operating_point(pairs, 1.5f);
    EXPECT_EQ(op.tpr, 0.0);
    EXPECT_EQ(op.fpr, 0.0);
}

TEST(Roc, OperatingPointsOnMatchingFixture) {
    // Untransformed positives at cosine 1; one negative above the soft
    // threshold among 4,807,693 negatives.
    std::vector<LabeledPair> pairs;
    const std::size_t n_neg = 4'807'693;
    pairs.reserve(1'000 + n_neg);
    for (int i = 0; i < 1'000; ++i) pairs.push_back({1.0f, true});
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<float> u(-0.3f, 0.9f);
    for (std::size_t i = 0; i + 1 < n_neg; ++i) pairs.push_back({u(rng), false});
    pairs.push_back({0.96f, false});
    const auto hard = operating_point(pairs, 0.98f);
    EXPECT_EQ(hard.tpr, 1.0);
    EXPECT_EQ(hard.fpr, 0.0);
    const auto soft = operating_point(pairs, 0.95f);
    EXPECT_EQ(soft.tpr, 1.0);
    EXPECT_LE(soft.fpr, 2.08e-7);
    EXPECT_GT(soft.fpr, 0.0);
}

TEST(Roc, SoftThresholdDetectsMoreTransformedDuplicates) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> pos(0.90f, 0.995f), neg(-0.2f, 0.8f);
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 2'000; ++i) pairs.push_back({pos(rng), true});
    for (int i = 0; i < 20'000; ++i) pairs.push_back({neg(rng), false});
    EXPECT_GT(operating_point(pairs, 0.95f).tpr, operating_point(pairs, 0.98f).tpr);
}

TEST(Roc, SweepIsMonotone) {
    std::mt19937_64 rng(12);
    std::normal_distribution<float> pos(0.7f, 0.2f), neg(0.2f, 0.2f);
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 3'000; ++i) pairs.push_back({std::round(pos(rng) * 100.0f) / 100.0f, true});
    for (int i = 0; i < 9'000; ++i) pairs.push_back({std::round(neg(rng) * 100.0f) / 100.0f, false});
    const auto curve = roc_curve(pairs);
    ASSERT_FALSE(curve.points.empty());
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        EXPECT_LT(curve.points[i].threshold, curve.points[i - 1].threshold);
        EXPECT_GE(curve.points[i].tpr, curve.points[i - 1].tpr);
        EXPECT_GE(curve.points[i].fpr, curve.points[i - 1].fpr);
    }
    EXPECT_EQ(curve.points.back().tpr, 1.0);
    EXPECT_EQ(curve.points.back().fpr, 1.0);
}

TEST(Roc, SeparatedAtBoundaryGivesExactCorner) {
    std::mt19937_64 rng(13);
    const float a = 0.7f;
    std::uniform_real_distribution<float> hi(a, 1.0f), lo(-1.0f, a);
    std::vector<LabeledPair> pairs;
    pairs.push_back({a, true});
    for (int i = 0; i < 500; ++i) pairs.push_back({hi(rng), true});
    for (int i = 0; i < 500; ++i) pairs.push_back({std::min(lo(rng), std::nextafter(a, 0.0f)), false});
    const auto c = roc_curve(pairs, {a});
    EXPECT_EQ(c.points[0].tpr, 1.0);
    EXPECT_EQ(c.points[0].fpr, 0.0);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
    std::mt19937_64 rng(21);
    std::normal_distribution<float> pos(0.5f, 0.3f), neg(0.3f, 0.3f);
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 1'200; ++i) pairs.push_back({std::round(pos(rng) * 50.0f) / 50.0f, true});
    for (int i = 0; i < 1'800; ++i) pairs.push_back({std::round(neg(rng) * 50.0f) / 50.0f, false});
    EXPECT_NEAR(auc(roc_curve(pairs)), pairwise_auc(pairs), 1e-12);
}

TEST(Auc, ReversedLabelsGiveComplement) {
    std::mt19937_64 rng(22);
    std::normal_distribution<float> pos(0.6f, 0.2f), neg(0.4f, 0.2f);
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 4'000; ++i) pairs.push_back({pos(rng), true});
    for (int i = 0; i < 6'000; ++i) pairs.push_back({std::round(neg(rng) * 1000.0f) / 1000.0f, false});
    EXPECT_NEAR(auc(roc_curve(flipped(pairs))), 1.0 - auc(roc_curve(pairs)), 1e-9);
}

TEST(Auc, IidNullIsOneHalf) {
    EXPECT_NEAR(auc(roc_curve(null_pairs(100'000, 23))), 0.5, 0.01);
}

TEST(Auc, NonMonotoneCurveIsRejected) {
    RocCurve c;
    c.points = {{0.9f, 0.5, 0.1}, {0.8f, 0.4, 0.2}};
    EXPECT_EQ(kind_of([&] { auc(c); }), ErrorKind::InvalidCurve);
    c.points = {{0.9f, 0.5, 0.1}, {0.9f, 0.6, 0.2}};
    EXPECT_EQ(kind_of([&] { auc(c); }), ErrorKind::InvalidCurve);
}

TEST(Auc, ValueWithinUnitInterval) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double a = auc(roc_curve(null_pairs(501, seed)));
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}

TEST(Roc, DegenerateSetsAreRejected) {
    const std::vector<LabeledPair> only_pos{{0.5f, true}, {0.7f, true}};
    const std::vector<LabeledPair> only_neg{{0.5f, false}};
    EXPECT_EQ(kind_of([&] { roc_curve(only_pos); }), ErrorKind::DegenerateSet);
    EXPECT_EQ(kind_of([&] { roc_curve(only_neg); }), ErrorKind::DegenerateSet);
    EXPECT_EQ(kind_of([&] { roc_curve({}); }), ErrorKind::DegenerateSet);
}

TEST(LabeledPairs, AllPairsWithOnePositivePerQuery) {
    const auto collection = fixtures::random_unit_matrix(300, 16, 30);
    const Manifest cm = ids(300, "x");
    const auto queries = collection.slice(10, 30);
    const Manifest qm(std::vector<ManifestRecord>(cm.records().begin() + 10, cm.records().begin() + 30));
    const auto pairs = labeled_pairs_all(queries, qm, collection, cm, same_id_truth(qm, cm));
    ASSERT_EQ(pairs.size(), 20u * 300u);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        positives += pairs[i].is_true_match;
        const std::size_t q = i / 300, r = i % 300;
        EXPECT_EQ(pairs[i].similarity,
                  fixtures::naive_similarity(queries.row(q).data(), collection.row(r).data(), 16));
    }
    EXPECT_EQ(positives, 20u);
    EXPECT_NEAR(auc(roc_curve(pairs)), 1.0, 1e-9);
}

TEST(RocCsv, WritesHeaderAndRoundTrippableThresholds) {
    fixtures::TempDir dir;
    const auto curve = roc_curve({{0.9f, true}, {0.25f, false}, {0.6f, true}});
    write_roc_csv(curve, dir / "roc.csv");
    std::ifstream in(dir / "roc.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "threshold,tpr,fpr");
    std::getline(in, line);
    EXPECT_EQ(line, "0.899999976,0.5,0");
}

TEST(LabeledPairsCsv, ReadsFlags) {
    fixtures::TempDir dir;
    {
        std::ofstream out(dir / "p.csv");
        out << "similarity,is_true_match\n0.99,1\n0.1,0\n0.5,true\n";
    }
    const auto pairs = read_labeled_pairs(dir / "p.csv");
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_TRUE(pairs[0].is_true_match);
    EXPECT_FALSE(pairs[1].is_true_match);
    EXPECT_TRUE(pairs[2].is_true_match);
    {
        std::ofstream out(dir / "bad.csv");
        out << "similarity,is_true_match\n0.99,yes\n";
    }
    EXPECT_EQ(kind_of([&] { read_labeled_pairs(dir / "bad.csv"); }), ErrorKind::Format);
}

TEST(RecallSummary, KeysAreSortedJson) {
    fixtures::TempDir dir;
    write_recall_summary({{"rot-45", 0.75}, {"original", 1.0}}, dir / "r.json");
    std::ifstream in(dir / "r.json");
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    EXPECT_LT(text.find("original"), text.find("rot-45"));
}
