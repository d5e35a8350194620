#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "leakscan/error.hpp"
#include "leakscan/leakage.hpp"
#include "leakscan/retrieval.hpp"
#include "support/errors.hpp"
#include "support/oracle.hpp"
#include "support/planted.hpp"
#include "support/temp_dir.hpp"

using namespace leakscan;
using fixtures::kind_of;

namespace {

ManifestRecord record(std::string id, std::optional<std::string> label = std::nullopt) {
    ManifestRecord r;
    r.id = std::move(id);
    r.path = r.id + ".jpg";
    r.label = std::move(label);
    r.split = "s";
    r.dataset = "d";
    return r;
}

LeakageRecord leaked(std::string id, Degree degree, LabelAgreement agreement) {
    LeakageRecord r;
    r.query_id = std::move(id);
    r.best_match_id = "m";
    r.best_similarity = degree == Degree::Hard ? 1.0f : 0.96f;
    r.degree = degree;
    r.label_agreement = agreement;
    return r;
}

std::vector<LeakageRecord> records_with(std::size_t n, std::size_t hard, std::size_t soft) {
    std::vector<LeakageRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Degree d = i < hard ? Degree::Hard : i < hard + soft ? Degree::Soft : Degree::None;
        out.push_back(leaked("q" + std::to_string(i), d, LabelAgreement::Unknown));
    }
    return out;
}

}  // namespace

TEST(ClassifyDegree, BoundariesAreInclusiveBelowHardAndSoft) {
    const ThresholdConfig t;
    EXPECT_EQ(classify_degree(0.98f, t), Degree::Hard);
    EXPECT_EQ(classify_degree(0.95f, t), Degree::Soft);
    EXPECT_EQ(classify_degree(0.9499f, t), Degree::None);
    EXPECT_EQ(classify_degree(0.9799f, t), Degree::Soft);
    EXPECT_EQ(classify_degree(1.0f, t), Degree::Hard);
    EXPECT_EQ(classify_degree(-1.0f, t), Degree::None);
}

TEST(ClassifyDegree, NanIsInvalidInput) {
    EXPECT_EQ(kind_of([] { classify_degree(std::numeric_limits<float>::quiet_NaN(), ThresholdConfig{}); }),
              ErrorKind::InvalidInput);
}

TEST(Scan, SelfMatchIsExcludedBySameId) {
    const Manifest queries({record("a")});
    const Manifest collection({record("a"), record("b")});
    MatchSet m(1, 2);
    m.assign(0, {{0, 1.0f}, {1, 0.5f}});
    const auto recs = scan(m, {}, Exclusion::same_id(), queries, collection);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].degree, Degree::None);
    EXPECT_EQ(recs[0].best_match_id, "b");
    EXPECT_FLOAT_EQ(recs[0].best_similarity, 0.5f);
    EXPECT_FALSE(recs[0].exclusion_exhausted);
}

TEST(Scan, NoExclusionKeepsSelfMatch) {
    const Manifest queries({record("a")});
    const Manifest collection({record("a"), record("b")});
    MatchSet m(1, 2);
    m.assign(0, {{0, 1.0f}, {1, 0.5f}});
    const auto recs = scan(m, {}, Exclusion::none(), queries, collection);
    EXPECT_EQ(recs[0].degree, Degree::Hard);
}

TEST(Scan, AllMatchesExcludedIsFlagged) {
    const Manifest queries({record("a")});
    const Manifest collection({record("a"), record("a2")});
    MatchSet m(1, 2);
    m.assign(0, {{0, 1.0f}, {1, 0.99f}});
    const auto recs = scan(m, {}, Exclusion::canonical({{"a2", "a"}}), queries, collection);
    EXPECT_TRUE(recs[0].exclusion_exhausted);
    EXPECT_EQ(recs[0].degree, Degree::None);
    EXPECT_EQ(recs[0].best_match_id, "");
    EXPECT_EQ(recs[0].label_agreement, LabelAgreement::Unknown);
}

TEST(Scan, LabelAgreementRequiresBothLabels) {
    const Manifest queries({record("q1", "tench"), record("q2", "tench"), record("q3")});
    const Manifest collection({record("c1", "goldfish"), record("c2", "tench")});
    MatchSet m(3, 1);
    m.assign(0, {{0, 0.99f}});
    m.assign(1, {{1, 0.99f}});
    m.assign(2, {{1, 0.99f}});
    const auto recs = scan(m, {}, Exclusion::same_id(), queries, collection);
    EXPECT_EQ(recs[0].degree, Degree::Hard);
    EXPECT_EQ(recs[0].label_agreement, LabelAgreement::Different);
    EXPECT_EQ(recs[1].label_agreement, LabelAgreement::Same);
    EXPECT_EQ(recs[2].label_agreement, LabelAgreement::Unknown);
}

TEST(Scan, MatchSetMustCoverManifest) {
    const Manifest queries({record("a"), record("b")});
    const Manifest collection({record("c")});
    MatchSet m(1, 1);
    m.assign(0, {{0, 0.5f}});
    EXPECT_EQ(kind_of([&] { scan(m, {}, Exclusion::same_id(), queries, collection); }), ErrorKind::Schema);
}

TEST(Scan, RowOutsideCollectionIsSchemaError) {
    const Manifest queries({record("a")});
    const Manifest collection({record("c")});
    MatchSet m(1, 1);
    m.assign(0, {{3, 0.5f}});
    EXPECT_EQ(kind_of([&] { scan(m, {}, Exclusion::same_id(), queries, collection); }), ErrorKind::Schema);
}

TEST(Scan, PlantedDuplicatesAreRecovered) {
    const auto audit = fixtures::make_planted_audit();
    const MatchSet m = direct_search(audit.queries, audit.collection, kDefaultScanK);
    const auto recs = scan(m, {}, Exclusion::same_id(), audit.query_manifest, audit.collection_manifest);
    std::size_t hard = 0, soft = 0;
    for (std::size_t q = 0; q < recs.size(); ++q) {
        const double c = audit.planted_cos[q];
        const Degree want = c == 1.0 ? Degree::Hard : c > 0.0 ? Degree::Soft : Degree::None;
        EXPECT_EQ(recs[q].degree, want) << "query " << q;
        if (audit.planted_row[q] >= 0) {
            EXPECT_EQ(recs[q].match_row, static_cast<std::size_t>(audit.planted_row[q]));
            EXPECT_NEAR(recs[q].best_similarity, c, 1e-5);
        }
        hard += recs[q].degree == Degree::Hard;
        soft += recs[q].degree == Degree::Soft;
    }
    EXPECT_EQ(hard, 100u);
    EXPECT_EQ(soft, 150u);
    const auto report = rates(recs, {}, CoverageMode::Inter, "bench", "corpus");
    EXPECT_DOUBLE_EQ(report.hard_rate, 0.10);
    EXPECT_DOUBLE_EQ(report.soft_rate, 0.15);
}

TEST(Scan, ExclusionSoundnessWhenQueriesAreCollectionRows) {
    const auto collection = fixtures::random_unit_matrix(2'000, 32, 5);
    const Manifest cm = fixtures::synthetic_manifest(2'000, "x", "d", "train");
    const auto queries = collection.slice(500, 800);
    std::vector<ManifestRecord> qr(cm.records().begin() + 500, cm.records().begin() + 800);
    const Manifest qm(std::move(qr));
    const MatchSet m = direct_search(queries, collection, kDefaultScanK);
    const auto recs = scan(m, {}, Exclusion::same_id(), qm, cm);
    for (const auto& r : recs) {
        EXPECT_NE(r.degree, Degree::Hard) << r.query_id;
        EXPECT_NE(r.best_match_id, r.query_id);
    }
}

TEST(Scan, ThresholdMonotonicity) {
    const auto audit = fixtures::make_planted_audit({.n_queries = 300, .n_collection = 2'000, .n_exact = 30,
                                                     .n_perturbed = 60, .min_cos = 0.90, .max_cos = 0.999});
    const MatchSet m = direct_search(audit.queries, audit.collection, 3);
    auto count = [&](float ts, float th) {
        const auto recs = scan(m, {ts, th}, Exclusion::same_id(), audit.query_manifest, audit.collection_manifest);
        const auto r = rates(recs, {ts, th}, CoverageMode::Inter, "a", "b");
        EXPECT_EQ(r.n_hard + r.n_soft + (r.n_queries - r.n_hard - r.n_soft), recs.size());
        return std::pair{r.n_hard, r.n_soft};
    };
    std::size_t prev_soft = std::numeric_limits<std::size_t>::max();
    for (float ts = 0.80f; ts < 0.98f; ts += 0.01f) {
        const auto [h, s] = count(ts, 0.98f);
        EXPECT_LE(s, prev_soft);
        prev_soft = s;
    }
    std::size_t prev_hard = std::numeric_limits<std::size_t>::max();
    for (float th = 0.91f; th <= 1.0f; th += 0.01f) {
        const auto [h, s] = count(0.90f, th);
        EXPECT_LE(h, prev_hard);
        prev_hard = h;
    }
}

TEST(Rates, CountsAndFractions) {
    const auto r = rates(records_with(1'000, 100, 150), {}, CoverageMode::Intra, "a", "b");
    EXPECT_EQ(r.n_queries, 1'000u);
    EXPECT_EQ(r.n_hard, 100u);
    EXPECT_EQ(r.n_soft, 150u);
    EXPECT_DOUBLE_EQ(r.hard_rate, 0.10);
    EXPECT_DOUBLE_EQ(r.soft_rate, 0.15);
    EXPECT_EQ(r.coverage, CoverageMode::Intra);
}

TEST(Rates, AllNoneIsZero) {
    const auto r = rates(records_with(10, 0, 0), {}, CoverageMode::Inter, "a", "b");
    EXPECT_EQ(r.hard_rate, 0.0);
    EXPECT_EQ(r.soft_rate, 0.0);
}

TEST(Rates, TwoHundredSeventyOneOfFiftyThousand) {
    const auto r = rates(records_with(50'000, 271, 0), {}, CoverageMode::Inter, "imagenet-val", "laion");
    EXPECT_NEAR(r.hard_rate * 100.0, 0.542, 1e-12);
}

TEST(Rates, EmptyRecordsAreAnError) {
    EXPECT_EQ(kind_of([] { rates({}, {}, CoverageMode::Inter, "a", "b"); }), ErrorKind::EmptyEvaluation);
}

TEST(Rates, InvariantUnderDuplication) {
    auto recs = records_with(37, 5, 9);
    const auto once = rates(recs, {}, CoverageMode::Inter, "a", "b");
    recs.insert(recs.end(), recs.begin(), recs.end());
    const auto twice = rates(recs, {}, CoverageMode::Inter, "a", "b");
    EXPECT_EQ(once.hard_rate, twice.hard_rate);
    EXPECT_EQ(once.soft_rate, twice.soft_rate);
}

TEST(LabelPartition, HardRecordsSplitElevenAndSevenSeventyEight) {
    std::vector<LeakageRecord> recs;
    for (int i = 0; i < 789; ++i) {
        recs.push_back(leaked("q" + std::to_string(i), Degree::Hard,
                              i < 11 ? LabelAgreement::Same : LabelAgreement::Different));
    }
    const auto p = label_agreement_partition(recs, Degree::Hard);
    EXPECT_EQ(p.same.size(), 11u);
    EXPECT_EQ(p.different.size(), 778u);
}

TEST(LabelPartition, HandBuiltMixedFixture) {
    std::vector<LeakageRecord> recs;
    const std::vector<int> same{0, 3, 4, 9, 12, 15, 19};
    for (int i = 0; i < 20; ++i) {
        const bool s = std::find(same.begin(), same.end(), i) != same.end();
        recs.push_back(leaked("q" + std::to_string(i), i % 2 ? Degree::Soft : Degree::Hard,
                              s ? LabelAgreement::Same : LabelAgreement::Different));
    }
    recs.push_back(leaked("clean", Degree::None, LabelAgreement::Unknown));
    const auto p = label_agreement_partition(recs);
    EXPECT_EQ(p.same.size(), 7u);
    EXPECT_EQ(p.different.size(), 13u);
    EXPECT_EQ(p.same.front(), "q0");
}

TEST(LabelPartition, AllSameLeavesDifferentEmpty) {
    const std::vector<LeakageRecord> recs(5, leaked("q", Degree::Hard, LabelAgreement::Same));
    EXPECT_TRUE(label_agreement_partition(recs).different.empty());
}

TEST(LabelPartition, UnknownLabelsNameOffendingIds) {
    const std::vector<LeakageRecord> recs{leaked("ok", Degree::Hard, LabelAgreement::Same),
                                          leaked("nolabel", Degree::Hard, LabelAgreement::Unknown)};
    try {
        label_agreement_partition(recs);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownLabel);
        EXPECT_NE(std::string(e.what()).find("nolabel"), std::string::npos);
    }
}

TEST(Exclusion, CanonicalMapFromCsv) {
    fixtures::TempDir dir;
    {
        std::ofstream out(dir / "map.csv");
        out << "id,canonical_id\nval2014_1,img1\ntrain2017_9,img1\n";
    }
    const auto e = Exclusion::load_canonical_map(dir / "map.csv");
    EXPECT_TRUE(e.excludes("val2014_1", "train2017_9"));
    EXPECT_FALSE(e.excludes("val2014_1", "train2017_8"));
    EXPECT_TRUE(e.excludes("other", "other"));
}

TEST(Exclusion, ConflictingCanonicalMapIsRejected) {
    fixtures::TempDir dir;
    {
        std::ofstream out(dir / "map.csv");
        out << "id,canonical_id\na,x\na,y\n";
    }
    EXPECT_EQ(kind_of([&] { Exclusion::load_canonical_map(dir / "map.csv"); }), ErrorKind::Schema);
}

TEST(RecordsCsv, RoundTripWithQuotingAndExhaustedRows) {
    fixtures::TempDir dir;
    std::vector<LeakageRecord> recs{leaked("plain", Degree::Hard, LabelAgreement::Same),
                                    leaked("with,comma", Degree::Soft, LabelAgreement::Different),
                                    leaked("with\"quote", Degree::None, LabelAgreement::Unknown)};
    recs[2].exclusion_exhausted = true;
    recs[2].best_match_id.clear();
    write_records_csv(recs, dir / "r.csv");

    std::ifstream in(dir / "r.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(header, "query_id,best_match_id,similarity,degree,label_agreement");
    EXPECT_EQ(first, "plain,m,1.000000,hard,same");

    const auto back = read_records_csv(dir / "r.csv");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].query_id, recs[i].query_id);
        EXPECT_EQ(back[i].degree, recs[i].degree);
        EXPECT_EQ(back[i].label_agreement, recs[i].label_agreement);
        EXPECT_EQ(back[i].exclusion_exhausted, recs[i].exclusion_exhausted);
    }
    EXPECT_FLOAT_EQ(back[1].best_similarity, 0.96f);
}
