#include "leakscan/cli.hpp"

#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "leakscan/evalkit.hpp"
#include "leakscan/leakage.hpp"
#include "leakscan/parallel.hpp"
#include "leakscan/plan.hpp"
#include "leakscan/report.hpp"
#include "leakscan/retrieval.hpp"
#include "leakscan/subsets.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct Options {
    fs::path plan;
    fs::path out;
    std::optional<std::size_t> threads;
    std::optional<float> tau_soft;
    std::optional<float> tau_hard;
};

class Session {
public:
    Session(AuditPlan plan, fs::path out, std::size_t threads, std::ostream& log, std::ostream& warn)
        : plan_(std::move(plan)), out_(std::move(out)), threads_(threads), log_(log), warn_(warn) {}

    int scan();
    int roc();
    int robustness();
    int subsets();
    int metrics();

private:
    struct Header {
        std::size_t count;
        std::size_t dim;
    };

    // Reads only the store header and checks the manifest sidecar exists.
    Header preflight(const std::string& name) {
        const StoreRef& ref = plan_.store(name);
        RowReader reader(ref.path);
        const auto manifest = manifest_path_for(ref.path);
        if (!fs::exists(manifest)) {
            fail(ErrorKind::Storage, fmt::format("{}: manifest sidecar missing for store '{}'", manifest.string(), name));
        }
        return {reader.count(), reader.dim()};
    }

    void require_same_dim(const std::string& a, const std::string& b) {
        const Header ha = preflight(a), hb = preflight(b);
        if (ha.dim != hb.dim) {
            fail(ErrorKind::DimensionMismatch,
                 fmt::format("store '{}' has dim {}, store '{}' has dim {}", a, ha.dim, b, hb.dim));
        }
    }

    const Store& store(const std::string& name) {
        auto& slot = stores_[name];
        if (!slot) slot = std::make_shared<Store>(load_store(plan_.store(name).path));
        return *slot;
    }

    const PartitionedIndex& index(const std::string& name) {
        auto& slot = indexes_[name];
        if (!slot) slot = std::make_shared<PartitionedIndex>(build_index(store(name).matrix, plan_.partition_size, threads_));
        return *slot;
    }

    std::vector<LeakageRecord> scan_pair(const PairSpec& pair) {
        const Store& q = store(pair.query);
        const Store& c = store(pair.collection);
        const MatchSet matches = knn_search(index(pair.collection), q.matrix, plan_.k, {threads_});
        Exclusion exclusion = Exclusion::same_id();
        if (pair.exclusion == "none") exclusion = Exclusion::none();
        if (pair.canonical_map) exclusion = Exclusion::load_canonical_map(*pair.canonical_map);
        return leakscan::scan(matches, plan_.thresholds, exclusion, q.manifest, c.manifest);
    }

    // Records for the subsets benchmark: from file, or the strongest verdict
    // per query across every pair querying the benchmark.
    std::vector<LeakageRecord> benchmark_records() {
        const SubsetsSpec& spec = *plan_.subsets;
        if (spec.records) return read_records_csv(*spec.records);
        std::vector<LeakageRecord> merged;
        for (const auto& pair : plan_.pairs) {
            if (pair.query != spec.benchmark) continue;
            auto recs = scan_pair(pair);
            if (merged.empty()) {
                merged = std::move(recs);
                continue;
            }
            for (std::size_t i = 0; i < recs.size(); ++i) {
                if (strength(recs[i].degree) > strength(merged[i].degree)) merged[i] = std::move(recs[i]);
            }
        }
        return merged;
    }

    static int strength(Degree d) { return d == Degree::Hard ? 2 : d == Degree::Soft ? 1 : 0; }

    Manifest benchmark_manifest() {
        return read_manifest(manifest_path_for(plan_.store(plan_.subsets->benchmark).path));
    }

    std::vector<SubsetBuild> build_all(const Manifest& manifest, const std::vector<LeakageRecord>& records) {
        std::vector<SubsetBuild> builds;
        for (Degree d : plan_.subsets->degrees) {
            builds.push_back(build_subsets(manifest, records, d, plan_.seed,
                                           {.size_matched_nonleaked = plan_.subsets->size_matched_nonleaked}));
            for (const auto& w : builds.back().warnings) warn_ << "warning: " << w << '\n';
        }
        return builds;
    }

    void ensure_out() {
        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec) fail(ErrorKind::Storage, fmt::format("{}: cannot create output directory: {}", out_.string(), ec.message()));
    }

    void write_json(const fs::path& path, const ordered_json& j) {
        std::ofstream o(path, std::ios::binary | std::ios::trunc);
        if (!o) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
        o << j.dump(2) << '\n';
        o.close();
        if (!o) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
    }

    GroundTruth truth_for(const std::optional<fs::path>& file, const Manifest& q, const Manifest& c) {
        return file ? read_ground_truth(*file) : same_id_truth(q, c);
    }

    AuditPlan plan_;
    fs::path out_;
    std::size_t threads_;
    std::ostream& log_;
    std::ostream& warn_;
    std::map<std::string, std::shared_ptr<Store>> stores_;
    std::map<std::string, std::shared_ptr<PartitionedIndex>> indexes_;
};

int Session::scan() {
    if (plan_.pairs.empty()) fail(ErrorKind::Validation, "plan: scan needs at least one pair");
    for (const auto& p : plan_.pairs) require_same_dim(p.query, p.collection);
    ensure_out();

    std::vector<AuditResult> audits;
    std::vector<LeakageReport> reports;
    for (const auto& pair : plan_.pairs) {
        auto records = scan_pair(pair);
        const Store& q = store(pair.query);
        const Store& c = store(pair.collection);
        audits.push_back(make_audit_result(pair_key(pair.query, pair.collection), std::move(records),
                                           plan_.thresholds, pair.coverage, q.manifest, c.manifest, pair.query,
                                           pair.collection));
        const auto& r = audits.back().report;
        reports.push_back(r);
        log_ << fmt::format("{}: {} queries, hard {:.2f}%, soft {:.2f}%, total {:.2f}%\n", audits.back().pair,
                            r.n_queries, r.hard_rate * 100.0, r.soft_rate * 100.0, total_leakage(r));
    }
    std::vector<std::string> rows, cols;
    for (const auto& s : plan_.stores) {
        rows.push_back(s.name);
        cols.push_back(s.name);
    }
    // Only names that occur on each axis.
    std::erase_if(rows, [&](const std::string& n) {
        return std::none_of(plan_.pairs.begin(), plan_.pairs.end(), [&](const PairSpec& p) { return p.collection == n; });
    });
    std::erase_if(cols, [&](const std::string& n) {
        return std::none_of(plan_.pairs.begin(), plan_.pairs.end(), [&](const PairSpec& p) { return p.query == n; });
    });
    emit(audits, assemble_matrix(reports, rows, cols), plan_json(plan_), out_);
    return kExitOk;
}

int Session::roc() {
    if (!plan_.roc) fail(ErrorKind::Validation, "plan: roc section missing");
    const RocSpec& spec = *plan_.roc;
    std::vector<LabeledPair> pairs;
    std::string universe;
    if (spec.pairs_csv) {
        pairs = read_labeled_pairs(*spec.pairs_csv);
        universe = "pairs file";
    } else {
        require_same_dim(*spec.queries, *spec.collection);
        const Store& q = store(*spec.queries);
        const Store& c = store(*spec.collection);
        pairs = labeled_pairs_all(q.matrix, q.manifest, c.matrix, c.manifest,
                                  truth_for(spec.ground_truth, q.manifest, c.manifest));
        universe = "all query x collection pairs";
    }
    ensure_out();
    const RocCurve curve = roc_curve(pairs, spec.thresholds);
    const double area = auc(curve);
    write_roc_csv(curve, out_ / "roc.csv");
    ordered_json j;
    j["auc"] = area;
    j["positives"] = curve.positives;
    j["negatives"] = curve.negatives;
    j["negative_universe"] = universe;
    for (const auto& [name, t] : {std::pair{"tau_hard", plan_.thresholds.tau_hard},
                                  std::pair{"tau_soft", plan_.thresholds.tau_soft}}) {
        const auto op = operating_point(pairs, t);
        j["operating_points"][name] = {{"threshold", t}, {"tpr", op.tpr}, {"fpr", op.fpr}};
    }
    write_json(out_ / "roc_summary.json", j);
    log_ << fmt::format("roc: {} positives, {} negatives, AUC {:.6f}\n", curve.positives, curve.negatives, area);
    return kExitOk;
}

int Session::robustness() {
    if (!plan_.robustness) fail(ErrorKind::Validation, "plan: robustness section missing");
    const RobustnessSpec& spec = *plan_.robustness;
    for (const auto& [name, q] : spec.queries) require_same_dim(q, spec.collection);
    ensure_out();
    const Store& c = store(spec.collection);
    std::map<std::string, double> recall;
    for (const auto& [name, qname] : spec.queries) {
        const Store& q = store(qname);
        const MatchSet m = knn_search(index(spec.collection), q.matrix, 1, {threads_});
        recall[name] = recall_at_1(m, q.manifest, c.manifest, truth_for(spec.ground_truth, q.manifest, c.manifest));
        log_ << fmt::format("{}: R@1 {:.4f}\n", name, recall[name]);
    }
    write_recall_summary(recall, out_ / "recall.json");
    return kExitOk;
}

int Session::subsets() {
    if (!plan_.subsets) fail(ErrorKind::Validation, "plan: subsets section missing");
    const SubsetsSpec& spec = *plan_.subsets;
    for (const auto& p : plan_.pairs) {
        if (!spec.records && p.query == spec.benchmark) require_same_dim(p.query, p.collection);
    }
    const Manifest manifest = benchmark_manifest();
    const auto records = benchmark_records();
    ensure_out();
    const fs::path dir = out_ / "subsets";
    fs::create_directories(dir);
    ordered_json summary = ordered_json::array();
    for (const auto& build : build_all(manifest, records)) {
        const auto files = write_subset_files(build.subsets, spec.benchmark, dir);
        for (std::size_t i = 0; i < build.subsets.size(); ++i) {
            const auto& s = build.subsets[i];
            ordered_json j;
            j["name"] = s.name();
            j["degree"] = std::string(to_string(s.degree));
            j["file"] = files[i].filename().string();
            j["size"] = s.size();
            j["parent_size"] = s.parent_size;
            j["seed"] = s.seed ? ordered_json(*s.seed) : ordered_json(nullptr);
            summary.push_back(std::move(j));
            log_ << fmt::format("{}: {} ids\n", s.name(), s.size());
        }
    }
    ordered_json doc;
    doc["benchmark"] = spec.benchmark;
    doc["seed"] = plan_.seed;
    doc["subsets"] = std::move(summary);
    write_json(out_ / "subsets.json", doc);
    return kExitOk;
}

int Session::metrics() {
    if (!plan_.metrics || !plan_.subsets) fail(ErrorKind::Validation, "plan: metrics needs metrics and subsets sections");
    const MetricsSpec& spec = *plan_.metrics;
    const Manifest manifest = benchmark_manifest();
    std::optional<std::unordered_map<std::string, bool>> correct;
    std::optional<std::unordered_map<std::string, std::size_t>> ranks;
    if (spec.classification) correct = read_classification_predictions(*spec.classification, manifest);
    if (spec.ranks) ranks = read_caption_ranks(*spec.ranks);
    const auto records = benchmark_records();
    ensure_out();
    for (const auto& build : build_all(manifest, records)) {
        const std::string degree(to_string(build.subsets.front().degree));
        auto report = [&](const SubsetMetrics& m, const std::string& kind) {
            for (const auto& w : m.warnings) warn_ << "warning: " << w << '\n';
            write_metrics(m, out_ / fmt::format("metrics_{}_{}.csv", degree, kind),
                          out_ / fmt::format("metrics_{}_{}.json", degree, kind));
            for (const auto& row : m.rows) {
                log_ << fmt::format("{} {} {}: {} (gain {})\n", kind, row.subset, row.metric,
                                    format_percent(row.value), format_percent(row.gain));
            }
        };
        if (correct) report(subset_metrics(*correct, build.subsets), "classification");
        if (ranks) {
            report(repeated_retrieval_eval(build.subsets, *ranks,
                                           {.caption_collection_size = spec.caption_collection_size,
                                            .trials = spec.trials,
                                            .per_trial_queries = spec.per_trial_queries,
                                            .seed = plan_.seed}),
                   "retrieval");
        }
    }
    return kExitOk;
}

std::size_t resolve_thread_count(const Options& opts, const AuditPlan& plan) {
    if (opts.threads) return resolve_threads(*opts.threads);
    if (const char* env = std::getenv("LEAKSCAN_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0' || env[0] == '-') {
            fail(ErrorKind::Parameter, fmt::format("LEAKSCAN_THREADS='{}' is not a non-negative integer", env));
        }
        return resolve_threads(static_cast<std::size_t>(v));
    }
    return resolve_threads(plan.threads.value_or(0));
}

}  // namespace

int exit_code(ErrorKind kind) noexcept { return 10 + static_cast<int>(kind); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dataset leakage auditing via exact embedding retrieval", "leakscan"};
    Options opts;
    app.add_option("--plan", opts.plan, "Audit plan (YAML)")->required();
    app.add_option("--out", opts.out, "Output directory")->required();
    app.add_option("--threads", opts.threads, "Worker threads, 0 = one per hardware thread");
    app.add_option("--tau-soft", opts.tau_soft, "Soft leakage threshold (overrides the plan)");
    app.add_option("--tau-hard", opts.tau_hard, "Hard leakage threshold (overrides the plan)");
    const std::vector<std::pair<const char*, const char*>> commands{
        {"scan", "Retrieval, leakage verdicts and report for every plan pair"},
        {"roc", "ROC curve and AUC from labeled pairs"},
        {"robustness", "Recall at 1 per query transformation"},
        {"subsets", "Build leaked / non-leaked / random subset files"},
        {"metrics", "Subset accuracy and repeated-trial retrieval metrics"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        AuditPlan plan = load_plan(opts.plan, {opts.tau_soft, opts.tau_hard});
        const std::size_t threads = resolve_thread_count(opts, plan);
        Session session(std::move(plan), opts.out, threads, out, err);
        if (command == "scan") return session.scan();
        if (command == "roc") return session.roc();
        if (command == "robustness") return session.robustness();
        if (command == "subsets") return session.subsets();
        return session.metrics();
    } catch (const Error& e) {
        err << "leakscan " << command << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "leakscan " << command << ": internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace leakscan::cli
