#include "leakscan/plan.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "leakscan/error.hpp"

namespace leakscan {

namespace {

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorKind::Validation, "plan: " + msg); }

template <typename T>
T scalar(const YAML::Node& node, const std::string& what) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        invalid(fmt::format("'{}' has an invalid value", what));
    }
}

std::size_t positive(const YAML::Node& node, const std::string& what) {
    const auto v = scalar<long long>(node, what);
    if (v < 1) invalid(fmt::format("'{}' must be a positive integer", what));
    return static_cast<std::size_t>(v);
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) invalid(fmt::format("'{}' must be a mapping", where));
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) invalid(fmt::format("unknown key '{}' in {}", key, where));
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> optional_path(const YAML::Node& node, const char* key,
                                                   const std::filesystem::path& base, const std::string& where) {
    if (!node[key]) return std::nullopt;
    return resolve(base, scalar<std::string>(node[key], fmt::format("{}.{}", where, key)));
}

StoreRole parse_role(const std::string& s) {
    if (s == "pretraining") return StoreRole::Pretraining;
    if (s == "training") return StoreRole::Training;
    if (s == "benchmark") return StoreRole::Benchmark;
    invalid(fmt::format("store role '{}' is not pretraining, training or benchmark", s));
}

}  // namespace

std::string_view to_string(StoreRole role) noexcept {
    switch (role) {
        case StoreRole::Pretraining: return "pretraining";
        case StoreRole::Training: return "training";
        case StoreRole::Benchmark: return "benchmark";
    }
    return "training";
}

const StoreRef& AuditPlan::store(const std::string& name) const {
    for (const auto& s : stores) {
        if (s.name == name) return s;
    }
    fail(ErrorKind::UnknownStore, fmt::format("plan references undeclared store '{}'", name));
}

AuditPlan load_plan(const std::filesystem::path& path, const PlanOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Storage, fmt::format("{}: cannot open plan", path.string()));
    std::stringstream text;
    text << in.rdbuf();
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_plan(text.str(), base, overrides);
}

AuditPlan parse_plan(const std::string& yaml_text, const std::filesystem::path& base_dir,
                     const PlanOverrides& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        invalid(e.what());
    }
    check_keys(root, "plan", {"stores", "pairs", "thresholds", "k", "partition_size", "seed", "threads", "roc",
                              "robustness", "subsets", "metrics"});
    AuditPlan plan;
    plan.base_dir = base_dir;

    if (!root["stores"] || !root["stores"].IsSequence()) invalid("'stores' must be a list");
    for (const auto& s : root["stores"]) {
        check_keys(s, "stores[]", {"name", "path", "role"});
        StoreRef ref;
        ref.name = scalar<std::string>(s["name"], "stores[].name");
        ref.path_text = scalar<std::string>(s["path"], "stores[].path");
        ref.path = resolve(base_dir, ref.path_text);
        ref.role = parse_role(scalar<std::string>(s["role"], "stores[].role"));
        plan.stores.push_back(std::move(ref));
    }

    if (root["pairs"]) {
        if (!root["pairs"].IsSequence()) invalid("'pairs' must be a list");
        for (const auto& p : root["pairs"]) {
            check_keys(p, "pairs[]", {"query", "collection", "coverage", "exclusion"});
            PairSpec spec;
            spec.query = scalar<std::string>(p["query"], "pairs[].query");
            spec.collection = scalar<std::string>(p["collection"], "pairs[].collection");
            if (p["coverage"]) {
                const auto c = parse_coverage(scalar<std::string>(p["coverage"], "pairs[].coverage"));
                if (!c) invalid("pair coverage must be intra or inter");
                spec.coverage = *c;
            }
            if (p["exclusion"]) {
                spec.exclusion = scalar<std::string>(p["exclusion"], "pairs[].exclusion");
                if (spec.exclusion != "same-id" && spec.exclusion != "none") {
                    spec.canonical_map = resolve(base_dir, spec.exclusion);
                }
            }
            plan.pairs.push_back(std::move(spec));
        }
    }

    if (const auto t = root["thresholds"]) {
        check_keys(t, "thresholds", {"tau_soft", "tau_hard"});
        if (t["tau_soft"]) plan.thresholds.tau_soft = scalar<float>(t["tau_soft"], "thresholds.tau_soft");
        if (t["tau_hard"]) plan.thresholds.tau_hard = scalar<float>(t["tau_hard"], "thresholds.tau_hard");
    }
    if (overrides.tau_soft) plan.thresholds.tau_soft = *overrides.tau_soft;
    if (overrides.tau_hard) plan.thresholds.tau_hard = *overrides.tau_hard;
    if (root["k"]) plan.k = positive(root["k"], "k");
    if (root["partition_size"]) plan.partition_size = positive(root["partition_size"], "partition_size");
    if (root["seed"]) plan.seed = scalar<std::uint64_t>(root["seed"], "seed");
    if (root["threads"]) plan.threads = scalar<std::size_t>(root["threads"], "threads");

    if (const auto r = root["roc"]) {
        check_keys(r, "roc", {"pairs", "queries", "collection", "ground_truth", "thresholds"});
        RocSpec spec;
        spec.pairs_csv = optional_path(r, "pairs", base_dir, "roc");
        if (r["queries"]) spec.queries = scalar<std::string>(r["queries"], "roc.queries");
        if (r["collection"]) spec.collection = scalar<std::string>(r["collection"], "roc.collection");
        spec.ground_truth = optional_path(r, "ground_truth", base_dir, "roc");
        if (r["thresholds"]) spec.thresholds = scalar<std::vector<float>>(r["thresholds"], "roc.thresholds");
        plan.roc = std::move(spec);
    }
    if (const auto r = root["robustness"]) {
        check_keys(r, "robustness", {"collection", "queries", "ground_truth"});
        RobustnessSpec spec;
        spec.collection = scalar<std::string>(r["collection"], "robustness.collection");
        spec.queries = scalar<std::map<std::string, std::string>>(r["queries"], "robustness.queries");
        spec.ground_truth = optional_path(r, "ground_truth", base_dir, "robustness");
        plan.robustness = std::move(spec);
    }
    if (const auto s = root["subsets"]) {
        check_keys(s, "subsets", {"benchmark", "records", "degrees", "size_matched_nonleaked"});
        SubsetsSpec spec;
        spec.benchmark = scalar<std::string>(s["benchmark"], "subsets.benchmark");
        spec.records = optional_path(s, "records", base_dir, "subsets");
        if (s["degrees"]) {
            spec.degrees.clear();
            for (const auto& d : scalar<std::vector<std::string>>(s["degrees"], "subsets.degrees")) {
                const auto deg = parse_degree(d);
                if (!deg || *deg == Degree::None) invalid("subset degrees must be hard or soft");
                spec.degrees.push_back(*deg);
            }
        }
        if (s["size_matched_nonleaked"]) {
            spec.size_matched_nonleaked = scalar<bool>(s["size_matched_nonleaked"], "subsets.size_matched_nonleaked");
        }
        plan.subsets = std::move(spec);
    }
    if (const auto m = root["metrics"]) {
        check_keys(m, "metrics", {"classification", "ranks", "caption_collection_size", "trials", "per_trial_queries"});
        MetricsSpec spec;
        spec.classification = optional_path(m, "classification", base_dir, "metrics");
        spec.ranks = optional_path(m, "ranks", base_dir, "metrics");
        if (m["caption_collection_size"]) {
            spec.caption_collection_size = positive(m["caption_collection_size"], "metrics.caption_collection_size");
        }
        if (m["trials"]) spec.trials = scalar<std::size_t>(m["trials"], "metrics.trials");
        if (m["per_trial_queries"]) spec.per_trial_queries = positive(m["per_trial_queries"], "metrics.per_trial_queries");
        plan.metrics = std::move(spec);
    }
    validate(plan);
    return plan;
}

void validate(const AuditPlan& plan) {
    if (!(plan.thresholds.tau_soft < plan.thresholds.tau_hard)) {
        invalid(fmt::format("tau_soft ({}) must be below tau_hard ({})", plan.thresholds.tau_soft,
                            plan.thresholds.tau_hard));
    }
    try {
        plan.thresholds.validate();
    } catch (const Error& e) {
        invalid(e.what());
    }
    if (plan.k < 1) invalid("k must be at least 1");
    if (plan.partition_size < 1) invalid("partition_size must be at least 1");
    std::set<std::string> names;
    for (const auto& s : plan.stores) {
        if (s.name.empty()) invalid("store names must be non-empty");
        if (!names.insert(s.name).second) invalid(fmt::format("store '{}' declared twice", s.name));
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : plan.pairs) {
        plan.store(p.query);
        const auto& c = plan.store(p.collection);
        if (c.role == StoreRole::Benchmark) {
            invalid(fmt::format("benchmark store '{}' used as a collection; benchmarks are queries only", c.name));
        }
        if (!seen.emplace(p.query, p.collection).second) {
            invalid(fmt::format("pair ({}, {}) listed twice", p.query, p.collection));
        }
    }
    if (plan.roc) {
        const auto& r = *plan.roc;
        const bool from_stores = r.queries || r.collection;
        if (r.pairs_csv.has_value() == from_stores) invalid("roc needs either 'pairs' or 'queries' + 'collection'");
        if (from_stores) {
            if (!r.queries || !r.collection) invalid("roc needs both 'queries' and 'collection'");
            plan.store(*r.queries);
            plan.store(*r.collection);
        }
    }
    if (plan.robustness) {
        plan.store(plan.robustness->collection);
        if (plan.robustness->queries.empty()) invalid("robustness.queries is empty");
        for (const auto& [name, store] : plan.robustness->queries) plan.store(store);
    }
    if (plan.subsets) {
        plan.store(plan.subsets->benchmark);
        if (plan.subsets->degrees.empty()) invalid("subsets.degrees is empty");
        if (!plan.subsets->records) {
            bool any = false;
            for (const auto& p : plan.pairs) any = any || p.query == plan.subsets->benchmark;
            if (!any) invalid(fmt::format("no records file and no pair queries '{}'", plan.subsets->benchmark));
        }
    }
    if (plan.metrics) {
        if (!plan.subsets) invalid("metrics needs a subsets section");
        if (!plan.metrics->classification && !plan.metrics->ranks) invalid("metrics needs classification or ranks");
        if (plan.metrics->trials < 1) invalid("metrics.trials must be at least 1");
    }
}

nlohmann::ordered_json plan_json(const AuditPlan& plan) {
    using ordered_json = nlohmann::ordered_json;
    ordered_json j;
    ordered_json stores = ordered_json::array();
    for (const auto& s : plan.stores) {
        stores.push_back({{"name", s.name}, {"path", s.path_text}, {"role", std::string(to_string(s.role))}});
    }
    j["stores"] = std::move(stores);
    ordered_json pairs = ordered_json::array();
    for (const auto& p : plan.pairs) {
        pairs.push_back({{"query", p.query},
                         {"collection", p.collection},
                         {"coverage", std::string(to_string(p.coverage))},
                         {"exclusion", p.exclusion}});
    }
    j["pairs"] = std::move(pairs);
    j["thresholds"] = {{"tau_soft", plan.thresholds.tau_soft}, {"tau_hard", plan.thresholds.tau_hard}};
    j["k"] = plan.k;
    j["partition_size"] = plan.partition_size;
    j["seed"] = plan.seed;
    return j;
}

}  // namespace leakscan
