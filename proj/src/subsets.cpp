#include "leakscan/subsets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "leakscan/csv.hpp"
#include "leakscan/error.hpp"
#include "leakscan/sampling.hpp"

namespace leakscan {

namespace {

std::string list_ids(const std::vector<std::string>& ids) {
    constexpr std::size_t kShown = 10;
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < kShown; ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    if (ids.size() > kShown) out += fmt::format(" and {} more", ids.size() - kShown);
    return out;
}

// Sampled positions mapped back to ids, kept in parent order.
std::vector<std::string> sample_ids(const std::vector<std::string>& parent, std::size_t k, std::uint64_t seed) {
    SplitMix64 rng(seed);
    auto pos = sample_without_replacement(parent.size(), k, rng);
    std::sort(pos.begin(), pos.end());
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t p : pos) out.push_back(parent[p]);
    return out;
}

const SubsetSpec& find_original(const std::vector<SubsetSpec>& subsets) {
    for (const auto& s : subsets) {
        if (s.kind == SubsetKind::Original) return s;
    }
    fail(ErrorKind::Parameter, "subset list has no Original subset to compute gains against");
}

std::string_view degree_title(Degree d) noexcept { return d == Degree::Hard ? "Hard" : "Soft"; }

void check_coverage(const std::vector<SubsetSpec>& subsets, auto&& has) {
    std::vector<std::string> missing;
    for (const auto& s : subsets) {
        for (const auto& id : s.ids) {
            if (!has(id)) missing.push_back(id);
        }
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    if (!missing.empty()) {
        fail(ErrorKind::Coverage, fmt::format("{} subset ids have no prediction: {}", missing.size(), list_ids(missing)));
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    out << text;
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

}  // namespace

std::string_view slug(SubsetKind kind) noexcept {
    switch (kind) {
        case SubsetKind::Original: return "original";
        case SubsetKind::Leaked: return "leaked";
        case SubsetKind::NonLeaked: return "nonleaked";
        case SubsetKind::NonLeakedSample: return "nonleaked-sample";
        case SubsetKind::Random: return "random";
        case SubsetKind::SameLabel: return "same-label";
        case SubsetKind::DifferentLabel: return "different-label";
    }
    return "original";
}

std::optional<SubsetKind> parse_subset_kind(std::string_view s) noexcept {
    for (auto k : {SubsetKind::Original, SubsetKind::Leaked, SubsetKind::NonLeaked, SubsetKind::NonLeakedSample,
                   SubsetKind::Random, SubsetKind::SameLabel, SubsetKind::DifferentLabel}) {
        if (slug(k) == s) return k;
    }
    return std::nullopt;
}

std::string SubsetSpec::name() const {
    const auto d = degree_title(degree);
    switch (kind) {
        case SubsetKind::Original: return "Original";
        case SubsetKind::Leaked: return fmt::format("Leaked{}", d);
        case SubsetKind::NonLeaked: return fmt::format("NonLeaked{}", d);
        case SubsetKind::NonLeakedSample: return fmt::format("NonLeakedSample{}", d);
        case SubsetKind::Random: return fmt::format("Random{}", d);
        case SubsetKind::SameLabel: return fmt::format("SameLabel{}", d);
        case SubsetKind::DifferentLabel: return fmt::format("DifferentLabel{}", d);
    }
    return "Original";
}

SubsetBuild build_subsets(const Manifest& benchmark, const std::vector<LeakageRecord>& records, Degree degree,
                          std::uint64_t seed, const SubsetOptions& options) {
    if (degree == Degree::None) fail(ErrorKind::Parameter, "subsets are built for the hard or soft degree");
    std::unordered_map<std::string, const LeakageRecord*> by_id;
    by_id.reserve(records.size());
    for (const auto& r : records) by_id.emplace(r.query_id, &r);

    const std::size_t n = benchmark.size();
    auto make = [&](SubsetKind kind) {
        SubsetSpec s;
        s.kind = kind;
        s.degree = degree;
        s.parent_size = n;
        return s;
    };
    SubsetSpec original = make(SubsetKind::Original);
    SubsetSpec leaked = make(SubsetKind::Leaked);
    SubsetSpec nonleaked = make(SubsetKind::NonLeaked);
    SubsetSpec same = make(SubsetKind::SameLabel);
    SubsetSpec different = make(SubsetKind::DifferentLabel);
    bool agreement_known = true;
    std::vector<std::string> missing;
    for (const auto& rec : benchmark.records()) {
        original.ids.push_back(rec.id);
        const auto it = by_id.find(rec.id);
        if (it == by_id.end()) {
            missing.push_back(rec.id);
            continue;
        }
        const LeakageRecord& r = *it->second;
        if (r.degree != degree) {
            nonleaked.ids.push_back(rec.id);
            continue;
        }
        leaked.ids.push_back(rec.id);
        switch (r.label_agreement) {
            case LabelAgreement::Same: same.ids.push_back(rec.id); break;
            case LabelAgreement::Different: different.ids.push_back(rec.id); break;
            case LabelAgreement::Unknown: agreement_known = false; break;
        }
    }
    if (!missing.empty()) {
        fail(ErrorKind::Coverage, fmt::format("{} benchmark ids have no leakage record: {}", missing.size(),
                                              list_ids(missing)));
    }

    SubsetBuild out;
    const std::size_t a = leaked.size();
    if (a == 0) {
        out.warnings.push_back(fmt::format("no {} leaked ids: Leaked and Random subsets are empty", to_string(degree)));
    }
    SubsetSpec random = make(SubsetKind::Random);
    random.seed = seed;
    random.ids = sample_ids(original.ids, a, seed);

    out.subsets.push_back(std::move(original));
    out.subsets.push_back(leaked);
    if (options.size_matched_nonleaked) {
        SubsetSpec sample = make(SubsetKind::NonLeakedSample);
        const std::uint64_t s = derive_seed(seed, fnv1a64("nonleaked-sample"));
        sample.seed = s;
        sample.ids = sample_ids(nonleaked.ids, std::min(a, nonleaked.size()), s);
        out.subsets.push_back(std::move(nonleaked));
        out.subsets.push_back(std::move(sample));
    } else {
        out.subsets.push_back(std::move(nonleaked));
    }
    out.subsets.push_back(std::move(random));
    if (a > 0 && benchmark.has_labels()) {
        if (agreement_known) {
            out.subsets.push_back(std::move(same));
            out.subsets.push_back(std::move(different));
        } else {
            out.warnings.push_back("some leaked ids lack label agreement: label refinements skipped");
        }
    }
    return out;
}

std::filesystem::path subset_file_name(const std::string& benchmark, const SubsetSpec& subset) {
    return fmt::format("{}.{}.{}.ids", benchmark, to_string(subset.degree), slug(subset.kind));
}

std::vector<std::filesystem::path> write_subset_files(const std::vector<SubsetSpec>& subsets,
                                                      const std::string& benchmark,
                                                      const std::filesystem::path& directory) {
    std::vector<std::filesystem::path> written;
    for (const auto& s : subsets) {
        std::string text;
        for (const auto& id : s.ids) {
            text += id;
            text += '\n';
        }
        const auto path = directory / subset_file_name(benchmark, s);
        write_text(path, text);
        written.push_back(path);
    }
    return written;
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Storage, fmt::format("{}: cannot open", path.string()));
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

SubsetMetrics subset_metrics(const std::unordered_map<std::string, bool>& correct,
                             const std::vector<SubsetSpec>& subsets) {
    const SubsetSpec& original = find_original(subsets);
    check_coverage(subsets, [&](const std::string& id) { return correct.count(id) > 0; });
    auto accuracy = [&](const SubsetSpec& s) {
        std::size_t hits = 0;
        for (const auto& id : s.ids) hits += correct.at(id);
        return 100.0 * static_cast<double>(hits) / static_cast<double>(s.size());
    };
    SubsetMetrics out;
    if (original.ids.empty()) fail(ErrorKind::EmptyEvaluation, "Original subset is empty");
    const double base = accuracy(original);
    for (const auto& s : subsets) {
        if (s.ids.empty()) {
            out.warnings.push_back(fmt::format("{} is empty: accuracy undefined", s.name()));
            continue;
        }
        SubsetMetric m;
        m.subset = s.name();
        m.metric = "accuracy";
        m.size = s.size();
        m.value = accuracy(s);
        m.gain = s.kind == SubsetKind::Original ? 0.0 : m.value - base;
        out.rows.push_back(std::move(m));
    }
    return out;
}

SubsetMetrics repeated_retrieval_eval(const std::vector<SubsetSpec>& subsets,
                                      const std::unordered_map<std::string, std::size_t>& rank_of_true_caption,
                                      const RepeatedTrialConfig& config) {
    if (config.trials < 1) fail(ErrorKind::Parameter, "trials must be at least 1");
    if (config.per_trial_queries < 1) fail(ErrorKind::Parameter, "per-trial query count must be at least 1");
    if (config.ks.empty()) fail(ErrorKind::Parameter, "no recall cutoffs requested");
    const SubsetSpec& original = find_original(subsets);
    check_coverage(subsets, [&](const std::string& id) { return rank_of_true_caption.count(id) > 0; });
    for (const auto& [id, rank] : rank_of_true_caption) {
        if (rank < 1 || (config.caption_collection_size && rank > config.caption_collection_size)) {
            fail(ErrorKind::InvalidInput, fmt::format("query '{}' has rank {} outside [1, {}]", id, rank,
                                                      config.caption_collection_size));
        }
    }

    struct Stats {
        std::vector<double> mean, stddev;
        bool full_inclusion = false;
    };
    auto evaluate = [&](const SubsetSpec& s) {
        const std::size_t nk = config.ks.size();
        const bool full = s.size() <= config.per_trial_queries;
        const std::size_t per_trial = full ? s.size() : config.per_trial_queries;
        std::vector<std::vector<double>> values(nk, std::vector<double>(config.trials));
        const std::uint64_t subset_seed = derive_seed(config.seed, fnv1a64(s.name()));
        for (std::size_t t = 0; t < config.trials; ++t) {
            std::vector<std::size_t> pos;
            if (full) {
                pos.resize(s.size());
                std::iota(pos.begin(), pos.end(), std::size_t{0});
            } else {
                SplitMix64 rng(derive_seed(subset_seed, t));
                pos = sample_without_replacement(s.size(), per_trial, rng);
            }
            for (std::size_t ki = 0; ki < nk; ++ki) {
                std::size_t hits = 0;
                for (std::size_t p : pos) hits += rank_of_true_caption.at(s.ids[p]) <= config.ks[ki];
                values[ki][t] = 100.0 * static_cast<double>(hits) / static_cast<double>(per_trial);
            }
        }
        Stats st;
        st.full_inclusion = full;
        for (std::size_t ki = 0; ki < nk; ++ki) {
            const auto& v = values[ki];
            double sum = 0.0;
            for (double x : v) sum += x;
            const double mean = sum / static_cast<double>(v.size());
            double sq = 0.0;
            for (double x : v) sq += (x - mean) * (x - mean);
            st.mean.push_back(mean);
            st.stddev.push_back(v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0);
        }
        return st;
    };

    SubsetMetrics out;
    if (original.ids.empty()) fail(ErrorKind::EmptyEvaluation, "Original subset is empty");
    const Stats base = evaluate(original);
    for (const auto& s : subsets) {
        if (s.ids.empty()) {
            out.warnings.push_back(fmt::format("{} is empty: recall undefined", s.name()));
            continue;
        }
        const Stats st = s.kind == SubsetKind::Original ? base : evaluate(s);
        if (st.full_inclusion) {
            out.warnings.push_back(fmt::format("{} has {} ids, fewer than {} per trial: every trial uses all ids",
                                               s.name(), s.size(), config.per_trial_queries));
        }
        for (std::size_t ki = 0; ki < config.ks.size(); ++ki) {
            SubsetMetric m;
            m.subset = s.name();
            m.metric = fmt::format("R@{}", config.ks[ki]);
            m.size = s.size();
            m.value = st.mean[ki];
            m.gain = s.kind == SubsetKind::Original ? 0.0 : st.mean[ki] - base.mean[ki];
            m.trials = config.trials;
            if (config.trials > 1) m.stddev = st.stddev[ki];
            m.full_inclusion = st.full_inclusion;
            out.rows.push_back(std::move(m));
        }
    }
    return out;
}

std::unordered_map<std::string, bool> read_classification_predictions(const std::filesystem::path& path,
                                                                      const Manifest& benchmark) {
    std::unordered_map<std::string, bool> correct;
    for (auto& row : csv::read_table(path, {"query_id", "predicted_label"})) {
        const auto idx = benchmark.find(row[0]);
        if (!idx) fail(ErrorKind::Schema, fmt::format("{}: id '{}' is not in the benchmark manifest", path.string(), row[0]));
        const auto& label = benchmark[*idx].label;
        if (!label) fail(ErrorKind::UnknownLabel, fmt::format("benchmark id '{}' has no label", row[0]));
        if (!correct.emplace(row[0], row[1] == *label).second) {
            fail(ErrorKind::Schema, fmt::format("{}: duplicate prediction for '{}'", path.string(), row[0]));
        }
    }
    return correct;
}

std::unordered_map<std::string, std::size_t> read_caption_ranks(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::size_t> ranks;
    for (auto& row : csv::read_table(path, {"query_id", "rank_of_true_caption"})) {
        std::size_t rank = 0;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(row[1], &used);
            if (used != row[1].size() || v < 1) throw std::invalid_argument("rank");
            rank = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            fail(ErrorKind::Format, fmt::format("{}: '{}' has an invalid rank '{}'", path.string(), row[0], row[1]));
        }
        if (!ranks.emplace(row[0], rank).second) {
            fail(ErrorKind::Schema, fmt::format("{}: duplicate rank for '{}'", path.string(), row[0]));
        }
    }
    return ranks;
}

std::string format_percent(double value) { return fmt::format("{:.2f}", value); }

void write_metrics(const SubsetMetrics& metrics, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path) {
    std::string text = "subset,metric,size,value,gain,trials,stddev,full_inclusion\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& m : metrics.rows) {
        text += fmt::format("{},{},{},{},{},{},{},{}\n", csv::escape(m.subset), csv::escape(m.metric), m.size,
                            format_percent(m.value), format_percent(m.gain), m.trials,
                            m.stddev ? format_percent(*m.stddev) : "", m.full_inclusion ? 1 : 0);
        nlohmann::ordered_json j;
        j["subset"] = m.subset;
        j["metric"] = m.metric;
        j["size"] = m.size;
        j["value"] = m.value;
        j["gain"] = m.gain;
        j["trials"] = m.trials;
        j["stddev"] = m.stddev ? nlohmann::ordered_json(*m.stddev) : nlohmann::ordered_json(nullptr);
        j["full_inclusion"] = m.full_inclusion;
        rows.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["rows"] = std::move(rows);
    doc["warnings"] = metrics.warnings;
    write_text(csv_path, text);
    write_text(json_path, doc.dump(2) + "\n");
}

}  // namespace leakscan
