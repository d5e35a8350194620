#include "leakscan/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "leakscan/csv.hpp"
#include "leakscan/error.hpp"

namespace leakscan {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kHistBins = 200;  // [-1, 1] in steps of 0.01

std::size_t index_of(std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    names.push_back(name);
    return names.size() - 1;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path.string()));
    out << text;
    out.close();
    if (!out) fail(ErrorKind::Storage, fmt::format("{}: write failed", path.string()));
}

std::string matrix_csv(const LeakageMatrix& m, bool hard) {
    std::string text = "collection";
    for (const auto& c : m.cols) text += "," + csv::escape(c);
    text += '\n';
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        text += csv::escape(m.rows[r]);
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            const auto& cell = m.at(r, c);
            text += ',';
            text += cell ? fmt::format("{:.2f}", hard ? cell->hard_percent : cell->soft_percent) : "NA";
        }
        text += '\n';
    }
    return text;
}

ordered_json matrix_json(const LeakageMatrix& m) {
    ordered_json hard = ordered_json::array(), soft = ordered_json::array();
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        ordered_json hr = ordered_json::array(), sr = ordered_json::array();
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            const auto& cell = m.at(r, c);
            hr.push_back(cell ? ordered_json(cell->hard_percent) : ordered_json(nullptr));
            sr.push_back(cell ? ordered_json(cell->soft_percent) : ordered_json(nullptr));
        }
        hard.push_back(std::move(hr));
        soft.push_back(std::move(sr));
    }
    ordered_json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["hard_percent"] = std::move(hard);
    j["soft_percent"] = std::move(soft);
    return j;
}

std::string histogram_csv(const std::vector<LeakageRecord>& records) {
    std::vector<std::size_t> counts(kHistBins, 0);
    for (const auto& r : records) {
        if (r.exclusion_exhausted) continue;
        const int bin = static_cast<int>(std::floor((static_cast<double>(r.best_similarity) + 1.0) * 100.0));
        ++counts[static_cast<std::size_t>(std::clamp(bin, 0, kHistBins - 1))];
    }
    std::string text = "bin_low,bin_high,count\n";
    for (int b = 0; b < kHistBins; ++b) {
        text += fmt::format("{:.2f},{:.2f},{}\n", -1.0 + b * 0.01, -1.0 + (b + 1) * 0.01, counts[b]);
    }
    return text;
}

}  // namespace

LeakageMatrix assemble_matrix(const std::vector<LeakageReport>& reports, const std::vector<std::string>& row_order,
                              const std::vector<std::string>& col_order) {
    LeakageMatrix m;
    m.rows = row_order;
    m.cols = col_order;
    for (const auto& r : reports) {
        index_of(m.rows, r.collection_dataset);
        index_of(m.cols, r.query_dataset);
    }
    m.cells.assign(m.rows.size() * m.cols.size(), std::nullopt);
    for (const auto& r : reports) {
        const std::size_t row = index_of(m.rows, r.collection_dataset);
        const std::size_t col = index_of(m.cols, r.query_dataset);
        auto& cell = m.cells[row * m.cols.size() + col];
        if (cell) {
            fail(ErrorKind::Conflict, fmt::format("two reports for collection '{}' and queries '{}'",
                                                  r.collection_dataset, r.query_dataset));
        }
        cell = MatrixCell{r.hard_rate * 100.0, r.soft_rate * 100.0};
    }
    return m;
}

double total_leakage(const LeakageReport& report) { return (report.hard_rate + report.soft_rate) * 100.0; }

std::vector<LeakedPair> leaked_pairs(const std::vector<LeakageRecord>& records, const Manifest& query_manifest,
                                     const Manifest& collection_manifest) {
    std::vector<LeakedPair> pairs;
    for (const auto& r : records) {
        if (r.degree == Degree::None) continue;
        if (r.query_row >= query_manifest.size() || r.match_row >= collection_manifest.size()) {
            fail(ErrorKind::Schema, fmt::format("record for '{}' points outside its manifests", r.query_id));
        }
        pairs.push_back({query_manifest[r.query_row].path, collection_manifest[r.match_row].path,
                         r.best_similarity, r.degree});
    }
    return pairs;
}

std::string pair_key(const std::string& query, const std::string& collection) {
    std::string key = query + "__" + collection;
    for (char& c : key) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return key;
}

AuditResult make_audit_result(std::string pair, std::vector<LeakageRecord> records,
                              const ThresholdConfig& thresholds, CoverageMode coverage,
                              const Manifest& query_manifest, const Manifest& collection_manifest,
                              std::string query_dataset, std::string collection_dataset) {
    AuditResult a;
    a.pair = std::move(pair);
    if (records.empty()) {
        a.report.thresholds = thresholds;
        a.report.coverage = coverage;
        a.report.query_dataset = std::move(query_dataset);
        a.report.collection_dataset = std::move(collection_dataset);
    } else {
        a.report = rates(records, thresholds, coverage, std::move(query_dataset), std::move(collection_dataset));
        a.pairs = leaked_pairs(records, query_manifest, collection_manifest);
    }
    a.records = std::move(records);
    return a;
}

ordered_json report_json(const LeakageReport& r) {
    ordered_json j;
    j["query_dataset"] = r.query_dataset;
    j["collection_dataset"] = r.collection_dataset;
    j["coverage"] = std::string(to_string(r.coverage));
    j["n_queries"] = r.n_queries;
    j["n_hard"] = r.n_hard;
    j["n_soft"] = r.n_soft;
    j["n_exclusion_exhausted"] = r.n_exhausted;
    j["hard_rate"] = r.hard_rate;
    j["soft_rate"] = r.soft_rate;
    j["hard_percent"] = fmt::format("{:.2f}", r.hard_rate * 100.0);
    j["soft_percent"] = fmt::format("{:.2f}", r.soft_rate * 100.0);
    j["total_percent"] = fmt::format("{:.2f}", total_leakage(r));
    j["tau_soft"] = r.thresholds.tau_soft;
    j["tau_hard"] = r.thresholds.tau_hard;
    return j;
}

std::vector<std::filesystem::path> emit(const std::vector<AuditResult>& audits, const LeakageMatrix& matrix,
                                        const ordered_json& plan, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) fail(ErrorKind::Storage, fmt::format("{}: cannot create directory: {}", directory.string(), ec.message()));
    std::map<std::string, int> seen;
    for (const auto& a : audits) {
        if (seen[a.pair]++) fail(ErrorKind::Conflict, fmt::format("duplicate audit pair '{}'", a.pair));
    }

    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        const auto path = directory / name;
        write_text(path, text);
        written.push_back(path);
    };

    ordered_json summary;
    summary["plan"] = plan;
    ordered_json audit_list = ordered_json::array();
    for (const auto& a : audits) {
        ordered_json j;
        j["pair"] = a.pair;
        j.update(report_json(a.report));
        j["leaked_pairs"] = a.pairs.size();
        audit_list.push_back(std::move(j));
    }
    summary["audits"] = std::move(audit_list);
    summary["matrix"] = matrix_json(matrix);
    put("summary.json", summary.dump(2) + "\n");
    put("matrix_hard.csv", matrix_csv(matrix, true));
    put("matrix_soft.csv", matrix_csv(matrix, false));

    std::string rates_text = "pair,query_dataset,collection_dataset,coverage,n_queries,hard_percent,soft_percent,total_percent\n";
    for (const auto& a : audits) {
        const auto& r = a.report;
        rates_text += fmt::format("{},{},{},{},{},{:.2f},{:.2f},{:.2f}\n", csv::escape(a.pair),
                                  csv::escape(r.query_dataset), csv::escape(r.collection_dataset),
                                  to_string(r.coverage), r.n_queries, r.hard_rate * 100.0, r.soft_rate * 100.0,
                                  total_leakage(r));
    }
    put("rates.csv", rates_text);

    for (const auto& a : audits) {
        if (a.records.empty()) continue;
        const auto records_path = directory / fmt::format("records_{}.csv", a.pair);
        write_records_csv(a.records, records_path);
        written.push_back(records_path);
        std::string pairs_text = "query_path,match_path,similarity,degree\n";
        for (const auto& p : a.pairs) {
            pairs_text += fmt::format("{},{},{:.6f},{}\n", csv::escape(p.query_path), csv::escape(p.match_path),
                                      p.similarity, to_string(p.degree));
        }
        put(fmt::format("pairs_{}.csv", a.pair), pairs_text);
        put(fmt::format("similarity_hist_{}.csv", a.pair), histogram_csv(a.records));
    }
    return written;
}

MatrixTable read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Storage, fmt::format("{}: cannot open", path.string()));
    csv::Reader reader(in, path.string());
    const auto header = reader.next();
    if (!header || header->empty() || header->front() != "collection") {
        fail(ErrorKind::Schema, fmt::format("{}: not a leakage matrix", path.string()));
    }
    MatrixTable t;
    t.cols.assign(header->begin() + 1, header->end());
    while (auto row = reader.next()) {
        if (row->size() != header->size()) fail(ErrorKind::Schema, fmt::format("{}: ragged row", path.string()));
        t.rows.push_back((*row)[0]);
        for (std::size_t c = 1; c < row->size(); ++c) {
            if ((*row)[c] == "NA") {
                t.cells.push_back(std::nullopt);
            } else {
                t.cells.push_back(std::stod((*row)[c]));
            }
        }
    }
    return t;
}

}  // namespace leakscan
