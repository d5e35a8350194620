#pragma once

// Audit artifacts: leakage matrices, per-audit record and pair CSVs, plot
// data and a machine-readable summary. All output is a pure function of the
// inputs; re-running on identical inputs gives identical bytes.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscan/leakage.hpp"
#include "leakscan/vecstore.hpp"

namespace leakscan {

struct MatrixCell {
    double hard_percent = 0.0;
    double soft_percent = 0.0;
};

// Rows are collection (training corpus) datasets, columns are query
// (benchmark split) datasets. Absent cells stay absent; they are never 0.
struct LeakageMatrix {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::optional<MatrixCell>> cells;  // row-major

    const std::optional<MatrixCell>& at(std::size_t row, std::size_t col) const {
        return cells[row * cols.size() + col];
    }
};

// Rows and columns follow the given orders; names missing from them are
// appended in first-seen order. Throws Error(Conflict) when two reports share
// a (collection, query) cell.
LeakageMatrix assemble_matrix(const std::vector<LeakageReport>& reports,
                              const std::vector<std::string>& row_order = {},
                              const std::vector<std::string>& col_order = {});

// hard_rate + soft_rate, in percent.
double total_leakage(const LeakageReport& report);

struct LeakedPair {
    std::string query_path;
    std::string match_path;
    float similarity = 0.0f;
    Degree degree = Degree::None;
};

// Hard and soft records with their image paths, in query order.
std::vector<LeakedPair> leaked_pairs(const std::vector<LeakageRecord>& records, const Manifest& query_manifest,
                                     const Manifest& collection_manifest);

struct AuditResult {
    std::string pair;  // file-name key, see pair_key
    LeakageReport report;  // n_queries == 0 when there are no records
    std::vector<LeakageRecord> records;
    std::vector<LeakedPair> pairs;
};

// "<query>__<collection>" with characters outside [A-Za-z0-9._-] mapped
// to '_'.
std::string pair_key(const std::string& query, const std::string& collection);

// Report over the records (zero counts when empty) and the leaked pairs.
AuditResult make_audit_result(std::string pair, std::vector<LeakageRecord> records,
                              const ThresholdConfig& thresholds, CoverageMode coverage,
                              const Manifest& query_manifest, const Manifest& collection_manifest,
                              std::string query_dataset, std::string collection_dataset);

nlohmann::ordered_json report_json(const LeakageReport& report);

// Writes into `directory` (created if needed):
//   summary.json              plan echo, thresholds, per-audit reports, matrix
//   matrix_hard.csv           percentages, 2 decimals, "NA" for absent cells
//   matrix_soft.csv
//   rates.csv                 one row per audit, 2-decimal percentages
//   records_<pair>.csv        per-query verdicts
//   pairs_<pair>.csv          query_path,match_path,similarity,degree
//   similarity_hist_<pair>.csv  best-match similarity histogram
// Record, pair and histogram files are skipped for audits without records.
// Returns the files written, in write order.
std::vector<std::filesystem::path> emit(const std::vector<AuditResult>& audits, const LeakageMatrix& matrix,
                                        const nlohmann::ordered_json& plan,
                                        const std::filesystem::path& directory);

// Parsed matrix CSV: rows, cols and row-major cells (nullopt for "NA").
struct MatrixTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::optional<double>> cells;
};
MatrixTable read_matrix_csv(const std::filesystem::path& path);

}  // namespace leakscan
