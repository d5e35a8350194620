#pragma once

// Embedding matrices, dataset manifests and the LKEM on-disk store.
//
// LKEM layout (little-endian):
//   offset  0  magic "LKEM"
//   offset  4  u32 format version (1)
//   offset  8  u64 row count
//   offset 16  u32 dim
//   offset 20  u8  dtype (1 = float32)
//   offset 21  u8  normalized flag
//   offset 22  14 reserved zero bytes
//   offset 36  count * dim float32, row-major
//
// The manifest lives in a JSON Lines sidecar next to the binary file
// (see manifest_path_for); row i of the matrix belongs to record i.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace leakscan {

inline constexpr std::uint32_t kLkemVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kLkemHeaderSize = 36;
inline constexpr double kNormTolerance = 1e-4;

// Immutable row-major float32 matrix. Storage is either an owned buffer or
// a read-only file mapping; copies and row views share the same storage.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    // Takes ownership of `values` (count * dim floats). Rejects non-finite
    // values, and rows off the unit sphere when `normalized` is set.
    static EmbeddingMatrix from_values(std::vector<float> values, std::size_t dim,
                                       bool normalized = false);

    // Wraps externally owned memory; `owner` keeps it alive.
    static EmbeddingMatrix from_shared(std::shared_ptr<const void> owner, const float* data,
                                       std::size_t count, std::size_t dim, bool normalized);

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    bool normalized() const noexcept { return normalized_; }
    bool empty() const noexcept { return count_ == 0; }

    const float* data() const noexcept { return data_; }
    std::span<const float> values() const noexcept { return {data_, count_ * dim_}; }
    std::span<const float> row(std::size_t i) const noexcept {
        return {data_ + i * dim_, dim_};
    }

    // Rows [begin, end) as a view over the same storage.
    EmbeddingMatrix slice(std::size_t begin, std::size_t end) const;

    // Full scan of the invariants: finite values, unit norms when normalized.
    void validate() const;

private:
    std::shared_ptr<const void> owner_;
    const float* data_ = nullptr;
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    bool normalized_ = false;
};

struct ManifestRecord {
    std::string id;
    std::string path;
    std::optional<std::string> label;
    std::optional<std::string> caption;
    std::string split;
    std::string dataset;
    // Free-form encoder/preprocessing description; not interpreted.
    std::optional<std::string> provenance;

    bool operator==(const ManifestRecord&) const = default;
};

class Manifest {
public:
    Manifest() = default;
    explicit Manifest(std::vector<ManifestRecord> records);

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const ManifestRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<ManifestRecord>& records() const noexcept { return records_; }

    std::optional<std::size_t> find(const std::string& id) const;
    bool has_labels() const;

    bool operator==(const Manifest& other) const { return records_ == other.records_; }

private:
    std::vector<ManifestRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ThresholdConfig {
    float tau_soft = 0.95f;
    float tau_hard = 0.98f;

    void validate() const;
};

// "<dir>/<stem>.lkem" -> "<dir>/<stem>.jsonl"
std::filesystem::path manifest_path_for(const std::filesystem::path& store_path);

struct StoreInfo {
    std::filesystem::path store_path;
    std::filesystem::path manifest_path;
    std::size_t count = 0;
    std::size_t dim = 0;
    bool normalized = false;
};

struct Store {
    EmbeddingMatrix matrix;
    Manifest manifest;
};

struct LoadOptions {
    // Scan every row for NaN/inf and, for normalized stores, the unit-norm
    // invariant. One sequential pass over the data section.
    bool verify = true;
};

StoreInfo write_store(const EmbeddingMatrix& matrix, const Manifest& manifest,
                      const std::filesystem::path& path);
Store load_store(const std::filesystem::path& path, LoadOptions options = {});

// Memory-maps only the binary part of a store.
EmbeddingMatrix load_matrix(const std::filesystem::path& path, LoadOptions options = {});

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Streams rows into an LKEM file without holding the matrix in memory.
class StoreWriter {
public:
    StoreWriter(std::filesystem::path path, std::size_t dim, bool normalized);
    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;
    ~StoreWriter();

    void append(std::span<const float> row);
    std::size_t count() const noexcept { return count_; }

    // Patches the header and writes the manifest sidecar.
    StoreInfo finish(const Manifest& manifest);

private:
    void write_header();

    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t dim_;
    bool normalized_;
    std::size_t count_ = 0;
    bool finished_ = false;
};

// Random row access through positional reads. Counts what it reads, which
// makes it the instrumented counterpart of the mapped loader.
class RowReader {
public:
    explicit RowReader(const std::filesystem::path& path);
    RowReader(const RowReader&) = delete;
    RowReader& operator=(const RowReader&) = delete;
    ~RowReader();

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    bool normalized() const noexcept { return normalized_; }

    std::vector<float> read_row(std::size_t i);

    std::uint64_t bytes_read() const noexcept { return bytes_read_; }
    std::uint64_t rows_read() const noexcept { return rows_read_; }

private:
    int fd_ = -1;
    std::filesystem::path path_;
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    bool normalized_ = false;
    std::uint64_t bytes_read_ = 0;
    std::uint64_t rows_read_ = 0;
};

// Unit-normalizes every row (float64 norm). A zero row is an error naming
// the row's manifest id when a manifest is given.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& matrix, const Manifest* manifest = nullptr);

}  // namespace leakscan
