#include "leakscan/vecstore.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "leakscan/error.hpp"
#include "leakscan/simd/kernels.hpp"

namespace leakscan {

static_assert(std::endian::native == std::endian::little,
              "LKEM stores are memory-mapped in place and require a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'L', 'K', 'E', 'M'};

struct Header {
    std::uint64_t count = 0;
    std::uint32_t dim = 0;
    bool normalized = false;
};

std::array<unsigned char, kLkemHeaderSize> encode_header(const Header& h) {
    std::array<unsigned char, kLkemHeaderSize> bytes{};
    std::memcpy(bytes.data(), kMagic.data(), 4);
    std::memcpy(bytes.data() + 4, &kLkemVersion, 4);
    std::memcpy(bytes.data() + 8, &h.count, 8);
    std::memcpy(bytes.data() + 16, &h.dim, 4);
    bytes[20] = kDtypeFloat32;
    bytes[21] = h.normalized ? 1 : 0;
    return bytes;
}

std::uint64_t data_bytes(std::uint64_t count, std::uint32_t dim, const std::filesystem::path& path) {
    const std::uint64_t per_row = std::uint64_t{dim} * sizeof(float);
    if (count != 0 && per_row > (std::numeric_limits<std::uint64_t>::max() - kLkemHeaderSize) / count) {
        fail(ErrorKind::Format, fmt::format("{}: header shape {}x{} overflows", path.string(), count, dim));
    }
    return count * per_row;
}

// Parses and checks a header against the actual file size.
Header decode_header(const unsigned char* bytes, std::uint64_t file_size,
                     const std::filesystem::path& path) {
    if (file_size < kMagic.size() || std::memcmp(bytes, kMagic.data(), kMagic.size()) != 0) {
        fail(ErrorKind::Format, fmt::format("{}: not an LKEM store (bad magic)", path.string()));
    }
    if (file_size < kLkemHeaderSize) {
        fail(ErrorKind::Corruption, fmt::format("{}: truncated header", path.string()));
    }
    std::uint32_t version = 0;
    std::memcpy(&version, bytes + 4, 4);
    if (version != kLkemVersion) {
        fail(ErrorKind::Format, fmt::format("{}: unsupported LKEM version {}", path.string(), version));
    }
    Header h;
    std::memcpy(&h.count, bytes + 8, 8);
    std::memcpy(&h.dim, bytes + 16, 4);
    if (bytes[20] != kDtypeFloat32) {
        fail(ErrorKind::Format, fmt::format("{}: unsupported dtype code {}", path.string(), bytes[20]));
    }
    if (bytes[21] > 1) {
        fail(ErrorKind::Format, fmt::format("{}: invalid normalized flag {}", path.string(), bytes[21]));
    }
    h.normalized = bytes[21] == 1;
    if (h.dim == 0) fail(ErrorKind::Format, fmt::format("{}: dim is zero", path.string()));

    const std::uint64_t expected = kLkemHeaderSize + data_bytes(h.count, h.dim, path);
    if (file_size < expected) {
        fail(ErrorKind::Corruption,
             fmt::format("{}: data section truncated ({} of {} bytes)", path.string(),
                         file_size - kLkemHeaderSize, expected - kLkemHeaderSize));
    }
    if (file_size > expected) {
        fail(ErrorKind::Corruption,
             fmt::format("{}: {} trailing bytes after data section", path.string(), file_size - expected));
    }
    return h;
}

class FileDescriptor {
public:
    explicit FileDescriptor(const std::filesystem::path& path) : fd_(::open(path.c_str(), O_RDONLY | O_CLOEXEC)) {
        if (fd_ < 0) {
            fail(ErrorKind::Storage, fmt::format("{}: cannot open: {}", path.string(), std::strerror(errno)));
        }
    }
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;
    ~FileDescriptor() { ::close(fd_); }

    int get() const noexcept { return fd_; }
    int release() noexcept { return std::exchange(fd_, -1); }

private:
    int fd_;
};

std::uint64_t file_size(int fd, const std::filesystem::path& path) {
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        fail(ErrorKind::Storage, fmt::format("{}: stat failed: {}", path.string(), std::strerror(errno)));
    }
    return static_cast<std::uint64_t>(st.st_size);
}

// Read-only private mapping of a whole file.
class Mapping {
public:
    Mapping(void* base, std::size_t size) : base_(base), size_(size) {}
    Mapping(const Mapping&) = delete;
    Mapping& operator=(const Mapping&) = delete;
    ~Mapping() {
        if (base_ != nullptr) ::munmap(base_, size_);
    }

    const unsigned char* bytes() const noexcept { return static_cast<const unsigned char*>(base_); }

private:
    void* base_;
    std::size_t size_;
};

void pread_exact(int fd, void* buffer, std::size_t size, std::uint64_t offset,
                 const std::filesystem::path& path) {
    auto* out = static_cast<unsigned char*>(buffer);
    while (size > 0) {
        const ssize_t got = ::pread(fd, out, size, static_cast<off_t>(offset));
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) {
            fail(ErrorKind::Corruption, fmt::format("{}: short read at offset {}", path.string(), offset));
        }
        out += got;
        offset += static_cast<std::uint64_t>(got);
        size -= static_cast<std::size_t>(got);
    }
}

void check_finite(std::span<const float> values, std::size_t dim) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::InvalidInput,
                 fmt::format("non-finite value at row {}, column {}", i / dim, i % dim));
        }
    }
}

}  // namespace

EmbeddingMatrix EmbeddingMatrix::from_values(std::vector<float> values, std::size_t dim, bool normalized) {
    if (dim == 0) fail(ErrorKind::Schema, "embedding dim must be positive");
    if (values.size() % dim != 0) {
        fail(ErrorKind::Schema,
             fmt::format("{} values do not form rows of dim {}", values.size(), dim));
    }
    auto owned = std::make_shared<const std::vector<float>>(std::move(values));
    const float* data = owned->data();
    const std::size_t count = owned->size() / dim;
    EmbeddingMatrix m = from_shared(std::move(owned), data, count, dim, normalized);
    m.validate();
    return m;
}

EmbeddingMatrix EmbeddingMatrix::from_shared(std::shared_ptr<const void> owner, const float* data,
                                             std::size_t count, std::size_t dim, bool normalized) {
    if (dim == 0) fail(ErrorKind::Schema, "embedding dim must be positive");
    EmbeddingMatrix m;
    m.owner_ = std::move(owner);
    m.data_ = data;
    m.count_ = count;
    m.dim_ = dim;
    m.normalized_ = normalized;
    return m;
}

EmbeddingMatrix EmbeddingMatrix::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > count_) {
        fail(ErrorKind::InvalidInput, fmt::format("row range [{}, {}) outside 0..{}", begin, end, count_));
    }
    return from_shared(owner_, data_ + begin * dim_, end - begin, dim_, normalized_);
}

void EmbeddingMatrix::validate() const {
    check_finite(values(), dim_ == 0 ? 1 : dim_);
    if (!normalized_) return;
    const auto& k = simd::kernels();
    for (std::size_t i = 0; i < count_; ++i) {
        const float* r = data_ + i * dim_;
        const double norm = std::sqrt(k.dot_f64(r, r, dim_));
        if (std::abs(norm - 1.0) > kNormTolerance) {
            fail(ErrorKind::InvalidInput,
                 fmt::format("row {} has norm {:.7f} but the matrix is flagged normalized", i, norm));
        }
    }
}

void ThresholdConfig::validate() const {
    if (!(tau_soft > 0.0f && tau_soft < 1.0f)) {
        fail(ErrorKind::Validation, fmt::format("tau_soft={} must lie in (0, 1)", tau_soft));
    }
    if (!(tau_hard > 0.0f && tau_hard <= 1.0f)) {
        fail(ErrorKind::Validation, fmt::format("tau_hard={} must lie in (0, 1]", tau_hard));
    }
    if (!(tau_soft < tau_hard)) {
        fail(ErrorKind::Validation,
             fmt::format("tau_soft={} must be below tau_hard={}", tau_soft, tau_hard));
    }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& store_path) {
    std::filesystem::path p = store_path;
    p.replace_extension(".jsonl");
    return p;
}

StoreWriter::StoreWriter(std::filesystem::path path, std::size_t dim, bool normalized)
    : path_(std::move(path)), dim_(dim), normalized_(normalized) {
    if (dim_ == 0 || dim_ > std::numeric_limits<std::uint32_t>::max()) {
        fail(ErrorKind::Schema, fmt::format("cannot store vectors of dim {}", dim_));
    }
    out_.open(path_, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorKind::Storage, fmt::format("{}: cannot open for writing", path_.string()));
    write_header();
}

StoreWriter::~StoreWriter() = default;

void StoreWriter::write_header() {
    const auto bytes = encode_header({count_, static_cast<std::uint32_t>(dim_), normalized_});
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void StoreWriter::append(std::span<const float> row) {
    if (finished_) fail(ErrorKind::Storage, fmt::format("{}: writer already finished", path_.string()));
    if (row.size() != dim_) {
        fail(ErrorKind::DimensionMismatch, fmt::format("row of dim {} appended to store of dim {}", row.size(), dim_));
    }
    out_.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size_bytes()));
    if (!out_) fail(ErrorKind::Storage, fmt::format("{}: write failed", path_.string()));
    ++count_;
}

StoreInfo StoreWriter::finish(const Manifest& manifest) {
    if (manifest.size() != count_) {
        fail(ErrorKind::Schema,
             fmt::format("{}: {} rows but manifest has {} records", path_.string(), count_, manifest.size()));
    }
    out_.seekp(0);
    write_header();
    out_.close();
    if (!out_) fail(ErrorKind::Storage, fmt::format("{}: write failed", path_.string()));
    finished_ = true;
    const auto manifest_path = manifest_path_for(path_);
    write_manifest(manifest, manifest_path);
    return {path_, manifest_path, count_, dim_, normalized_};
}

StoreInfo write_store(const EmbeddingMatrix& matrix, const Manifest& manifest,
                      const std::filesystem::path& path) {
    if (matrix.count() != manifest.size()) {
        fail(ErrorKind::Schema, fmt::format("matrix has {} rows but manifest has {} records",
                                            matrix.count(), manifest.size()));
    }
    StoreWriter writer(path, matrix.dim(), matrix.normalized());
    for (std::size_t i = 0; i < matrix.count(); ++i) writer.append(matrix.row(i));
    return writer.finish(manifest);
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path, LoadOptions options) {
    FileDescriptor fd(path);
    const std::uint64_t size = file_size(fd.get(), path);
    std::array<unsigned char, kLkemHeaderSize> head{};
    pread_exact(fd.get(), head.data(), static_cast<std::size_t>(std::min<std::uint64_t>(size, head.size())), 0, path);
    const Header h = decode_header(head.data(), size, path);

    void* base = ::mmap(nullptr, size, PROT_READ, MAP_PRIVATE, fd.get(), 0);
    if (base == MAP_FAILED) {
        fail(ErrorKind::Storage, fmt::format("{}: mmap failed: {}", path.string(), std::strerror(errno)));
    }
    auto mapping = std::make_shared<const Mapping>(base, size);
    const auto* data = reinterpret_cast<const float*>(mapping->bytes() + kLkemHeaderSize);
    EmbeddingMatrix m = EmbeddingMatrix::from_shared(std::move(mapping), data, h.count, h.dim, h.normalized);
    if (options.verify) {
        try {
            m.validate();
        } catch (const Error& e) {
            fail(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
        }
    }
    return m;
}

Store load_store(const std::filesystem::path& path, LoadOptions options) {
    Store store{load_matrix(path, options), read_manifest(manifest_path_for(path))};
    if (store.matrix.count() != store.manifest.size()) {
        fail(ErrorKind::Schema, fmt::format("{}: {} rows but manifest has {} records", path.string(),
                                            store.matrix.count(), store.manifest.size()));
    }
    return store;
}

RowReader::RowReader(const std::filesystem::path& path) : path_(path) {
    FileDescriptor fd(path);
    const std::uint64_t size = file_size(fd.get(), path);
    std::array<unsigned char, kLkemHeaderSize> head{};
    pread_exact(fd.get(), head.data(), static_cast<std::size_t>(std::min<std::uint64_t>(size, head.size())), 0, path);
    const Header h = decode_header(head.data(), size, path);
    count_ = h.count;
    dim_ = h.dim;
    normalized_ = h.normalized;
    fd_ = fd.release();
}

RowReader::~RowReader() {
    if (fd_ >= 0) ::close(fd_);
}

std::vector<float> RowReader::read_row(std::size_t i) {
    if (i >= count_) fail(ErrorKind::InvalidInput, fmt::format("row {} out of range (count {})", i, count_));
    std::vector<float> row(dim_);
    const std::uint64_t offset = kLkemHeaderSize + std::uint64_t{i} * dim_ * sizeof(float);
    pread_exact(fd_, row.data(), dim_ * sizeof(float), offset, path_);
    bytes_read_ += dim_ * sizeof(float);
    ++rows_read_;
    return row;
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& matrix, const Manifest* manifest) {
    const std::size_t dim = matrix.dim();
    std::vector<float> out(matrix.values().begin(), matrix.values().end());
    const auto& k = simd::kernels();
    for (std::size_t i = 0; i < matrix.count(); ++i) {
        float* r = out.data() + i * dim;
        const double norm = std::sqrt(k.dot_f64(r, r, dim));
        if (norm == 0.0) {
            const std::string name = manifest != nullptr && i < manifest->size()
                                         ? (*manifest)[i].id
                                         : fmt::format("row {}", i);
            fail(ErrorKind::DegenerateVector, fmt::format("zero embedding for '{}'", name));
        }
        for (std::size_t d = 0; d < dim; ++d) r[d] = static_cast<float>(r[d] / norm);
    }
    return EmbeddingMatrix::from_values(std::move(out), dim, true);
}

}  // namespace leakscan
