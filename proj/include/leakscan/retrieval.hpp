#pragma once

// Exact top-k cosine search over normalized embedding matrices.
//
// The similarity of a (query, row) pair is the float64-accumulated dot
// product rounded to float32 and clamped to [-1, 1]. Lists are ordered by
// descending similarity, ties by ascending collection row.
//
// Scoring runs a float32 tile kernel first and only rescores, in float64,
// rows whose float32 score could still reach the current k-th best. The
// float32 error bound is rigorous, so the result is identical to rescoring
// every row.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "leakscan/vecstore.hpp"

namespace leakscan {

struct Match {
    std::uint64_t row = 0;  // collection row index
    float similarity = 0.0f;

    bool operator==(const Match&) const = default;
};

// Strict ranking order: higher similarity first, lower row on ties.
inline bool ranks_before(const Match& a, const Match& b) noexcept {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.row < b.row);
}

// One ranked list of at most k matches per query.
class MatchSet {
public:
    MatchSet() = default;
    MatchSet(std::size_t n_queries, std::size_t k) : k_(k), lists_(n_queries) {}

    std::size_t size() const noexcept { return lists_.size(); }
    std::size_t k() const noexcept { return k_; }
    std::span<const Match> operator[](std::size_t query) const noexcept { return lists_[query]; }

    void assign(std::size_t query, std::vector<Match> matches) { lists_[query] = std::move(matches); }

    // Sorted by ranks_before, at most k entries, no repeated rows.
    bool well_formed() const;

    bool operator==(const MatchSet&) const = default;

private:
    std::size_t k_ = 0;
    std::vector<std::vector<Match>> lists_;
};

// Bounded best-k accumulator under ranks_before.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { items_.reserve(k); }

    bool full() const noexcept { return items_.size() == k_; }
    const Match& worst() const noexcept { return items_.back(); }
    std::span<const Match> items() const noexcept { return items_; }
    std::vector<Match> take() && { return std::move(items_); }

    // Returns true if the match was kept.
    bool offer(const Match& m);
    void clear() noexcept { items_.clear(); }

private:
    std::size_t k_;
    std::vector<Match> items_;
};

// Merges ranked lists into the global best k (order-independent).
std::vector<Match> merge_topk(std::span<const std::vector<Match>> lists, std::size_t k);

struct Shard {
    std::size_t id = 0;
    std::size_t begin = 0;  // first collection row
    std::size_t end = 0;    // one past the last row
    EmbeddingMatrix rows;   // view of [begin, end)
    double max_norm = 0.0;  // largest row norm, for the float32 error bound
};

class PartitionedIndex {
public:
    PartitionedIndex() = default;

    std::size_t partition_size() const noexcept { return partition_size_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const Shard> shards() const noexcept { return shards_; }

private:
    friend PartitionedIndex build_index(const EmbeddingMatrix&, std::size_t, std::size_t);

    std::size_t partition_size_ = 0;
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    std::vector<Shard> shards_;
};

struct SearchOptions {
    std::size_t threads = 0;  // 0 = one per hardware thread
};

// ceil(count / partition_size) shards in row order.
PartitionedIndex build_index(const EmbeddingMatrix& collection, std::size_t partition_size,
                             std::size_t threads = 0);

// Per query: each shard's local top-k, merged into the global top-k.
MatchSet knn_search(const PartitionedIndex& index, const EmbeddingMatrix& queries, std::size_t k,
                    const SearchOptions& options = {});

// Brute force over the whole collection as a single partition.
MatchSet direct_search(const EmbeddingMatrix& queries, const EmbeddingMatrix& collection,
                       std::size_t k, const SearchOptions& options = {});

// Exact similarity of two rows, as defined above.
float cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace leakscan
