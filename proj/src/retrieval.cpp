#include "leakscan/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <fmt/format.h>

#include "leakscan/error.hpp"
#include "leakscan/parallel.hpp"
#include "leakscan/simd/kernels.hpp"

namespace leakscan {

namespace {

constexpr std::size_t kMaxQueryBlock = 512;
constexpr std::size_t kTileRows = 128;

inline float exact_similarity(const simd::KernelTable& k, const float* a, const float* b, std::size_t dim) {
    const auto s = static_cast<float>(k.dot_f64(a, b, dim));
    return std::clamp(s, -1.0f, 1.0f);
}

// Smallest float32 tile score that could still produce an exact similarity
// ranking at or above the current k-th best.
inline double admission_threshold(const TopK& top, double delta) {
    if (!top.full()) return -std::numeric_limits<double>::infinity();
    const double worst = top.worst().similarity;
    return worst - delta - std::abs(worst) * 0x1p-22 - 1e-12;
}

void check_search_inputs(const EmbeddingMatrix& queries, std::size_t collection_count,
                         std::size_t collection_dim, bool collection_normalized, std::size_t k) {
    if (k == 0) fail(ErrorKind::Parameter, "k must be at least 1");
    if (collection_count == 0) fail(ErrorKind::EmptyCollection, "collection has no rows");
    if (queries.count() == 0) return;
    if (queries.dim() != collection_dim) {
        fail(ErrorKind::DimensionMismatch,
             fmt::format("query dim {} does not match collection dim {}", queries.dim(), collection_dim));
    }
    if (!queries.normalized() || !collection_normalized) {
        fail(ErrorKind::InvalidInput, "cosine search requires normalized queries and collection");
    }
}

// Searches queries [q_begin, q_end) against shards [s_begin, s_end); each
// shard yields a local top-k that is merged into the block's result.
void search_block(const EmbeddingMatrix& queries, std::size_t q_begin, std::size_t q_end,
                  std::span<const Shard> shards, std::size_t k, std::span<const double> query_norms,
                  std::vector<std::vector<Match>>& out) {
    const auto& kern = simd::kernels();
    const std::size_t dim = queries.dim();
    const std::size_t nq = q_end - q_begin;
    const std::size_t tile_rows = kTileRows;
    const double error_factor = simd::f32_dot_error_factor(dim);

    std::vector<float> tile(nq * tile_rows);
    std::vector<float> scratch(simd::tile_scratch_floats(dim));
    std::vector<TopK> merged(nq, TopK(k));
    std::vector<TopK> local(nq, TopK(k));
    std::vector<double> delta(nq);
    const float* qdata = queries.row(q_begin).data();

    for (const Shard& shard : shards) {
        for (std::size_t i = 0; i < nq; ++i) {
            local[i].clear();
            delta[i] = error_factor * query_norms[q_begin + i] * shard.max_norm;
        }
        const std::size_t n_rows = shard.rows.count();
        for (std::size_t r0 = 0; r0 < n_rows; r0 += tile_rows) {
            const std::size_t nr = std::min(tile_rows, n_rows - r0);
            const float* rdata = shard.rows.row(r0).data();
            kern.score_tile_f32(qdata, nq, rdata, nr, dim, tile.data(), tile_rows, scratch.data());
            for (std::size_t i = 0; i < nq; ++i) {
                TopK& top = local[i];
                double threshold = admission_threshold(top, delta[i]);
                const float* scores = tile.data() + i * tile_rows;
                const float* q = qdata + i * dim;
                for (std::size_t j = 0; j < nr; ++j) {
                    if (static_cast<double>(scores[j]) < threshold) continue;
                    const Match m{shard.begin + r0 + j, exact_similarity(kern, q, rdata + j * dim, dim)};
                    if (top.offer(m)) threshold = admission_threshold(top, delta[i]);
                }
            }
        }
        for (std::size_t i = 0; i < nq; ++i) {
            for (const Match& m : local[i].items()) merged[i].offer(m);
        }
    }
    for (std::size_t i = 0; i < nq; ++i) out[q_begin + i] = std::move(merged[i]).take();
}

}  // namespace

bool MatchSet::well_formed() const {
    for (const auto& list : lists_) {
        if (list.size() > k_) return false;
        std::unordered_set<std::uint64_t> rows;
        for (std::size_t j = 0; j < list.size(); ++j) {
            if (!rows.insert(list[j].row).second) return false;
            if (j > 0 && !ranks_before(list[j - 1], list[j])) return false;
        }
    }
    return true;
}

bool TopK::offer(const Match& m) {
    if (k_ == 0) return false;
    if (full()) {
        if (!ranks_before(m, items_.back())) return false;
        items_.pop_back();
    }
    items_.insert(std::upper_bound(items_.begin(), items_.end(), m, ranks_before), m);
    return true;
}

std::vector<Match> merge_topk(std::span<const std::vector<Match>> lists, std::size_t k) {
    TopK top(k);
    for (const auto& list : lists) {
        for (const Match& m : list) {
            // Lists are ranked, so the rest of this one cannot enter either.
            if (!top.offer(m)) break;
        }
    }
    return std::move(top).take();
}

PartitionedIndex build_index(const EmbeddingMatrix& collection, std::size_t partition_size,
                             std::size_t threads) {
    if (partition_size == 0) fail(ErrorKind::Parameter, "partition_size must be at least 1");
    PartitionedIndex index;
    index.partition_size_ = partition_size;
    index.count_ = collection.count();
    index.dim_ = collection.dim();

    const std::size_t n_shards = (collection.count() + partition_size - 1) / partition_size;
    index.shards_.resize(n_shards);
    const auto& kern = simd::kernels();
    parallel_for(n_shards, threads, [&](std::size_t s) {
        Shard& shard = index.shards_[s];
        shard.id = s;
        shard.begin = s * partition_size;
        shard.end = std::min(collection.count(), shard.begin + partition_size);
        shard.rows = collection.slice(shard.begin, shard.end);
        double max_sq = 0.0;
        for (std::size_t r = 0; r < shard.rows.count(); ++r) {
            const float* row = shard.rows.row(r).data();
            max_sq = std::max(max_sq, kern.dot_f64(row, row, collection.dim()));
        }
        shard.max_norm = std::sqrt(max_sq);
    });
    return index;
}

MatchSet knn_search(const PartitionedIndex& index, const EmbeddingMatrix& queries, std::size_t k,
                    const SearchOptions& options) {
    const bool collection_normalized =
        index.shards().empty() || index.shards().front().rows.normalized();
    check_search_inputs(queries, index.count(), index.dim(), collection_normalized, k);

    const std::size_t nq = queries.count();
    MatchSet result(nq, k);
    if (nq == 0) return result;

    const std::size_t threads = resolve_threads(options.threads);
    const auto& kern = simd::kernels();
    std::vector<double> norms(nq);
    for (std::size_t i = 0; i < nq; ++i) {
        const float* q = queries.row(i).data();
        norms[i] = std::sqrt(kern.dot_f64(q, q, queries.dim()));
    }

    const std::size_t block = std::clamp<std::size_t>((nq + threads - 1) / threads, 1, kMaxQueryBlock);
    const std::size_t n_blocks = (nq + block - 1) / block;
    const auto shards = index.shards();
    // Few query blocks: split the shards too so every worker has a task.
    const std::size_t n_groups =
        n_blocks >= threads ? 1 : std::min(shards.size(), (threads + n_blocks - 1) / n_blocks);

    std::vector<std::vector<std::vector<Match>>> partial(n_groups, std::vector<std::vector<Match>>(nq));
    parallel_for(n_blocks * n_groups, threads, [&](std::size_t task) {
        const std::size_t b = task / n_groups;
        const std::size_t g = task % n_groups;
        const std::size_t s_begin = g * shards.size() / n_groups;
        const std::size_t s_end = (g + 1) * shards.size() / n_groups;
        search_block(queries, b * block, std::min(nq, (b + 1) * block),
                     shards.subspan(s_begin, s_end - s_begin), k, norms, partial[g]);
    });

    std::vector<std::vector<Match>> lists(n_groups);
    for (std::size_t i = 0; i < nq; ++i) {
        if (n_groups == 1) {
            result.assign(i, std::move(partial[0][i]));
            continue;
        }
        for (std::size_t g = 0; g < n_groups; ++g) lists[g] = std::move(partial[g][i]);
        result.assign(i, merge_topk(lists, k));
    }
    return result;
}

MatchSet direct_search(const EmbeddingMatrix& queries, const EmbeddingMatrix& collection,
                       std::size_t k, const SearchOptions& options) {
    check_search_inputs(queries, collection.count(), collection.dim(), collection.normalized(), k);
    return knn_search(build_index(collection, collection.count(), options.threads), queries, k, options);
}

float cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::DimensionMismatch, fmt::format("vectors of dim {} and {}", a.size(), b.size()));
    }
    return exact_similarity(simd::kernels(), a.data(), b.data(), a.size());
}

}  // namespace leakscan
