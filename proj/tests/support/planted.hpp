#pragma once

// Synthetic audit with planted duplicates whose cosines are fixed by
// construction: exact copies (cosine 1) and rotations of a query towards an
// orthogonal direction (cosine c). Unplanted rows are random directions, far
// below any leakage threshold at the dimensions used here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "leakscan/vecstore.hpp"
#include "support/oracle.hpp"

namespace leakscan::fixtures {

struct PlantedSpec {
    std::size_t n_queries = 1'000;
    std::size_t n_collection = 10'000;
    std::size_t dim = 64;
    std::size_t n_exact = 100;
    std::size_t n_perturbed = 150;
    double min_cos = 0.955;
    double max_cos = 0.975;
    std::uint64_t seed = 2024;
};

struct PlantedAudit {
    EmbeddingMatrix queries;
    EmbeddingMatrix collection;
    Manifest query_manifest;
    Manifest collection_manifest;
    // Collection row planted for query i, or -1.
    std::vector<std::int64_t> planted_row;
    std::vector<double> planted_cos;
};

// Unit vector at cosine c from q (both normalized in double).
inline std::vector<float> rotate_towards_random(const float* q, std::size_t dim, double c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(dim);
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        u[d] = normal(rng);
        dot += u[d] * q[d];
    }
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        u[d] -= dot * q[d];
        sq += u[d] * u[d];
    }
    const double un = std::sqrt(sq);
    const double s = std::sqrt(1.0 - c * c);
    std::vector<double> x(dim);
    double xn = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        x[d] = c * q[d] + s * u[d] / un;
        xn += x[d] * x[d];
    }
    xn = std::sqrt(xn);
    std::vector<float> out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(x[d] / xn);
    return out;
}

inline Manifest synthetic_manifest(std::size_t count, const std::string& prefix, const std::string& dataset,
                                   const std::string& split) {
    std::vector<ManifestRecord> records(count);
    for (std::size_t i = 0; i < count; ++i) {
        records[i].id = fmt::format("{}{:06d}", prefix, i);
        records[i].path = fmt::format("{}/{}{:06d}.jpg", dataset, prefix, i);
        records[i].label = fmt::format("class{}", i % 10);
        records[i].split = split;
        records[i].dataset = dataset;
    }
    return Manifest(std::move(records));
}

inline PlantedAudit make_planted_audit(const PlantedSpec& spec = {}) {
    const std::size_t dim = spec.dim;
    std::vector<float> queries = random_unit_rows(spec.n_queries, dim, spec.seed);
    std::vector<float> collection = random_unit_rows(spec.n_collection, dim, spec.seed + 1);
    std::mt19937_64 rng(spec.seed + 2);

    std::vector<std::size_t> query_order(spec.n_queries);
    std::iota(query_order.begin(), query_order.end(), std::size_t{0});
    std::shuffle(query_order.begin(), query_order.end(), rng);
    std::vector<std::size_t> row_order(spec.n_collection);
    std::iota(row_order.begin(), row_order.end(), std::size_t{0});
    std::shuffle(row_order.begin(), row_order.end(), rng);

    PlantedAudit audit;
    audit.planted_row.assign(spec.n_queries, -1);
    audit.planted_cos.assign(spec.n_queries, 0.0);
    std::uniform_real_distribution<double> cosine(spec.min_cos, spec.max_cos);
    for (std::size_t i = 0; i < spec.n_exact + spec.n_perturbed; ++i) {
        const std::size_t q = query_order[i];
        const std::size_t r = row_order[i];
        const float* qv = queries.data() + q * dim;
        float* rv = collection.data() + r * dim;
        if (i < spec.n_exact) {
            std::copy(qv, qv + dim, rv);
            audit.planted_cos[q] = 1.0;
        } else {
            const double c = cosine(rng);
            const auto x = rotate_towards_random(qv, dim, c, rng);
            std::copy(x.begin(), x.end(), rv);
            audit.planted_cos[q] = c;
        }
        audit.planted_row[q] = static_cast<std::int64_t>(r);
    }
    audit.queries = EmbeddingMatrix::from_values(std::move(queries), dim, true);
    audit.collection = EmbeddingMatrix::from_values(std::move(collection), dim, true);
    audit.query_manifest = synthetic_manifest(spec.n_queries, "q", "bench", "test");
    audit.collection_manifest = synthetic_manifest(spec.n_collection, "c", "corpus", "train");
    return audit;
}

}  // namespace leakscan::fixtures
