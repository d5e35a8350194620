#include "kernels_internal.hpp"

#include <immintrin.h>

namespace leakscan::simd::detail {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d sum = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(sum, _mm_unpackhi_pd(sum, sum)));
}

double dot_f64(const float* a, const float* b, std::size_t dim) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t d = 0;
    for (; d + 16 <= dim; d += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + d)),
                               _mm256_cvtps_pd(_mm_loadu_ps(b + d)), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + d + 4)),
                               _mm256_cvtps_pd(_mm_loadu_ps(b + d + 4)), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + d + 8)),
                               _mm256_cvtps_pd(_mm_loadu_ps(b + d + 8)), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + d + 12)),
                               _mm256_cvtps_pd(_mm_loadu_ps(b + d + 12)), acc3);
    }
    for (; d + 4 <= dim; d += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + d)),
                               _mm256_cvtps_pd(_mm_loadu_ps(b + d)), acc0);
    }
    double sum = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; d < dim; ++d) sum += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    return sum;
}

constexpr std::size_t kPanelRows = 16;  // two ymm of row scores
constexpr std::size_t kMaxQueries = 6;   // 12 accumulators + 2 panel + 1 broadcast

inline void pack_panel(const float* rows, std::size_t n_rows, std::size_t dim, float* panel) {
    for (std::size_t j = 0; j < n_rows; ++j) {
        const float* r = rows + j * dim;
        for (std::size_t d = 0; d < dim; ++d) panel[d * kPanelRows + j] = r[d];
    }
    for (std::size_t j = n_rows; j < kPanelRows; ++j) {
        for (std::size_t d = 0; d < dim; ++d) panel[d * kPanelRows + j] = 0.0f;
    }
}

template <int MQ>
inline void micro_tile(const float* q, std::size_t dim, const float* panel, float* out,
                       std::size_t out_stride, std::size_t n_cols) {
    __m256 lo[MQ];
    __m256 hi[MQ];
    for (int i = 0; i < MQ; ++i) lo[i] = hi[i] = _mm256_setzero_ps();
    for (std::size_t d = 0; d < dim; ++d) {
        const __m256 p0 = _mm256_loadu_ps(panel + d * kPanelRows);
        const __m256 p1 = _mm256_loadu_ps(panel + d * kPanelRows + 8);
        for (int i = 0; i < MQ; ++i) {
            const __m256 b = _mm256_broadcast_ss(q + i * dim + d);
            lo[i] = _mm256_fmadd_ps(b, p0, lo[i]);
            hi[i] = _mm256_fmadd_ps(b, p1, hi[i]);
        }
    }
    if (n_cols == kPanelRows) {
        for (int i = 0; i < MQ; ++i) {
            _mm256_storeu_ps(out + i * out_stride, lo[i]);
            _mm256_storeu_ps(out + i * out_stride + 8, hi[i]);
        }
        return;
    }
    alignas(32) float buf[kPanelRows];
    for (int i = 0; i < MQ; ++i) {
        _mm256_store_ps(buf, lo[i]);
        _mm256_store_ps(buf + 8, hi[i]);
        for (std::size_t j = 0; j < n_cols; ++j) out[i * out_stride + j] = buf[j];
    }
}

void score_tile_f32(const float* queries, std::size_t n_queries, const float* rows,
                    std::size_t n_rows, std::size_t dim, float* out, std::size_t out_stride,
                    float* scratch) {
    for (std::size_t j = 0; j < n_rows; j += kPanelRows) {
        const std::size_t nr = n_rows - j < kPanelRows ? n_rows - j : kPanelRows;
        pack_panel(rows + j * dim, nr, dim, scratch);
        for (std::size_t i = 0; i < n_queries; i += kMaxQueries) {
            const std::size_t mq = n_queries - i < kMaxQueries ? n_queries - i : kMaxQueries;
            const float* q = queries + i * dim;
            float* o = out + i * out_stride + j;
            switch (mq) {
                case 1: micro_tile<1>(q, dim, scratch, o, out_stride, nr); break;
                case 2: micro_tile<2>(q, dim, scratch, o, out_stride, nr); break;
                case 3: micro_tile<3>(q, dim, scratch, o, out_stride, nr); break;
                case 4: micro_tile<4>(q, dim, scratch, o, out_stride, nr); break;
                case 5: micro_tile<5>(q, dim, scratch, o, out_stride, nr); break;
                default: micro_tile<6>(q, dim, scratch, o, out_stride, nr); break;
            }
        }
    }
}

constexpr KernelTable kTable{Isa::Avx2, &dot_f64, &score_tile_f32};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kTable; }

}  // namespace leakscan::simd::detail
