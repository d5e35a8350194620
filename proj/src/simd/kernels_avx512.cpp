#include "kernels_internal.hpp"

#include <immintrin.h>

namespace leakscan::simd::detail {
namespace {

double dot_f64(const float* a, const float* b, std::size_t dim) {
    __m512d acc0 = _mm512_setzero_pd();
    __m512d acc1 = _mm512_setzero_pd();
    __m512d acc2 = _mm512_setzero_pd();
    __m512d acc3 = _mm512_setzero_pd();
    std::size_t d = 0;
    for (; d + 32 <= dim; d += 32) {
        acc0 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + d)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + d)), acc0);
        acc1 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + d + 8)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + d + 8)), acc1);
        acc2 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + d + 16)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + d + 16)), acc2);
        acc3 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_loadu_ps(a + d + 24)),
                               _mm512_cvtps_pd(_mm256_loadu_ps(b + d + 24)), acc3);
    }
    for (; d < dim; d += 8) {
        const std::size_t left = dim - d;
        const __mmask8 mask = left >= 8 ? __mmask8(0xFF) : __mmask8((1u << left) - 1u);
        acc0 = _mm512_fmadd_pd(_mm512_cvtps_pd(_mm256_maskz_loadu_ps(mask, a + d)),
                               _mm512_cvtps_pd(_mm256_maskz_loadu_ps(mask, b + d)), acc0);
    }
    acc0 = _mm512_add_pd(_mm512_add_pd(acc0, acc1), _mm512_add_pd(acc2, acc3));
    return _mm512_reduce_add_pd(acc0);
}

constexpr std::size_t kPanelRows = 32;  // two zmm of row scores
constexpr std::size_t kMaxQueries = 8;   // 16 accumulators

// panel[d * 32 + j] = rows[j][d]; missing rows are zero.
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
                       std::size_t out_stride, __mmask16 lo_mask, __mmask16 hi_mask) {
    __m512 lo[MQ];
    __m512 hi[MQ];
    for (int i = 0; i < MQ; ++i) lo[i] = hi[i] = _mm512_setzero_ps();
    for (std::size_t d = 0; d < dim; ++d) {
        const __m512 p0 = _mm512_loadu_ps(panel + d * kPanelRows);
        const __m512 p1 = _mm512_loadu_ps(panel + d * kPanelRows + 16);
        for (int i = 0; i < MQ; ++i) {
            const __m512 b = _mm512_set1_ps(q[i * dim + d]);
            lo[i] = _mm512_fmadd_ps(b, p0, lo[i]);
            hi[i] = _mm512_fmadd_ps(b, p1, hi[i]);
        }
    }
    for (int i = 0; i < MQ; ++i) {
        _mm512_mask_storeu_ps(out + i * out_stride, lo_mask, lo[i]);
        _mm512_mask_storeu_ps(out + i * out_stride + 16, hi_mask, hi[i]);
    }
}

void score_tile_f32(const float* queries, std::size_t n_queries, const float* rows,
                    std::size_t n_rows, std::size_t dim, float* out, std::size_t out_stride,
                    float* scratch) {
    for (std::size_t j = 0; j < n_rows; j += kPanelRows) {
        const std::size_t nr = n_rows - j < kPanelRows ? n_rows - j : kPanelRows;
        pack_panel(rows + j * dim, nr, dim, scratch);
        const __mmask16 lo_mask = nr >= 16 ? __mmask16(0xFFFF) : __mmask16((1u << nr) - 1u);
        const __mmask16 hi_mask =
            nr >= 32 ? __mmask16(0xFFFF) : nr <= 16 ? __mmask16(0) : __mmask16((1u << (nr - 16)) - 1u);
        for (std::size_t i = 0; i < n_queries; i += kMaxQueries) {
            const std::size_t mq = n_queries - i < kMaxQueries ? n_queries - i : kMaxQueries;
            const float* q = queries + i * dim;
            float* o = out + i * out_stride + j;
            switch (mq) {
                case 1: micro_tile<1>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 2: micro_tile<2>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 3: micro_tile<3>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 4: micro_tile<4>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 5: micro_tile<5>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 6: micro_tile<6>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                case 7: micro_tile<7>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
                default: micro_tile<8>(q, dim, scratch, o, out_stride, lo_mask, hi_mask); break;
            }
        }
    }
}

constexpr KernelTable kTable{Isa::Avx512, &dot_f64, &score_tile_f32};

}  // namespace

const KernelTable* avx512_table() noexcept { return &kTable; }

}  // namespace leakscan::simd::detail
