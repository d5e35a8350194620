#include "kernels_internal.hpp"

#include <arm_neon.h>

namespace leakscan::simd::detail {
namespace {

double dot_f64(const float* a, const float* b, std::size_t dim) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t d = 0;
    for (; d + 4 <= dim; d += 4) {
        const float32x4_t va = vld1q_f32(a + d);
        const float32x4_t vb = vld1q_f32(b + d);
        acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
        acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
    }
    double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; d < dim; ++d) sum += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    return sum;
}

constexpr std::size_t kPanelRows = 16;  // four q-registers of row scores
constexpr std::size_t kMaxQueries = 6;   // 24 accumulators + 4 panel registers

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
    float32x4_t acc[MQ][4];
    for (int i = 0; i < MQ; ++i)
        for (int v = 0; v < 4; ++v) acc[i][v] = vdupq_n_f32(0.0f);
    for (std::size_t d = 0; d < dim; ++d) {
        float32x4_t p[4];
        for (int v = 0; v < 4; ++v) p[v] = vld1q_f32(panel + d * kPanelRows + 4 * v);
        for (int i = 0; i < MQ; ++i) {
            const float b = q[i * dim + d];
            for (int v = 0; v < 4; ++v) acc[i][v] = vfmaq_n_f32(acc[i][v], p[v], b);
        }
    }
    float buf[kPanelRows];
    for (int i = 0; i < MQ; ++i) {
        for (int v = 0; v < 4; ++v) vst1q_f32(buf + 4 * v, acc[i][v]);
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

constexpr KernelTable kTable{Isa::Neon, &dot_f64, &score_tile_f32};

}  // namespace

const KernelTable* neon_table() noexcept { return &kTable; }

}  // namespace leakscan::simd::detail
