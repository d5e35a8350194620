#include "kernels_internal.hpp"

namespace leakscan::simd::detail {
namespace {

double dot_f64(const float* a, const float* b, std::size_t dim) {
    double sum = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return sum;
}

void score_tile_f32(const float* queries, std::size_t n_queries, const float* rows,
                    std::size_t n_rows, std::size_t dim, float* out, std::size_t out_stride,
                    float* /*scratch*/) {
    for (std::size_t i = 0; i < n_queries; ++i) {
        const float* q = queries + i * dim;
        for (std::size_t j = 0; j < n_rows; ++j) {
            const float* r = rows + j * dim;
            float sum = 0.0f;
            for (std::size_t d = 0; d < dim; ++d) sum += q[d] * r[d];
            out[i * out_stride + j] = sum;
        }
    }
}

constexpr KernelTable kTable{Isa::Scalar, &dot_f64, &score_tile_f32};

}  // namespace

const KernelTable* scalar_table() noexcept { return &kTable; }

}  // namespace leakscan::simd::detail
