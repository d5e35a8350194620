#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "leakscan/error.hpp"
#include "leakscan/simd/kernels.hpp"

using namespace leakscan;
using leakscan::simd::Isa;

namespace {

std::vector<Isa> available_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512, Isa::Neon}) {
        if (simd::isa_supported(isa)) out.push_back(isa);
    }
    return out;
}

std::vector<float> random_values(std::size_t n, std::uint64_t seed, float scale = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-scale, scale);
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double long_double_dot(const float* a, const float* b, std::size_t n) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

double abs_dot(const float* a, const float* b, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(static_cast<double>(a[i]) * b[i]);
    return s;
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
    EXPECT_TRUE(simd::isa_supported(Isa::Scalar));
    EXPECT_EQ(simd::kernels_for(Isa::Scalar).isa, Isa::Scalar);
}

TEST(Kernels, ParseIsaNames) {
    EXPECT_EQ(simd::parse_isa("avx512"), Isa::Avx512);
    EXPECT_EQ(simd::parse_isa("scalar"), Isa::Scalar);
    EXPECT_FALSE(simd::parse_isa("sse9").has_value());
}

TEST(Kernels, OverrideSelectsTable) {
    simd::set_isa_override(Isa::Scalar);
    EXPECT_EQ(simd::kernels().isa, Isa::Scalar);
    simd::set_isa_override(std::nullopt);
    EXPECT_EQ(simd::kernels().isa, simd::best_isa());
}

TEST(Kernels, UnsupportedIsaIsParameterError) {
    for (Isa isa : {Isa::Avx2, Isa::Avx512, Isa::Neon}) {
        if (simd::isa_supported(isa)) continue;
        try {
            simd::kernels_for(isa);
            FAIL() << "expected an error";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Parameter);
        }
    }
}

// Every table's float64 dot agrees with an extended-precision reference for
// all dims around the vector widths and their tails.
TEST(Kernels, DotF64MatchesExtendedPrecision) {
    for (Isa isa : available_isas()) {
        const auto& k = simd::kernels_for(isa);
        for (std::size_t dim = 1; dim <= 80; ++dim) {
            const auto a = random_values(dim, dim);
            const auto b = random_values(dim, dim + 1000);
            const double ref = long_double_dot(a.data(), b.data(), dim);
            const double bound = 2.0 * dim * 0x1p-53 * abs_dot(a.data(), b.data(), dim);
            EXPECT_NEAR(k.dot_f64(a.data(), b.data(), dim), ref, bound)
                << simd::to_string(isa) << " dim " << dim;
        }
    }
}

TEST(Kernels, DotF64EquivalentAcrossTables) {
    const auto& ref = simd::kernels_for(Isa::Scalar);
    for (Isa isa : available_isas()) {
        const auto& k = simd::kernels_for(isa);
        for (std::size_t dim : {16u, 64u, 512u, 513u, 1000u}) {
            const auto a = random_values(dim, 7 * dim);
            const auto b = random_values(dim, 11 * dim);
            EXPECT_NEAR(k.dot_f64(a.data(), b.data(), dim), ref.dot_f64(a.data(), b.data(), dim), 1e-12)
                << simd::to_string(isa);
        }
    }
}

// Tile scores stay inside the advertised forward error bound, for every
// tile shape including partial edges.
TEST(Kernels, ScoreTileWithinErrorBound) {
    for (Isa isa : available_isas()) {
        const auto& k = simd::kernels_for(isa);
        for (std::size_t dim : {1u, 3u, 8u, 15u, 16u, 17u, 64u, 100u, 512u}) {
            for (std::size_t nq : {1u, 2u, 3u, 5u, 9u, 17u}) {
                for (std::size_t nr : {1u, 4u, 7u, 13u, 16u, 17u, 32u, 45u}) {
                    const auto q = random_values(nq * dim, nq * 31 + dim);
                    const auto r = random_values(nr * dim, nr * 17 + dim);
                    const std::size_t stride = nr + 3;
                    std::vector<float> out(nq * stride, -99.0f);
                    std::vector<float> scratch(simd::tile_scratch_floats(dim));
                    k.score_tile_f32(q.data(), nq, r.data(), nr, dim, out.data(), stride, scratch.data());
                    for (std::size_t i = 0; i < nq; ++i) {
                        for (std::size_t j = 0; j < nr; ++j) {
                            const float* qa = q.data() + i * dim;
                            const float* rb = r.data() + j * dim;
                            const double exact = long_double_dot(qa, rb, dim);
                            const double bound = simd::f32_dot_error_factor(dim) * abs_dot(qa, rb, dim);
                            EXPECT_LE(std::abs(out[i * stride + j] - exact), bound + 1e-30)
                                << simd::to_string(isa) << " dim " << dim << " (" << i << "," << j << ")";
                        }
                        for (std::size_t j = nr; j < stride; ++j) {
                            EXPECT_EQ(out[i * stride + j], -99.0f) << "wrote outside the tile";
                        }
                    }
                }
            }
        }
    }
}

TEST(Kernels, ErrorFactorIsGammaD) {
    EXPECT_NEAR(simd::f32_dot_error_factor(512), 512 * 0x1p-24 / (1 - 512 * 0x1p-24), 1e-18);
    EXPECT_GT(simd::f32_dot_error_factor(1024), simd::f32_dot_error_factor(512));
}
