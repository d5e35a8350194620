#pragma once

// Similarity kernels with one implementation per instruction set. The
// scalar table is the reference; vector tables must agree with it (exactly
// for dot_f64 up to float64 summation order, within f32_dot_error_factor for
// the float32 tile kernel).

#include <cstddef>
#include <optional>
#include <string_view>

namespace leakscan::simd {

enum class Isa { Scalar, Avx2, Avx512, Neon };

std::string_view to_string(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

// Dot product of two float32 vectors with float64 accumulation. Products of
// two floats are exact in float64, so only the summation rounds.
using DotF64Fn = double (*)(const float* a, const float* b, std::size_t dim);

// Float32 scores for a tile of contiguous row-major vectors:
//   out[i * out_stride + j] = <queries[i], rows[j]>   (float32 arithmetic)
// `scratch` must hold tile_scratch_floats(dim) floats; vector tables pack
// rows into dimension-major panels there.
using ScoreTileFn = void (*)(const float* queries, std::size_t n_queries, const float* rows,
                             std::size_t n_rows, std::size_t dim, float* out,
                             std::size_t out_stride, float* scratch);

inline constexpr std::size_t kMaxPanelRows = 32;

constexpr std::size_t tile_scratch_floats(std::size_t dim) noexcept { return kMaxPanelRows * dim; }

struct KernelTable {
    Isa isa;
    DotF64Fn dot_f64;
    ScoreTileFn score_tile_f32;
};

bool isa_supported(Isa isa) noexcept;
Isa best_isa() noexcept;

// Active table: the override if set, else $LEAKSCAN_ISA if supported, else
// the best supported ISA.
const KernelTable& kernels();

// Throws Error(Parameter) if `isa` is not available on this machine/build.
const KernelTable& kernels_for(Isa isa);

// Forces a table for the whole process (tests, benchmarking). nullopt
// restores automatic selection.
void set_isa_override(std::optional<Isa> isa);

// Upper bound on |score_tile_f32 - exact dot| divided by |a|*|b|, valid for
// every summation order used by any table: gamma_d = d*u / (1 - d*u).
double f32_dot_error_factor(std::size_t dim) noexcept;

}  // namespace leakscan::simd
