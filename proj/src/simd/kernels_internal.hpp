#pragma once

#include "leakscan/simd/kernels.hpp"

// Each table lives in its own translation unit compiled with the matching
// target flags. Those units must not instantiate inline library templates:
// the linker could keep the vector-ISA copy for callers on other CPUs.
namespace leakscan::simd::detail {

const KernelTable* scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;    // nullptr when not built
const KernelTable* avx512_table() noexcept;  // nullptr when not built
const KernelTable* neon_table() noexcept;    // nullptr when not built

}  // namespace leakscan::simd::detail
