#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "leakscan/error.hpp"

namespace leakscan::simd {

namespace detail {
#ifndef LEAKSCAN_HAVE_AVX2
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif
#ifndef LEAKSCAN_HAVE_AVX512
const KernelTable* avx512_table() noexcept { return nullptr; }
#endif
#ifndef LEAKSCAN_HAVE_NEON
const KernelTable* neon_table() noexcept { return nullptr; }
#endif
}  // namespace detail

namespace {

const KernelTable* table_for(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return detail::scalar_table();
        case Isa::Avx2: return detail::avx2_table();
        case Isa::Avx512: return detail::avx512_table();
        case Isa::Neon: return detail::neon_table();
    }
    return nullptr;
}

bool cpu_has(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return true;
#if defined(__x86_64__) || defined(__i386__)
        case Isa::Avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::Avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512vl") &&
                   __builtin_cpu_supports("avx512dq");
#else
        case Isa::Avx2:
        case Isa::Avx512: return false;
#endif
        case Isa::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* automatic_table() {
    if (const char* env = std::getenv("LEAKSCAN_ISA"); env != nullptr && *env != '\0') {
        const auto isa = parse_isa(env);
        if (!isa || !isa_supported(*isa)) {
            fail(ErrorKind::Parameter,
                 std::string("LEAKSCAN_ISA=") + env + " is not available on this machine");
        }
        return table_for(*isa);
    }
    return table_for(best_isa());
}

std::atomic<const KernelTable*> g_override{nullptr};

}  // namespace

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Avx512: return "avx512";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512, Isa::Neon}) {
        if (name == to_string(isa)) return isa;
    }
    return std::nullopt;
}

bool isa_supported(Isa isa) noexcept { return table_for(isa) != nullptr && cpu_has(isa); }

Isa best_isa() noexcept {
    for (Isa isa : {Isa::Avx512, Isa::Avx2, Isa::Neon}) {
        if (isa_supported(isa)) return isa;
    }
    return Isa::Scalar;
}

const KernelTable& kernels() {
    if (const KernelTable* forced = g_override.load(std::memory_order_acquire)) return *forced;
    static const KernelTable* automatic = automatic_table();
    return *automatic;
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_supported(isa)) {
        fail(ErrorKind::Parameter,
             std::string("kernel set '") + std::string(to_string(isa)) + "' is not available");
    }
    return *table_for(isa);
}

void set_isa_override(std::optional<Isa> isa) {
    g_override.store(isa ? &kernels_for(*isa) : nullptr, std::memory_order_release);
}

double f32_dot_error_factor(std::size_t dim) noexcept {
    constexpr double unit_roundoff = 0x1p-24;
    const double n = static_cast<double>(dim == 0 ? 1 : dim);
    return n * unit_roundoff / (1.0 - n * unit_roundoff);
}

}  // namespace leakscan::simd
