#include "linkq/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace linkq::simd {

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "neon") return Isa::neon;
    throw std::invalid_argument("unknown SIMD variant '" + std::string(name) + "'");
}

bool supported(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!supported(isa))
        throw std::invalid_argument("SIMD variant '" + std::string(to_string(isa)) +
                                    "' is not available on this machine");
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
    }
}

namespace {

const KernelTable* select_default() {
    if (const char* env = std::getenv("LINKQ_SIMD"); env != nullptr && *env != '\0')
        return &table(parse_isa(env));
    for (Isa isa : {Isa::avx2, Isa::neon})
        if (supported(isa)) return &table(isa);
    return &detail::scalar_table;
}

std::atomic<const KernelTable*> current{nullptr};

} // namespace

const KernelTable& active() {
    const KernelTable* t = current.load(std::memory_order_acquire);
    if (t == nullptr) {
        const KernelTable* chosen = select_default();
        current.compare_exchange_strong(t, chosen, std::memory_order_acq_rel);
        t = current.load(std::memory_order_acquire);
    }
    return *t;
}

void set_active(Isa isa) { current.store(&table(isa), std::memory_order_release); }

} // namespace linkq::simd
