#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops shared by the EMA filter bank, the dense layers
// and the optimizer. Every vector variant reproduces the scalar reference bit
// for bit: element-wise kernels perform the same IEEE operations in the same
// order, and dot() is defined over four interleaved partial sums so that a
// 4-lane (AVX2) or 2x2-lane (NEON) implementation can match it exactly.

namespace linkq::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa) noexcept;
// Throws std::invalid_argument for unknown names.
Isa parse_isa(std::string_view name);

struct AdamCoeffs {
    double lr;
    double beta1;
    double beta2;
    double epsilon;
    double bias_correction1; // 1 - beta1^t
    double bias_correction2; // 1 - beta2^t
};

struct KernelTable {
    Isa isa;

    // state[j] = alpha[j] * x + keep[j] * state[j], keep[j] = 1 - alpha[j].
    void (*ema_bank_step)(const double* alpha, const double* keep, double* state, double x,
                          std::size_t n);

    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    double (*dot)(const double* x, const double* y, std::size_t n);

    // sse[j] += (pred[j] - target)^2
    void (*sq_err_accumulate)(const double* pred, double target, double* sse, std::size_t n);

    void (*adam_step)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoeffs& c);
};

bool supported(Isa isa) noexcept;

// Throws std::invalid_argument if the ISA was not compiled in or the CPU
// lacks it.
const KernelTable& table(Isa isa);

// The process-wide selection. Chosen on first use: the LINKQ_SIMD environment
// variable if set, otherwise the widest ISA the CPU supports.
const KernelTable& active();
void set_active(Isa isa);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
} // namespace detail

} // namespace linkq::simd
