// Compiled with -mavx2 (no -mfma): multiplies and adds stay separately rounded.
#include "linkq/simd/kernels.hpp"

#include <cmath>
#include <immintrin.h>

namespace linkq::simd {
namespace {

void ema_bank_step(const double* alpha, const double* keep, double* state, double x,
                   std::size_t n) {
    const __m256d vx = _mm256_set1_pd(x);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d a = _mm256_loadu_pd(alpha + j);
        const __m256d k = _mm256_loadu_pd(keep + j);
        const __m256d s = _mm256_loadu_pd(state + j);
        _mm256_storeu_pd(state + j, _mm256_add_pd(_mm256_mul_pd(a, vx), _mm256_mul_pd(k, s)));
    }
    for (; j < n; ++j)
        state[j] = alpha[j] * x + keep[j] * state[j];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    }
    for (; i < n; ++i)
        y[i] = y[i] + a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    // (a0 + a2, a1 + a3), then the two halves
    const __m128d pair = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
    double s = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
    for (; i < n; ++i)
        s = s + x[i] * y[i];
    return s;
}

void sq_err_accumulate(const double* pred, double target, double* sse, std::size_t n) {
    const __m256d vt = _mm256_set1_pd(target);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pred + j), vt);
        _mm256_storeu_pd(sse + j, _mm256_add_pd(_mm256_loadu_pd(sse + j), _mm256_mul_pd(d, d)));
    }
    for (; j < n; ++j) {
        const double d = pred[j] - target;
        sse[j] = sse[j] + d * d;
    }
}

void adam_step(double* param, const double* grad, double* m, double* v, std::size_t n,
               const AdamCoeffs& c) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d nb1 = _mm256_set1_pd(one_minus_b1);
    const __m256d nb2 = _mm256_set1_pd(one_minus_b2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr);
    const __m256d eps = _mm256_set1_pd(c.epsilon);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi =
            _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(nb1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(nb2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                           _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = c.beta1 * m[i] + one_minus_b1 * g;
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
        const double m_hat = m[i] / c.bias_correction1;
        const double v_hat = v[i] / c.bias_correction2;
        param[i] = param[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.epsilon);
    }
}

} // namespace

const KernelTable detail::avx2_table{
    Isa::avx2, ema_bank_step, axpy, dot, sq_err_accumulate, adam_step,
};

} // namespace linkq::simd
