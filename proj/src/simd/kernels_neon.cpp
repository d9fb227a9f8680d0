// AArch64 only. Uses vmulq/vaddq rather than vfmaq so that rounding matches
// the scalar reference.
#include "linkq/simd/kernels.hpp"

#include <arm_neon.h>
#include <cmath>

namespace linkq::simd {
namespace {

void ema_bank_step(const double* alpha, const double* keep, double* state, double x,
                   std::size_t n) {
    const float64x2_t vx = vdupq_n_f64(x);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const float64x2_t a = vld1q_f64(alpha + j);
        const float64x2_t k = vld1q_f64(keep + j);
        const float64x2_t s = vld1q_f64(state + j);
        vst1q_f64(state + j, vaddq_f64(vmulq_f64(a, vx), vmulq_f64(k, s)));
    }
    for (; j < n; ++j)
        state[j] = alpha[j] * x + keep[j] * state[j];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i)
        y[i] = y[i] + a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    // lo holds partial sums 0 and 1, hi holds 2 and 3
    float64x2_t lo = vdupq_n_f64(0.0);
    float64x2_t hi = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    const float64x2_t pair = vaddq_f64(lo, hi);
    double s = vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
    for (; i < n; ++i)
        s = s + x[i] * y[i];
    return s;
}

void sq_err_accumulate(const double* pred, double target, double* sse, std::size_t n) {
    const float64x2_t vt = vdupq_n_f64(target);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(pred + j), vt);
        vst1q_f64(sse + j, vaddq_f64(vld1q_f64(sse + j), vmulq_f64(d, d)));
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
    const float64x2_t b1 = vdupq_n_f64(c.beta1);
    const float64x2_t b2 = vdupq_n_f64(c.beta2);
    const float64x2_t nb1 = vdupq_n_f64(one_minus_b1);
    const float64x2_t nb2 = vdupq_n_f64(one_minus_b2);
    const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
    const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
    const float64x2_t lr = vdupq_n_f64(c.lr);
    const float64x2_t eps = vdupq_n_f64(c.epsilon);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t g = vld1q_f64(grad + i);
        const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(nb1, g));
        const float64x2_t vi =
            vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(nb2, vmulq_f64(g, g)));
        vst1q_f64(m + i, mi);
        vst1q_f64(v + i, vi);
        const float64x2_t m_hat = vdivq_f64(mi, bc1);
        const float64x2_t v_hat = vdivq_f64(vi, bc2);
        const float64x2_t step =
            vdivq_f64(vmulq_f64(lr, m_hat), vaddq_f64(vsqrtq_f64(v_hat), eps));
        vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
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

const KernelTable detail::neon_table{
    Isa::neon, ema_bank_step, axpy, dot, sq_err_accumulate, adam_step,
};

} // namespace linkq::simd
