#include "linkq/simd/kernels.hpp"

#include <cmath>

namespace linkq::simd {
namespace {

void ema_bank_step(const double* alpha, const double* keep, double* state, double x,
                   std::size_t n) {
    for (std::size_t j = 0; j < n; ++j)
        state[j] = alpha[j] * x + keep[j] * state[j];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] = y[i] + a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t k = 0; k < 4; ++k)
            acc[k] = acc[k] + x[i + k] * y[i + k];
    double s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (; i < n; ++i)
        s = s + x[i] * y[i];
    return s;
}

void sq_err_accumulate(const double* pred, double target, double* sse, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        const double d = pred[j] - target;
        sse[j] = sse[j] + d * d;
    }
}

void adam_step(double* param, const double* grad, double* m, double* v, std::size_t n,
               const AdamCoeffs& c) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = c.beta1 * m[i] + one_minus_b1 * g;
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
        const double m_hat = m[i] / c.bias_correction1;
        const double v_hat = v[i] / c.bias_correction2;
        param[i] = param[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.epsilon);
    }
}

} // namespace

const KernelTable detail::scalar_table{
    Isa::scalar, ema_bank_step, axpy, dot, sq_err_accumulate, adam_step,
};

} // namespace linkq::simd
