#include "linkq/ema.hpp"

#include "linkq/error.hpp"
#include "linkq/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace linkq {

void validate_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ConfigError("smoothing factor " + std::to_string(alpha) + " outside (0, 1]");
}

namespace {

void validate_init(double init_state) {
    if (!(init_state >= 0.0 && init_state <= 1.0))
        throw ConfigError("EMA initial state must lie in [0, 1]");
}

} // namespace

std::vector<double> ema_run(double alpha, const Trace& trace, double init_state) {
    validate_alpha(alpha);
    validate_init(init_state);
    std::vector<double> out(trace.size());
    EmaFilter f{alpha, init_state};
    for (std::size_t i = 0; i < trace.size(); ++i) {
        f = ema_step(f, trace[i]);
        out[i] = f.state;
    }
    return out;
}

double default_init_state(const Trace& trace, std::size_t window_w) {
    const std::size_t n = std::min(window_w, trace.size());
    const auto x = trace.outcomes();
    const auto ones = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n),
                                      std::size_t{0});
    return static_cast<double>(ones) / static_cast<double>(n);
}

double alpha_grid_value(double alpha_star, std::size_t k) {
    const double root2 = std::sqrt(2.0);
    if (k < kGridCenter) {
        const double divisor = static_cast<double>(kGridCenter - k) * root2;
        return alpha_star / divisor;
    }
    if (k == kGridCenter) return alpha_star;
    return static_cast<double>(k - kGridCenter) * root2 * alpha_star;
}

AlphaGrid build_alpha_grid(double alpha_star) {
    validate_alpha(alpha_star);
    AlphaGrid grid;
    grid.alpha_star = alpha_star;
    for (std::size_t k = 0; k < kGridSize; ++k)
        grid.alphas[k] = std::min(1.0, alpha_grid_value(alpha_star, k));
    return grid;
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
}

FeatureMatrix compute_feature_matrix(std::span<const double> alphas, const Trace& trace,
                                     double init_state) {
    validate_init(init_state);
    const std::size_t n = alphas.size();
    std::vector<double> keep(n);
    for (std::size_t j = 0; j < n; ++j) {
        validate_alpha(alphas[j]);
        keep[j] = 1.0 - alphas[j];
    }
    const auto& k = simd::active();
    FeatureMatrix m(trace.size(), n, 0);
    std::vector<double> state(n, init_state);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        k.ema_bank_step(alphas.data(), keep.data(), state.data(), static_cast<double>(trace[i]), n);
        std::copy(state.begin(), state.end(), m.row(i).begin());
    }
    return m;
}

FeatureMatrix compute_feature_matrix(const AlphaGrid& grid, const Trace& trace,
                                     double init_state) {
    return compute_feature_matrix(std::span<const double>(grid.alphas), trace, init_state);
}

Calibration calibrate_alpha(std::span<const CalibrationSegment> segments,
                            std::span<const double> candidate_alphas) {
    if (candidate_alphas.empty()) throw ConfigError("calibration needs at least one candidate");
    if (segments.empty()) throw DataError("calibration needs at least one training trace");

    // Sorted ascending so that a strict comparison breaks ties toward the
    // smaller alpha.
    std::vector<double> alphas(candidate_alphas.begin(), candidate_alphas.end());
    std::sort(alphas.begin(), alphas.end());
    const std::size_t n = alphas.size();
    std::vector<double> keep(n);
    for (std::size_t j = 0; j < n; ++j) {
        validate_alpha(alphas[j]);
        keep[j] = 1.0 - alphas[j];
    }

    const auto& k = simd::active();
    std::vector<double> sse(n, 0.0);
    std::vector<double> state(n);
    std::size_t scored = 0;
    for (const auto& seg : segments) {
        validate_init(seg.init_state);
        const Trace& trace = *seg.trace;
        const TargetSeries& targets = *seg.targets;
        if (targets.size() + targets.window_w != trace.size())
            throw DataError("targets do not belong to trace '" + trace.channel_label() + "'");
        std::fill(state.begin(), state.end(), seg.init_state);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            k.ema_bank_step(alphas.data(), keep.data(), state.data(),
                            static_cast<double>(trace[i]), n);
            if (i >= seg.warmup) k.sq_err_accumulate(state.data(), targets.values[i], sse.data(), n);
        }
        if (targets.size() > seg.warmup) scored += targets.size() - seg.warmup;
    }
    if (scored == 0) throw DataError("no target samples left after warm-up");

    Calibration best{alphas[0], std::numeric_limits<double>::infinity(), scored};
    for (std::size_t j = 0; j < n; ++j) {
        const double mse = sse[j] / static_cast<double>(scored);
        if (mse < best.mse) {
            best.alpha_star = alphas[j];
            best.mse = mse;
        }
    }
    return best;
}

Calibration calibrate_alpha(const Trace& train_trace, const TargetSeries& targets,
                            std::span<const double> candidate_alphas, double init_state,
                            std::size_t warmup) {
    const CalibrationSegment seg{&train_trace, &targets, init_state, warmup};
    return calibrate_alpha(std::span<const CalibrationSegment>(&seg, 1), candidate_alphas);
}

Calibration calibrate_alpha(const Trace& train_trace, const TargetSeries& targets,
                            std::span<const double> candidate_alphas) {
    return calibrate_alpha(train_trace, targets, candidate_alphas,
                           default_init_state(train_trace, targets.window_w), targets.window_w);
}

std::vector<double> log_sweep(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2) throw ConfigError("invalid alpha sweep");
    std::vector<double> out(points);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t k = 0; k < points; ++k)
        out[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) /
                                        static_cast<double>(points - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<double> default_alpha_candidates() { return log_sweep(1e-5, 1e-1, 61); }

} // namespace linkq
