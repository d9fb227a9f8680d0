#pragma once

#include "linkq/trace.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace linkq {

// First-order exponential moving average over binary outcomes.
struct EmaFilter {
    double alpha = 1.0; // (0, 1]
    double state = 0.0; // current estimate, stays in [0,1] for inputs in [0,1]
};

// Throws ConfigError unless alpha in (0, 1].
void validate_alpha(double alpha);

// state' = alpha * x + (1 - alpha) * state
inline EmaFilter ema_step(EmaFilter filter, std::uint8_t x) noexcept {
    const double keep = 1.0 - filter.alpha;
    filter.state = filter.alpha * static_cast<double>(x) + keep * filter.state;
    return filter;
}

// output[i] is the state after consuming outcomes 0..i.
std::vector<double> ema_run(double alpha, const Trace& trace, double init_state);

// Mean of the first min(window_w, |trace|) outcomes; the default EMA start
// value so that slow filters do not spend months climbing from zero.
double default_init_state(const Trace& trace, std::size_t window_w = kDefaultWindow);

inline constexpr std::size_t kGridSize = 41;
inline constexpr std::size_t kGridCenter = 20;

// 41 smoothing factors spread around alpha_star by multiples of sqrt(2):
//   alpha*/(20 sqrt2), ..., alpha*/sqrt2, alpha*, sqrt2 alpha*, ..., 20 sqrt2 alpha*
// Values above 1 are capped at 1 so the width never changes.
struct AlphaGrid {
    std::array<double, kGridSize> alphas{};
    double alpha_star = 0.0;
};

AlphaGrid build_alpha_grid(double alpha_star);

// Pre-clamp grid value at position k (0..40).
double alpha_grid_value(double alpha_star, std::size_t k);

// Row-major (time step x filter) matrix of EMA outputs. Row r describes trace
// index start_index + r.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols, std::size_t start_index = 0)
        : rows_(rows), cols_(cols), start_index_(start_index), data_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t start_index() const noexcept { return start_index_; }

    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }

    std::vector<double> column(std::size_t c) const;

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t start_index_ = 0;
    std::vector<double> data_;
};

// Runs every filter of the grid over the trace in lock step. Column j is
// bit-identical to ema_run(grid.alphas[j], trace, init_state).
FeatureMatrix compute_feature_matrix(const AlphaGrid& grid, const Trace& trace,
                                     double init_state);

// Same bank over an arbitrary filter set.
FeatureMatrix compute_feature_matrix(std::span<const double> alphas, const Trace& trace,
                                     double init_state);

struct Calibration {
    double alpha_star = 0.0;
    double mse = 0.0;
    std::size_t samples = 0;
};

// One trace and its targets. Errors are scored over target indices
// [warmup, |targets|).
struct CalibrationSegment {
    const Trace* trace;
    const TargetSeries* targets;
    double init_state;
    std::size_t warmup;
};

// Picks the candidate with the least mean squared error between the EMA
// output at step i and targets[i]. Ties go to the smaller alpha. Several
// segments are pooled; each runs its own filter so no state crosses a
// segment boundary.
Calibration calibrate_alpha(std::span<const CalibrationSegment> segments,
                            std::span<const double> candidate_alphas);

Calibration calibrate_alpha(const Trace& train_trace, const TargetSeries& targets,
                            std::span<const double> candidate_alphas, double init_state,
                            std::size_t warmup);

// Uses default_init_state and discards targets.window_w samples as warm-up.
Calibration calibrate_alpha(const Trace& train_trace, const TargetSeries& targets,
                            std::span<const double> candidate_alphas);

// Log-spaced sweep, points >= 2, inclusive of both ends.
std::vector<double> log_sweep(double lo, double hi, std::size_t points);

// 61 points from 1e-5 to 1e-1.
std::vector<double> default_alpha_candidates();

} // namespace linkq
