#pragma once

#include "linkq/trace.hpp"

#include <span>
#include <vector>

namespace linkq {

// Signed prediction errors, prediction - target.
struct ErrorSeries {
    std::vector<double> errors;
};

// Throws DataError on length mismatch.
ErrorSeries prediction_errors(std::span<const double> predictions,
                              std::span<const double> targets);
ErrorSeries prediction_errors(std::span<const double> predictions, const TargetSeries& targets);

// Linear interpolation between closest ranks: rank = q/100 * (n-1).
// Throws DataError on empty input, ConfigError for q outside [0, 100].
double percentile(std::span<const double> values, double q);

// Same on data already sorted ascending.
double percentile_sorted(std::span<const double> sorted, double q);

// Error statistics as raw fractions; display scaling happens when rendering.
struct ErrorStats {
    double mu_e2 = 0.0; // squared error
    double e2_p95 = 0.0;
    double e2_max = 0.0;
    double mu_abs = 0.0; // absolute error
    double sigma_abs = 0.0; // population standard deviation
    double abs_p90 = 0.0;
    double abs_p95 = 0.0;
    double abs_p99 = 0.0;
    double abs_max = 0.0;
    double e_min = 0.0; // signed error
    double e_p5 = 0.0;
    double e_p95 = 0.0;
    double e_max = 0.0;

    bool operator==(const ErrorStats&) const = default;
};

inline constexpr const char* kPercentileConvention = "linear interpolation (C=1)";

ErrorStats summarize_errors(const ErrorSeries& errors);

} // namespace linkq
