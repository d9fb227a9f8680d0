#include "linkq/metrics.hpp"

#include "linkq/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace linkq {

ErrorSeries prediction_errors(std::span<const double> predictions,
                              std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw DataError("cannot align " + std::to_string(predictions.size()) +
                        " predictions with " + std::to_string(targets.size()) + " targets");
    ErrorSeries out;
    out.errors.resize(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i)
        out.errors[i] = predictions[i] - targets[i];
    return out;
}

ErrorSeries prediction_errors(std::span<const double> predictions, const TargetSeries& targets) {
    return prediction_errors(predictions, std::span<const double>(targets.values));
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DataError("percentile of an empty sequence");
    if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
    const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    if (lo == hi) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, q);
}

ErrorStats summarize_errors(const ErrorSeries& series) {
    const auto& e = series.errors;
    if (e.empty()) throw DataError("cannot summarize an empty error series");
    const double n = static_cast<double>(e.size());

    std::vector<double> sq(e.size()), abs(e.size()), signed_sorted(e);
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!std::isfinite(e[i])) throw NumericalError("non-finite prediction error");
        sq[i] = e[i] * e[i];
        abs[i] = std::fabs(e[i]);
        sum_sq += sq[i];
        sum_abs += abs[i];
    }
    std::sort(sq.begin(), sq.end());
    std::sort(abs.begin(), abs.end());
    std::sort(signed_sorted.begin(), signed_sorted.end());

    ErrorStats s;
    s.mu_e2 = sum_sq / n;
    s.e2_p95 = percentile_sorted(sq, 95);
    s.e2_max = sq.back();
    s.mu_abs = sum_abs / n;
    double var = 0.0;
    for (double a : abs) var += (a - s.mu_abs) * (a - s.mu_abs);
    s.sigma_abs = std::sqrt(var / n);
    s.abs_p90 = percentile_sorted(abs, 90);
    s.abs_p95 = percentile_sorted(abs, 95);
    s.abs_p99 = percentile_sorted(abs, 99);
    s.abs_max = abs.back();
    s.e_min = signed_sorted.front();
    s.e_p5 = percentile_sorted(signed_sorted, 5);
    s.e_p95 = percentile_sorted(signed_sorted, 95);
    s.e_max = signed_sorted.back();
    return s;
}

} // namespace linkq
