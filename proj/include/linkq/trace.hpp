#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace linkq {

enum class Origin { measured, synthetic };

const char* to_string(Origin origin) noexcept;

// Ordered binary transmission outcomes of one link: 1 when the ACK came back,
// 0 otherwise. Immutable once built.
class Trace {
public:
    // Throws DataError unless every outcome is 0/1, the trace is non-empty and
    // the sample period is positive.
    Trace(std::vector<std::uint8_t> outcomes, double sample_period_s = 0.5,
          std::string channel_label = {}, Origin origin = Origin::measured,
          std::optional<std::uint64_t> seed = std::nullopt);

    std::span<const std::uint8_t> outcomes() const noexcept { return outcomes_; }
    std::size_t size() const noexcept { return outcomes_.size(); }
    std::uint8_t operator[](std::size_t i) const noexcept { return outcomes_[i]; }

    double sample_period_s() const noexcept { return sample_period_s_; }
    const std::string& channel_label() const noexcept { return channel_label_; }
    Origin origin() const noexcept { return origin_; }
    std::optional<std::uint64_t> seed() const noexcept { return seed_; }

    // Fraction of successful outcomes.
    double delivery_ratio() const noexcept;

    bool operator==(const Trace&) const = default;

private:
    std::vector<std::uint8_t> outcomes_;
    double sample_period_s_;
    std::string channel_label_;
    Origin origin_;
    std::optional<std::uint64_t> seed_;
};

inline constexpr std::size_t kDefaultWindow = 3600;

// Forward-looking delivery ratio targets. values[i] is the mean of outcomes
// i+1 .. i+window (0-based), i.e. strictly after the sample a prediction made
// at step i has seen. The last `window` samples have no target.
struct TargetSeries {
    std::vector<double> values;
    std::size_t window_w = kDefaultWindow;

    std::size_t size() const noexcept { return values.size(); }
};

TargetSeries compute_fdr_targets(const Trace& trace, std::size_t window_w = kDefaultWindow);

// Time covered by a target window.
inline double horizon_seconds(std::size_t window_w, double sample_period_s) noexcept {
    return static_cast<double>(window_w) * sample_period_s;
}

// ---- Gilbert-Elliott synthetic channel ----

struct GeParams {
    double p_good_loss = 0.0;
    double p_bad_loss = 1.0;
    double p_g2b = 0.0;
    double p_b2g = 0.0;

    bool operator==(const GeParams&) const = default;
};

struct RegimeSwitch {
    std::size_t start_index;
    GeParams params;

    bool operator==(const RegimeSwitch&) const = default;
};

struct GeChannelSpec {
    GeParams params;
    // Overrides `params` from start_index onward; start indices strictly
    // increasing.
    std::vector<RegimeSwitch> regime_schedule;
    std::uint64_t seed = 0;
};

// Throws ConfigError on probabilities outside [0,1] or a non-increasing
// schedule.
void validate(const GeChannelSpec& spec);

// The chain starts in the GOOD state. Each step first moves the hidden state,
// then emits a failure with the active state's loss probability.
Trace generate_ge_trace(const GeChannelSpec& spec, std::size_t length,
                        std::string channel_label = {}, double sample_period_s = 0.5);

// Random schedule whose regimes last between min_gap and max_gap samples,
// each regime drawn uniformly from the palette. Deterministic in seed.
std::vector<RegimeSwitch> random_regime_schedule(std::span<const GeParams> palette,
                                                 std::size_t length, std::size_t min_gap,
                                                 std::size_t max_gap, std::uint64_t seed);

// ---- File I/O ----

// Header lines "# key=value" (sample_period_s, channel_label, origin, seed),
// then one '0' or '1' per line.
Trace load_trace(const std::filesystem::path& path);
void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace parse_trace(const std::string& text, const std::string& source_name = "<memory>");
std::string format_trace(const Trace& trace);

// ---- Train/test split ----

// 121 training days out of 220 recorded in total.
inline constexpr double kReferenceTrainFraction = 121.0 / 220.0;

// Parts [0, boundary) and [boundary, size). Throws DataError unless
// 0 < boundary < size.
std::pair<Trace, Trace> split_train_test(const Trace& trace, std::size_t boundary_index);

// Boundary at round(fraction * size), fraction in (0, 1).
std::pair<Trace, Trace> split_by_fraction(const Trace& trace, double train_fraction);

} // namespace linkq
