#pragma once

#include "linkq/nn/train.hpp"
#include "linkq/report.hpp"
#include "linkq/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace linkq {

// Where a channel's traces come from.
struct ChannelSource {
    enum class Kind {
        files, // separate training and test trace files
        file,  // one trace file, split by train_fraction
        ge,    // synthetic Gilbert-Elliott trace, split by train_fraction
    };

    std::string label;
    Kind kind = Kind::ge;
    std::filesystem::path train_file;
    std::filesystem::path test_file;
    std::filesystem::path file;
    GeChannelSpec ge;
    std::size_t length = 0;
    double sample_period_s = 0.5;
};

struct AlphaSweep {
    double min = 1e-5;
    double max = 1e-1;
    std::size_t points = 61;
};

struct ExperimentConfig {
    std::vector<ChannelSource> channels;
    std::size_t window_w = kDefaultWindow;
    std::optional<std::size_t> warmup; // defaults to window_w
    double train_fraction = 0.6;
    nn::TrainConfig train;
    std::map<nn::Architecture, std::vector<std::size_t>> hidden_widths{
        {nn::Architecture::hourglass, {32, 8, 32}},
        {nn::Architecture::pyramid, {32, 16, 8}},
    };
    AlphaSweep sweep;
    std::filesystem::path out_dir = "linkq-out";
    std::uint64_t seed = 0;
    std::vector<ModelKind> models{ModelKind::ema, ModelKind::hourglass, ModelKind::pyramid};
    std::vector<TrainingSource> sources{TrainingSource::same_channel, TrainingSource::all_channels,
                                       TrainingSource::all_except_test};
    std::vector<std::string> test_channels; // empty: every channel
    std::size_t threads = 0;                // 0: hardware concurrency
    std::string source_text;                // config file bytes, hashed into the manifest

    std::size_t effective_warmup() const noexcept { return warmup.value_or(window_w); }
    const ChannelSource& channel(const std::string& label) const;
};

// Throws ConfigError on duplicate labels, unknown keys or invalid values.
void validate(const ExperimentConfig& cfg);

// INI text: [experiment], [training], [calibration] and one
// [channel.<label>] section per channel. Relative paths resolve against
// base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Generates the full trace of a synthetic channel.
Trace simulate_channel(const ChannelSource& ch);

} // namespace linkq
