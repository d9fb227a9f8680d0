#pragma once

#include "linkq/metrics.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace linkq {

enum class TrainingSource { same_channel, all_channels, all_except_test };
enum class ModelKind { ema, hourglass, pyramid };

std::string_view to_string(TrainingSource s) noexcept;
std::string_view to_string(ModelKind m) noexcept;
// Throw ConfigError on unknown names.
TrainingSource parse_training_source(std::string_view name);
ModelKind parse_model_kind(std::string_view name);

// One (test channel, model, training source) cell.
struct ScenarioSpec {
    std::string test_channel;
    TrainingSource source = TrainingSource::same_channel;
    ModelKind model = ModelKind::ema;

    bool operator==(const ScenarioSpec&) const = default;
};

// Short label of the training data: "ch1", "all" or "!ch1".
std::string training_label(const ScenarioSpec& s);

struct ResultRow {
    ScenarioSpec scenario;
    std::vector<std::string> training_channels;
    double alpha_star = 0.0;
    double init_state = 0.0;
    std::size_t samples = 0;
    std::optional<ErrorStats> stats; // empty when the cell failed
    std::string status = "ok";

    bool operator==(const ResultRow&) const = default;
};

struct RenderedReport {
    std::string text;
    std::string csv;
};

// Column order: test channel, model, training channel, model parameters,
// then squared-error stats (x1e-3), absolute-error stats (%) and signed-error
// stats (%). Throws DataError for an empty row list.
RenderedReport render_report(const std::vector<ResultRow>& rows);

std::string render_text_table(const std::vector<ResultRow>& rows);

// Raw fractions at 17 significant digits, one row per cell.
std::string render_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& csv);

// "α*=0.000900"
std::string format_alpha_parameter(double alpha_star);

} // namespace linkq
