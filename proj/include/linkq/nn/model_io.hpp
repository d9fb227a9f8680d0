#pragma once

#include "linkq/nn/mlp.hpp"

#include <filesystem>
#include <string>

namespace linkq::nn {

inline constexpr int kModelFormatVersion = 1;

// Text format: a "linkq-model" magic line, format_version, the architecture
// block, the optional alpha-grid provenance block, then every layer's weights
// (row-major) and biases, numbers written with 17 significant digits.
//
// Errors: ModelVersionError for an unsupported format_version,
// ModelShapeError when declared shapes disagree with each other or with the
// number of values, ModelFormatError for everything else.
std::string format_model(const MlpModel& model);
MlpModel parse_model(const std::string& text);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

} // namespace linkq::nn
