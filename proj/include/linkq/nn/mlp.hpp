#pragma once

#include "linkq/ema.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace linkq::nn {

enum class Activation { relu, sigmoid, identity };
enum class Architecture { hourglass, pyramid, custom };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Architecture a) noexcept;
// Throw ConfigError on unknown names.
Activation parse_activation(std::string_view name);
Architecture parse_architecture(std::string_view name);

struct LayerSpec {
    std::size_t width = 1;
    Activation activation = Activation::relu;

    bool operator==(const LayerSpec&) const = default;
};

// Fully connected layer. weights is fan_in x width, row-major, so row i holds
// the outgoing weights of input i.
struct DenseLayer {
    LayerSpec spec;
    std::size_t fan_in = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    std::span<const double> weight_row(std::size_t i) const noexcept {
        return {weights.data() + i * spec.width, spec.width};
    }

    bool operator==(const DenseLayer&) const = default;
};

// How the input features of a model were produced; replayed at test time.
struct FeatureProvenance {
    AlphaGrid grid;
    double init_state = 0.0;
    std::size_t window_w = kDefaultWindow;

    bool operator==(const FeatureProvenance& o) const {
        return grid.alphas == o.grid.alphas && grid.alpha_star == o.grid.alpha_star &&
               init_state == o.init_state && window_w == o.window_w;
    }
};

struct MlpModel {
    std::size_t input_width = kGridSize;
    std::vector<DenseLayer> layers;
    Architecture arch = Architecture::custom;
    std::optional<FeatureProvenance> provenance;

    std::size_t parameter_count() const noexcept;

    // Throws ModelShapeError if shapes do not chain, the output is not a
    // single sigmoid unit, or a parameter is not finite.
    void validate() const;

    bool operator==(const MlpModel&) const = default;
};

// Hidden widths of the canonical shapes: hourglass narrows then widens,
// pyramid narrows monotonically.
std::vector<std::size_t> canonical_hidden_widths(Architecture arch);

// Hidden layers use relu, the single output unit sigmoid. Weights are drawn
// uniformly from +-sqrt(6 / (fan_in + fan_out)), biases start at zero.
MlpModel build_mlp(std::size_t input_width, std::span<const std::size_t> hidden_widths,
                   std::uint64_t seed, Architecture arch = Architecture::custom);

MlpModel build_architecture(Architecture arch, std::size_t input_width = kGridSize,
                            std::uint64_t seed = 0);

// Scratch buffers for repeated forward/backward passes.
struct Workspace {
    std::vector<std::vector<double>> activations; // output of each layer
    std::vector<std::vector<double>> deltas;

    explicit Workspace(const MlpModel& model);
};

double forward(const MlpModel& model, std::span<const double> input);
double forward(const MlpModel& model, std::span<const double> input, Workspace& ws);

std::vector<double> predict_series(const MlpModel& model, const FeatureMatrix& features);

// Mean squared error. Throws DataError on empty input or length mismatch.
double loss_mse(std::span<const double> predictions, std::span<const double> targets);

// Per-parameter gradients; shapes mirror the model.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static Gradients zeros_like(const MlpModel& model);
    void set_zero() noexcept;
};

struct BatchGradients {
    Gradients gradients;
    double loss = 0.0; // batch-mean squared error before the update
};

// Gradient of the batch-mean squared error. inputs is row-major
// (batch x input_width).
BatchGradients backward(const MlpModel& model, std::span<const double> inputs,
                        std::span<const double> targets);

// Adds the gradient contribution of one sample, scaled by 1/batch_size, into
// grads and returns the sample's squared error.
double accumulate_sample(const MlpModel& model, std::span<const double> input, double target,
                         double batch_size, Workspace& ws, Gradients& grads);

} // namespace linkq::nn
