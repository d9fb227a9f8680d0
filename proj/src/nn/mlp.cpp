#include "linkq/nn/mlp.hpp"

#include "linkq/error.hpp"
#include "linkq/rng.hpp"
#include "linkq/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace linkq::nn {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
    }
    return "unknown";
}

std::string_view to_string(Architecture a) noexcept {
    switch (a) {
    case Architecture::hourglass: return "hourglass";
    case Architecture::pyramid: return "pyramid";
    case Architecture::custom: return "custom";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Architecture parse_architecture(std::string_view name) {
    if (name == "hourglass") return Architecture::hourglass;
    if (name == "pyramid") return Architecture::pyramid;
    if (name == "custom") return Architecture::custom;
    throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

void MlpModel::validate() const {
    if (input_width == 0) throw ModelShapeError("model input width must be positive");
    if (layers.empty()) throw ModelShapeError("model has no layers");
    std::size_t prev = input_width;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const std::string name = "layer " + std::to_string(l);
        if (layer.spec.width == 0) throw ModelShapeError(name + " has zero width");
        if (layer.fan_in != prev)
            throw ModelShapeError(name + " expects " + std::to_string(layer.fan_in) +
                                  " inputs but receives " + std::to_string(prev));
        if (layer.weights.size() != layer.fan_in * layer.spec.width)
            throw ModelShapeError(name + " weight count does not match " +
                                  std::to_string(layer.fan_in) + "x" +
                                  std::to_string(layer.spec.width));
        if (layer.biases.size() != layer.spec.width)
            throw ModelShapeError(name + " bias count does not match its width");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
            !std::all_of(layer.biases.begin(), layer.biases.end(), finite))
            throw ModelShapeError(name + " holds non-finite parameters");
        prev = layer.spec.width;
    }
    const auto& out = layers.back().spec;
    if (out.width != 1 || out.activation != Activation::sigmoid)
        throw ModelShapeError("output layer must be a single sigmoid unit");
}

std::vector<std::size_t> canonical_hidden_widths(Architecture arch) {
    switch (arch) {
    case Architecture::hourglass: return {32, 8, 32};
    case Architecture::pyramid: return {32, 16, 8};
    case Architecture::custom: break;
    }
    throw ConfigError("custom architectures have no canonical widths");
}

MlpModel build_mlp(std::size_t input_width, std::span<const std::size_t> hidden_widths,
                   std::uint64_t seed, Architecture arch) {
    if (input_width == 0) throw ConfigError("input width must be positive");
    MlpModel model;
    model.input_width = input_width;
    model.arch = arch;
    std::mt19937_64 gen(seed);
    std::size_t fan_in = input_width;
    auto add_layer = [&](std::size_t width, Activation act) {
        if (width == 0) throw ConfigError("layer width must be positive");
        DenseLayer layer;
        layer.spec = {width, act};
        layer.fan_in = fan_in;
        layer.weights.resize(fan_in * width);
        layer.biases.assign(width, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + width));
        for (auto& w : layer.weights) w = (2.0 * uniform01(gen) - 1.0) * limit;
        model.layers.push_back(std::move(layer));
        fan_in = width;
    };
    for (auto w : hidden_widths) add_layer(w, Activation::relu);
    add_layer(1, Activation::sigmoid);
    return model;
}

MlpModel build_architecture(Architecture arch, std::size_t input_width, std::uint64_t seed) {
    if (arch == Architecture::custom)
        throw ConfigError("use build_mlp for custom architectures");
    const auto widths = canonical_hidden_widths(arch);
    return build_mlp(input_width, widths, seed, arch);
}

Workspace::Workspace(const MlpModel& model) {
    for (const auto& l : model.layers) {
        activations.emplace_back(l.spec.width);
        deltas.emplace_back(l.spec.width);
    }
}

namespace {

inline double activate(Activation a, double z) noexcept {
    switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::identity: return z;
    }
    return z;
}

// Derivative expressed through the activation output y.
inline double activation_slope(Activation a, double y) noexcept {
    switch (a) {
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::identity: return 1.0;
    }
    return 1.0;
}

void check_width(const MlpModel& model, std::size_t width) {
    if (width != model.input_width)
        throw DataError("input has " + std::to_string(width) + " features, model expects " +
                        std::to_string(model.input_width));
}

// Forward pass without width checks; fills ws.activations.
double forward_unchecked(const MlpModel& model, const double* input, Workspace& ws) {
    const auto& k = simd::active();
    const double* in = input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        auto& out = ws.activations[l];
        const std::size_t width = layer.spec.width;
        std::copy(layer.biases.begin(), layer.biases.end(), out.begin());
        for (std::size_t i = 0; i < layer.fan_in; ++i)
            k.axpy(in[i], layer.weights.data() + i * width, out.data(), width);
        for (auto& z : out) z = activate(layer.spec.activation, z);
        in = out.data();
    }
    return ws.activations.back()[0];
}

} // namespace

double forward(const MlpModel& model, std::span<const double> input, Workspace& ws) {
    check_width(model, input.size());
    return forward_unchecked(model, input.data(), ws);
}

double forward(const MlpModel& model, std::span<const double> input) {
    Workspace ws(model);
    return forward(model, input, ws);
}

std::vector<double> predict_series(const MlpModel& model, const FeatureMatrix& features) {
    check_width(model, features.cols());
    Workspace ws(model);
    std::vector<double> out(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r)
        out[r] = forward_unchecked(model, features.row(r).data(), ws);
    return out;
}

double loss_mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw DataError("prediction/target length mismatch: " +
                        std::to_string(predictions.size()) + " vs " +
                        std::to_string(targets.size()));
    if (predictions.empty()) throw DataError("loss of an empty series");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

Gradients Gradients::zeros_like(const MlpModel& model) {
    Gradients g;
    for (const auto& l : model.layers) {
        g.weights.emplace_back(l.weights.size(), 0.0);
        g.biases.emplace_back(l.biases.size(), 0.0);
    }
    return g;
}

void Gradients::set_zero() noexcept {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

double accumulate_sample(const MlpModel& model, std::span<const double> input, double target,
                         double batch_size, Workspace& ws, Gradients& grads) {
    const auto& k = simd::active();
    const double y = forward_unchecked(model, input.data(), ws);
    const double err = y - target;

    // d(mean sq err)/dy for this sample
    const std::size_t last = model.layers.size() - 1;
    ws.deltas[last][0] =
        2.0 * err / batch_size * activation_slope(model.layers[last].spec.activation, y);

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& layer = model.layers[l];
        const std::size_t width = layer.spec.width;
        const double* in = l == 0 ? input.data() : ws.activations[l - 1].data();
        const auto& delta = ws.deltas[l];
        auto& gb = grads.biases[l];
        for (std::size_t j = 0; j < width; ++j) gb[j] += delta[j];
        auto& gw = grads.weights[l];
        for (std::size_t i = 0; i < layer.fan_in; ++i)
            k.axpy(in[i], delta.data(), gw.data() + i * width, width);
        if (l > 0) {
            const auto& prev = model.layers[l - 1];
            auto& prev_delta = ws.deltas[l - 1];
            for (std::size_t i = 0; i < layer.fan_in; ++i)
                prev_delta[i] = k.dot(layer.weights.data() + i * width, delta.data(), width) *
                                activation_slope(prev.spec.activation, in[i]);
        }
    }
    return err * err;
}

BatchGradients backward(const MlpModel& model, std::span<const double> inputs,
                        std::span<const double> targets) {
    if (targets.empty()) throw DataError("backward needs a non-empty batch");
    if (inputs.size() != targets.size() * model.input_width)
        throw DataError("batch inputs do not match " + std::to_string(targets.size()) + " x " +
                        std::to_string(model.input_width));
    BatchGradients out{Gradients::zeros_like(model), 0.0};
    Workspace ws(model);
    const double b = static_cast<double>(targets.size());
    double sq = 0.0;
    for (std::size_t s = 0; s < targets.size(); ++s)
        sq += accumulate_sample(model, inputs.subspan(s * model.input_width, model.input_width),
                                targets[s], b, ws, out.gradients);
    out.loss = sq / b;
    return out;
}

} // namespace linkq::nn
