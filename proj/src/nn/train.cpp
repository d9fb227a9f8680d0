#include "linkq/nn/train.hpp"

#include "linkq/error.hpp"
#include "linkq/rng.hpp"
#include "linkq/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace linkq::nn {

AdamState AdamState::for_model(const MlpModel& model) {
    AdamState s;
    for (const auto& l : model.layers) {
        s.m.emplace_back(l.weights.size(), 0.0);
        s.m.emplace_back(l.biases.size(), 0.0);
        s.v.emplace_back(l.weights.size(), 0.0);
        s.v.emplace_back(l.biases.size(), 0.0);
    }
    return s;
}

void adam_update(MlpModel& model, const Gradients& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    const std::size_t tensors = model.layers.size() * 2;
    if (grads.weights.size() != model.layers.size() || grads.biases.size() != model.layers.size() ||
        state.m.size() != tensors || state.v.size() != tensors)
        throw DataError("optimizer state does not match the model");

    auto tensor_name = [](std::size_t l, bool bias) {
        return "layer " + std::to_string(l) + (bias ? " biases" : " weights");
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (bool bias : {false, true}) {
            const auto& g = bias ? grads.biases[l] : grads.weights[l];
            const auto& p = bias ? model.layers[l].biases : model.layers[l].weights;
            if (g.size() != p.size() || state.m[2 * l + bias].size() != p.size())
                throw DataError("gradient shape mismatch in " + tensor_name(l, bias));
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!std::isfinite(g[i]))
                    throw NumericalError("non-finite gradient in " + tensor_name(l, bias) +
                                         " at element " + std::to_string(i));
        }
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const simd::AdamCoeffs c{lr,
                             state.beta1,
                             state.beta2,
                             state.epsilon,
                             1.0 - std::pow(state.beta1, t),
                             1.0 - std::pow(state.beta2, t)};
    const auto& k = simd::active();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        k.adam_step(layer.weights.data(), grads.weights[l].data(), state.m[2 * l].data(),
                    state.v[2 * l].data(), layer.weights.size(), c);
        k.adam_step(layer.biases.data(), grads.biases[l].data(), state.m[2 * l + 1].data(),
                    state.v[2 * l + 1].data(), layer.biases.size(), c);
    }
}

void validate(const TrainConfig& cfg) {
    if (cfg.epochs == 0) throw ConfigError("epochs must be at least 1");
    if (cfg.batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (!(cfg.lr0 > 0.0) || !std::isfinite(cfg.lr0))
        throw ConfigError("initial learning rate must be positive");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
    return std::ldexp(cfg.lr0, -static_cast<int>(epoch - 1));
}

std::vector<std::size_t> shuffle_order(std::uint64_t seed, std::size_t epoch, std::size_t rows) {
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 gen(mix_seed(seed, epoch));
    fisher_yates(order, gen);
    return order;
}

void TrainingSet::append(const TrainingSet& other) {
    if (other.width != width) throw DataError("cannot merge training sets of different width");
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

TrainingSet make_training_set(const FeatureMatrix& features, const TargetSeries& targets,
                              std::size_t first_row) {
    if (features.rows() < targets.size())
        throw DataError("feature matrix has fewer rows than there are targets");
    TrainingSet set;
    set.width = features.cols();
    if (first_row >= targets.size()) return set;
    const std::size_t n = targets.size() - first_row;
    set.inputs.assign(features.data().begin() + static_cast<std::ptrdiff_t>(first_row * set.width),
                      features.data().begin() +
                          static_cast<std::ptrdiff_t>((first_row + n) * set.width));
    set.targets.assign(targets.values.begin() + static_cast<std::ptrdiff_t>(first_row),
                       targets.values.end());
    return set;
}

namespace {

double dataset_mse(const MlpModel& model, const TrainingSet& data, Workspace& ws) {
    double sum = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const double d = forward(model, data.row(r), ws) - data.targets[r];
        sum += d * d;
    }
    return sum / static_cast<double>(data.size());
}

} // namespace

TrainResult train(MlpModel model, const TrainingSet& data, const TrainConfig& cfg) {
    validate(cfg);
    model.validate();
    if (data.size() == 0) throw DataError("training set has no rows");
    if (data.width != model.input_width)
        throw DataError("training rows have " + std::to_string(data.width) +
                        " features, model expects " + std::to_string(model.input_width));

    TrainResult result;
    AdamState adam = AdamState::for_model(model);
    Workspace ws(model);
    Gradients grads = Gradients::zeros_like(model);
    const std::size_t rows = data.size();

    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = learning_rate(cfg, epoch);
        result.lr_history.push_back(lr);
        if (cfg.shuffle) order = shuffle_order(cfg.seed, epoch, rows);

        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < rows; start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(rows, start + cfg.batch_size);
            const double b = static_cast<double>(end - start);
            grads.set_zero();
            double sq = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t r = order[s];
                sq += accumulate_sample(model, data.row(r), data.targets[r], b, ws, grads);
            }
            if (!std::isfinite(sq))
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index));
            try {
                adam_update(model, grads, adam, lr);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index) + ")");
            }
            ++result.updates;
        }

        const double loss = dataset_mse(model, data, ws);
        if (!std::isfinite(loss))
            throw NumericalError("non-finite loss after epoch " + std::to_string(epoch));
        result.loss_history.push_back(loss);
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(MlpModel model, const FeatureMatrix& features, const TargetSeries& targets,
                  const TrainConfig& cfg) {
    return train(std::move(model), make_training_set(features, targets), cfg);
}

} // namespace linkq::nn
