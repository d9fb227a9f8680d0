#pragma once

#include "linkq/nn/mlp.hpp"

#include <cstdint>
#include <vector>

namespace linkq::nn {

struct AdamState {
    // One accumulator per parameter tensor, ordered w0, b0, w1, b1, ...
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step_count = 0;

    static AdamState for_model(const MlpModel& model);

    bool operator==(const AdamState&) const = default;
};

// One Adam step in place. Throws NumericalError naming the offending tensor
// if any gradient is not finite; nothing is modified in that case.
void adam_update(MlpModel& model, const Gradients& grads, AdamState& state, double lr);

struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 64;
    double lr0 = 0.01; // halved after every epoch
    std::uint64_t seed = 0;
    bool shuffle = true;
};

void validate(const TrainConfig& cfg);

// Learning rate used during epoch (1-based): lr0 / 2^(epoch-1).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

// Rows presented in epoch (1-based). Depends only on its arguments.
std::vector<std::size_t> shuffle_order(std::uint64_t seed, std::size_t epoch, std::size_t rows);

// Flat (input row, target) pairs.
struct TrainingSet {
    std::size_t width = kGridSize;
    std::vector<double> inputs; // rows x width
    std::vector<double> targets;

    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> row(std::size_t r) const noexcept {
        return {inputs.data() + r * width, width};
    }
    void append(const TrainingSet& other);
};

// Pairs feature row i with targets[i] for i in [first_row, |targets|).
TrainingSet make_training_set(const FeatureMatrix& features, const TargetSeries& targets,
                              std::size_t first_row = 0);

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history; // full-set MSE after each epoch
    std::vector<double> lr_history;
    std::uint64_t updates = 0;
};

// Minibatch Adam on the MSE. The last short batch of an epoch is kept. Fully
// deterministic for fixed (model, data, cfg).
TrainResult train(MlpModel model, const TrainingSet& data, const TrainConfig& cfg);

TrainResult train(MlpModel model, const FeatureMatrix& features, const TargetSeries& targets,
                  const TrainConfig& cfg);

} // namespace linkq::nn
