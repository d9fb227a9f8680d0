#pragma once

#include "linkq/config.hpp"
#include "linkq/ema.hpp"
#include "linkq/nn/train.hpp"
#include "linkq/report.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace linkq {

// Featurizes each trace on its own (EMA state never crosses a trace boundary)
// and concatenates the (feature row, target) pairs in the given order. Rows
// before warmup in each trace are dropped. Throws DataError on an empty list
// or mismatched sample periods.
nn::TrainingSet merge_training_traces(std::span<const Trace> traces, const AlphaGrid& grid,
                                      double init_state, std::size_t window_w,
                                      std::size_t warmup);

// Mean of the first min(window_w, |trace|) outcomes pooled over all traces.
double pooled_init_state(std::span<const Trace> traces, std::size_t window_w);

// Error statistics of a prediction series over target indices
// [warmup, |targets|).
struct Evaluation {
    ErrorStats stats;
    std::size_t samples = 0;
};
Evaluation evaluate_predictions(std::span<const double> predictions, const TargetSeries& targets,
                                std::size_t warmup);

// EMA at a fixed alpha on a test trace.
Evaluation evaluate_ema(double alpha, double init_state, const Trace& test,
                        std::size_t window_w, std::size_t warmup);

// Trained network on a test trace, replaying the model's feature provenance.
Evaluation evaluate_model(const nn::MlpModel& model, const Trace& test, std::size_t warmup);

struct ExperimentResult {
    std::vector<ResultRow> rows; // ordered by (test channel, source, model) in config order
    std::string csv;
    std::string report;
    std::string manifest;
    std::vector<std::filesystem::path> model_files;
    std::vector<int> failure_codes; // one exit code per failed cell

    bool all_ok() const;
    // Exit code of the first failed cell, 0 if none failed.
    int failure_exit_code() const;
};

// Calibrates, trains and evaluates every requested cell and writes
// results.csv, report.txt, manifest.txt and models/ under cfg.out_dir. Cell
// failures are recorded in their rows; the remaining cells still run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes every synthetic channel as <label>.train.trace / <label>.test.trace
// under dir and returns a config that reads those files instead.
ExperimentConfig materialize_channels(const ExperimentConfig& cfg,
                                      const std::filesystem::path& dir);

} // namespace linkq
