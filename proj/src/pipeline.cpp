#include "linkq/pipeline.hpp"

#include "linkq/error.hpp"
#include "linkq/nn/model_io.hpp"
#include "linkq/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

namespace linkq {

nn::TrainingSet merge_training_traces(std::span<const Trace> traces, const AlphaGrid& grid,
                                      double init_state, std::size_t window_w,
                                      std::size_t warmup) {
    if (traces.empty()) throw DataError("no training traces to merge");
    for (const auto& t : traces)
        if (t.sample_period_s() != traces.front().sample_period_s())
            throw DataError("cannot merge traces with different sample periods ('" +
                            traces.front().channel_label() + "' vs '" + t.channel_label() + "')");
    nn::TrainingSet merged;
    merged.width = grid.alphas.size();
    for (const auto& t : traces) {
        const auto targets = compute_fdr_targets(t, window_w);
        const auto features = compute_feature_matrix(grid, t, init_state);
        merged.append(nn::make_training_set(features, targets, warmup));
    }
    return merged;
}

double pooled_init_state(std::span<const Trace> traces, std::size_t window_w) {
    if (traces.empty()) throw DataError("no traces for the initial EMA state");
    std::size_t ones = 0;
    std::size_t count = 0;
    for (const auto& t : traces) {
        const std::size_t n = std::min(window_w, t.size());
        const auto x = t.outcomes();
        ones += std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n),
                                std::size_t{0});
        count += n;
    }
    return static_cast<double>(ones) / static_cast<double>(count);
}

Evaluation evaluate_predictions(std::span<const double> predictions, const TargetSeries& targets,
                                std::size_t warmup) {
    if (predictions.size() < targets.size())
        throw DataError("fewer predictions than targets");
    if (warmup >= targets.size())
        throw DataError("test trace leaves no samples after a warm-up of " +
                        std::to_string(warmup));
    const std::size_t n = targets.size() - warmup;
    const auto errors = prediction_errors(predictions.subspan(warmup, n),
                                          std::span<const double>(targets.values).subspan(warmup, n));
    return {summarize_errors(errors), n};
}

Evaluation evaluate_ema(double alpha, double init_state, const Trace& test, std::size_t window_w,
                        std::size_t warmup) {
    const auto targets = compute_fdr_targets(test, window_w);
    const auto preds = ema_run(alpha, test, init_state);
    return evaluate_predictions(preds, targets, warmup);
}

Evaluation evaluate_model(const nn::MlpModel& model, const Trace& test, std::size_t warmup) {
    if (!model.provenance) throw DataError("model carries no feature provenance");
    const auto& p = *model.provenance;
    const auto targets = compute_fdr_targets(test, p.window_w);
    const auto features = compute_feature_matrix(p.grid, test, p.init_state);
    const auto preds = nn::predict_series(model, features);
    return evaluate_predictions(preds, targets, warmup);
}

bool ExperimentResult::all_ok() const { return failure_codes.empty(); }

int ExperimentResult::failure_exit_code() const {
    return failure_codes.empty() ? 0 : failure_codes.front();
}

namespace {

// Loads channel traces on first use; a test-only cell never opens the
// training file.
class TraceStore {
public:
    explicit TraceStore(const ExperimentConfig& cfg) : cfg_(cfg) {
        for (const auto& c : cfg.channels) slots_.emplace(c.label, std::make_unique<Slot>());
    }

    const Trace& train(const std::string& label) { return get(label, true); }
    const Trace& test(const std::string& label) { return get(label, false); }

private:
    struct Slot {
        std::mutex mu;
        std::optional<Trace> train;
        std::optional<Trace> test;
    };

    const Trace& get(const std::string& label, bool want_train) {
        const auto& src = cfg_.channel(label);
        Slot& slot = *slots_.at(label);
        std::lock_guard lock(slot.mu);
        auto& wanted = want_train ? slot.train : slot.test;
        if (wanted) return *wanted;
        switch (src.kind) {
        case ChannelSource::Kind::files: {
            Trace t = load_trace(want_train ? src.train_file : src.test_file);
            if (t.channel_label().empty())
                t = Trace(std::vector<std::uint8_t>(t.outcomes().begin(), t.outcomes().end()),
                          t.sample_period_s(), label, t.origin(), t.seed());
            wanted = std::move(t);
            break;
        }
        case ChannelSource::Kind::file:
        case ChannelSource::Kind::ge: {
            const Trace full =
                src.kind == ChannelSource::Kind::ge ? simulate_channel(src) : load_trace(src.file);
            auto [tr, te] = split_by_fraction(full, cfg_.train_fraction);
            slot.train = std::move(tr);
            slot.test = std::move(te);
            break;
        }
        }
        return *wanted;
    }

    const ExperimentConfig& cfg_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
};

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

struct Failure {
    int code = 0;
    std::string message;
};

template <class F>
std::optional<Failure> capture(F&& fn) {
    try {
        fn();
        return std::nullopt;
    } catch (const Error& e) {
        return Failure{e.exit_code(), e.what()};
    } catch (const std::exception& e) {
        return Failure{static_cast<int>(Error::Category::numerical), e.what()};
    }
}

struct TrainingSetJob {
    std::string name;
    std::vector<std::string> channels;
    Calibration calibration;
    double init_state = 0.0;
    std::optional<Failure> failure;
};

struct ModelJob {
    std::size_t set_index;
    ModelKind kind;
    std::uint64_t seed = 0;
    std::filesystem::path file;
    nn::MlpModel model;
    double final_loss = 0.0;
    std::optional<Failure> failure;
};

struct CellJob {
    ScenarioSpec scenario;
    std::size_t set_index;
    std::optional<std::size_t> model_index;
    std::optional<Evaluation> evaluation;
    std::optional<Failure> failure;
};

std::string training_set_name(const ScenarioSpec& s) {
    switch (s.source) {
    case TrainingSource::same_channel: return s.test_channel;
    case TrainingSource::all_channels: return "all";
    case TrainingSource::all_except_test: return "all-except-" + s.test_channel;
    }
    return "?";
}

nn::Architecture architecture_of(ModelKind kind) {
    return kind == ModelKind::hourglass ? nn::Architecture::hourglass : nn::Architecture::pyramid;
}

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::size_t window_w = cfg.window_w;
    const std::size_t warmup = cfg.effective_warmup();
    const auto candidates = log_sweep(cfg.sweep.min, cfg.sweep.max, cfg.sweep.points);

    std::vector<std::string> labels;
    for (const auto& c : cfg.channels) labels.push_back(c.label);
    const std::vector<std::string> test_channels =
        cfg.test_channels.empty() ? labels : cfg.test_channels;

    // Enumerate cells and the distinct training sets / models they need.
    std::vector<TrainingSetJob> sets;
    std::vector<ModelJob> models;
    std::vector<CellJob> cells;
    std::map<std::string, std::size_t> set_index;
    std::map<std::pair<std::size_t, ModelKind>, std::size_t> model_index;
    for (const auto& test : test_channels) {
        for (auto source : cfg.sources) {
            for (auto kind : cfg.models) {
                ScenarioSpec s{test, source, kind};
                const auto name = training_set_name(s);
                auto [it, inserted] = set_index.try_emplace(name, sets.size());
                if (inserted) {
                    TrainingSetJob job;
                    job.name = name;
                    for (const auto& l : labels) {
                        const bool use = source == TrainingSource::same_channel ? l == test
                                         : source == TrainingSource::all_channels ? true
                                                                                  : l != test;
                        if (use) job.channels.push_back(l);
                    }
                    sets.push_back(std::move(job));
                }
                CellJob cell{s, it->second, std::nullopt, std::nullopt, std::nullopt};
                if (kind != ModelKind::ema) {
                    auto [mit, minserted] = model_index.try_emplace({it->second, kind}, models.size());
                    if (minserted) {
                        ModelJob m;
                        m.set_index = it->second;
                        m.kind = kind;
                        m.seed = mix_seed(cfg.seed, fnv1a(name + "/" + std::string(to_string(kind))));
                        m.file = std::filesystem::path("models") /
                                 (name + "__" + std::string(to_string(kind)) + ".model");
                        models.push_back(std::move(m));
                    }
                    cell.model_index = mit->second;
                }
                cells.push_back(std::move(cell));
            }
        }
    }

    std::filesystem::create_directories(cfg.out_dir / "models");
    TraceStore store(cfg);

    auto training_traces = [&](const TrainingSetJob& job) {
        std::vector<Trace> traces;
        for (const auto& l : job.channels) traces.push_back(store.train(l));
        return traces;
    };

    // Calibration of alpha* per training set.
    parallel_for(sets.size(), cfg.threads, [&](std::size_t i) {
        auto& job = sets[i];
        job.failure = capture([&] {
            if (job.channels.empty())
                throw ConfigError("training set '" + job.name + "' has no channels");
            const auto traces = training_traces(job);
            job.init_state = pooled_init_state(traces, window_w);
            std::vector<TargetSeries> targets;
            for (const auto& t : traces) targets.push_back(compute_fdr_targets(t, window_w));
            std::vector<CalibrationSegment> segs;
            for (std::size_t k = 0; k < traces.size(); ++k)
                segs.push_back({&traces[k], &targets[k], job.init_state, warmup});
            job.calibration = calibrate_alpha(segs, candidates);
        });
    });

    // Network training per (training set, architecture).
    parallel_for(models.size(), cfg.threads, [&](std::size_t i) {
        auto& job = models[i];
        const auto& set = sets[job.set_index];
        if (set.failure) {
            job.failure = set.failure;
            return;
        }
        job.failure = capture([&] {
            const auto traces = training_traces(set);
            const auto grid = build_alpha_grid(set.calibration.alpha_star);
            const auto data = merge_training_traces(traces, grid, set.init_state, window_w, warmup);
            const auto arch = architecture_of(job.kind);
            auto model = nn::build_mlp(grid.alphas.size(), cfg.hidden_widths.at(arch),
                                       mix_seed(job.seed, 1), arch);
            model.provenance = nn::FeatureProvenance{grid, set.init_state, window_w};
            auto tc = cfg.train;
            tc.seed = mix_seed(job.seed, 2);
            auto result = nn::train(std::move(model), data, tc);
            job.final_loss = result.loss_history.back();
            job.model = std::move(result.model);
            nn::save_model(job.model, cfg.out_dir / job.file);
        });
    });

    // Evaluation on each test channel.
    parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
        auto& cell = cells[i];
        const auto& set = sets[cell.set_index];
        if (set.failure) {
            cell.failure = set.failure;
            return;
        }
        if (cell.model_index && models[*cell.model_index].failure) {
            cell.failure = models[*cell.model_index].failure;
            return;
        }
        cell.failure = capture([&] {
            const Trace& test = store.test(cell.scenario.test_channel);
            if (cell.model_index)
                cell.evaluation = evaluate_model(models[*cell.model_index].model, test, warmup);
            else
                cell.evaluation = evaluate_ema(set.calibration.alpha_star, set.init_state, test,
                                               window_w, warmup);
        });
    });

    ExperimentResult result;
    for (const auto& cell : cells) {
        const auto& set = sets[cell.set_index];
        ResultRow row;
        row.scenario = cell.scenario;
        row.training_channels = set.channels;
        row.alpha_star = set.calibration.alpha_star;
        row.init_state = set.init_state;
        if (cell.evaluation) {
            row.stats = cell.evaluation->stats;
            row.samples = cell.evaluation->samples;
        } else {
            row.status = cell.failure ? cell.failure->message : "not evaluated";
            result.failure_codes.push_back(cell.failure ? cell.failure->code : 3);
        }
        result.rows.push_back(std::move(row));
    }

    const auto rendered = render_report(result.rows);
    result.csv = rendered.csv;
    result.report = rendered.text;

    std::string m = "linkq-manifest\n";
    m += "config_hash=" + hex64(fnv1a(cfg.source_text)) + "\n";
    m += "seed=" + std::to_string(cfg.seed) + "\n";
    m += "window_w=" + std::to_string(window_w) + "\n";
    m += "warmup=" + std::to_string(warmup) + "\n";
    m += "train_fraction=" + num17(cfg.train_fraction) + "\n";
    m += "alpha_sweep=" + num17(cfg.sweep.min) + ".." + num17(cfg.sweep.max) + " x" +
         std::to_string(cfg.sweep.points) + " (log)\n";
    m += "epochs=" + std::to_string(cfg.train.epochs) +
         " batch_size=" + std::to_string(cfg.train.batch_size) + " lr0=" + num17(cfg.train.lr0) +
         " lr_schedule=halve-per-epoch shuffle=" + (cfg.train.shuffle ? "true" : "false") + "\n";
    m += "merge=per-channel features and targets, concatenated in config order\n";
    m += std::string("percentiles=") + kPercentileConvention + "\n";
    for (const auto& s : sets) {
        m += "\n[training_set " + s.name + "]\nchannels=";
        for (std::size_t k = 0; k < s.channels.size(); ++k) m += (k ? "," : "") + s.channels[k];
        m += "\n";
        if (s.failure) {
            m += "failed=" + s.failure->message + "\n";
            continue;
        }
        m += "alpha_star=" + num17(s.calibration.alpha_star) + "\n";
        m += "calibration_mse=" + num17(s.calibration.mse) + "\n";
        m += "calibration_samples=" + std::to_string(s.calibration.samples) + "\n";
        m += "init_state=" + num17(s.init_state) + "\n";
    }
    for (const auto& job : models) {
        m += "\n[model " + sets[job.set_index].name + "/" + std::string(to_string(job.kind)) + "]\n";
        m += "seed=" + std::to_string(job.seed) + "\n";
        if (job.failure) {
            m += "failed=" + job.failure->message + "\n";
            continue;
        }
        m += "file=" + job.file.generic_string() + "\n";
        m += "final_train_mse=" + num17(job.final_loss) + "\n";
        result.model_files.push_back(cfg.out_dir / job.file);
    }
    result.manifest = m;

    write_file(cfg.out_dir / "results.csv", result.csv);
    write_file(cfg.out_dir / "report.txt", result.report);
    write_file(cfg.out_dir / "manifest.txt", result.manifest);
    return result;
}

ExperimentConfig materialize_channels(const ExperimentConfig& cfg,
                                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ExperimentConfig out = cfg;
    for (auto& ch : out.channels) {
        if (ch.kind == ChannelSource::Kind::files) continue;
        const Trace full = ch.kind == ChannelSource::Kind::ge ? simulate_channel(ch) : load_trace(ch.file);
        const auto [train, test] = split_by_fraction(full, cfg.train_fraction);
        ch.train_file = dir / (ch.label + ".train.trace");
        ch.test_file = dir / (ch.label + ".test.trace");
        save_trace(train, ch.train_file);
        save_trace(test, ch.test_file);
        ch.kind = ChannelSource::Kind::files;
    }
    return out;
}

} // namespace linkq
