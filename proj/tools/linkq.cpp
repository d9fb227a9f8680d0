// Command-line front end: simulate, calibrate, features, train, predict,
// evaluate, report and run.

#include "linkq/config.hpp"
#include "linkq/error.hpp"
#include "linkq/nn/model_io.hpp"
#include "linkq/nn/train.hpp"
#include "linkq/pipeline.hpp"
#include "linkq/rng.hpp"
#include "linkq/report.hpp"
#include "linkq/simd/kernels.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace linkq;

namespace {

std::string num(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) throw DataError("cannot write " + path.string());
}

// Prints to stdout, and also to out/name when an output directory was given.
void emit(const std::string& text, const std::string& out, const std::string& name) {
    std::cout << text;
    if (!out.empty()) write_text(fs::path(out) / name, text);
}

std::string stats_text(const Evaluation& ev) {
    const auto& s = ev.stats;
    std::ostringstream o;
    o << "samples=" << ev.samples << '\n'
      << "mu_e2=" << num(s.mu_e2) << '\n'
      << "e2_p95=" << num(s.e2_p95) << '\n'
      << "e2_max=" << num(s.e2_max) << '\n'
      << "mu_abs=" << num(s.mu_abs) << '\n'
      << "sigma_abs=" << num(s.sigma_abs) << '\n'
      << "abs_p90=" << num(s.abs_p90) << '\n'
      << "abs_p95=" << num(s.abs_p95) << '\n'
      << "abs_p99=" << num(s.abs_p99) << '\n'
      << "abs_max=" << num(s.abs_max) << '\n'
      << "e_min=" << num(s.e_min) << '\n'
      << "e_p5=" << num(s.e_p5) << '\n'
      << "e_p95=" << num(s.e_p95) << '\n'
      << "e_max=" << num(s.e_max) << '\n';
    return o.str();
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "experiment configuration file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override the global seed");
    cmd->add_option("--out", c.out, "output directory");
}

ExperimentConfig config_from(const Common& c) {
    auto cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    return cfg;
}

struct SweepOptions {
    double min = 1e-5;
    double max = 1e-1;
    std::size_t points = 61;
};

void add_sweep(CLI::App* cmd, SweepOptions& s) {
    cmd->add_option("--alpha-min", s.min, "smallest candidate alpha")->capture_default_str();
    cmd->add_option("--alpha-max", s.max, "largest candidate alpha")->capture_default_str();
    cmd->add_option("--points", s.points, "log-spaced candidates")->capture_default_str();
}

std::vector<Trace> load_traces(const std::vector<std::string>& paths) {
    std::vector<Trace> traces;
    for (const auto& p : paths) traces.push_back(load_trace(p));
    return traces;
}

// Joint calibration over several training traces, EMA state restarting at
// each trace.
std::pair<Calibration, double> calibrate_traces(const std::vector<Trace>& traces,
                                                std::size_t window_w, std::size_t warmup,
                                                const SweepOptions& sweep) {
    const double init = pooled_init_state(traces, window_w);
    std::vector<TargetSeries> targets;
    for (const auto& t : traces) targets.push_back(compute_fdr_targets(t, window_w));
    std::vector<CalibrationSegment> segs;
    for (std::size_t k = 0; k < traces.size(); ++k)
        segs.push_back({&traces[k], &targets[k], init, warmup});
    return {calibrate_alpha(segs, log_sweep(sweep.min, sweep.max, sweep.points)), init};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link-quality prediction from binary frame-outcome traces"};
    app.require_subcommand(1);
    std::string isa;
    app.add_option("--simd", isa, "kernel set: scalar, avx2 or neon (default: best available)");

    // simulate
    Common sim;
    std::vector<std::string> sim_channels;
    bool sim_split = false;
    auto* simulate = app.add_subcommand("simulate", "write synthetic channel traces");
    add_common(simulate, sim, true);
    simulate->add_option("--channel", sim_channels, "only these channels");
    simulate->add_flag("--split", sim_split, "write <label>.train.trace and <label>.test.trace");

    // calibrate
    Common cal;
    std::vector<std::string> cal_traces;
    std::size_t cal_window = kDefaultWindow;
    std::optional<std::size_t> cal_warmup;
    SweepOptions cal_sweep;
    auto* calibrate = app.add_subcommand("calibrate", "find the MSE-optimal EMA smoothing factor");
    add_common(calibrate, cal, false);
    calibrate->add_option("--trace", cal_traces, "training trace files")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--window", cal_window, "prediction window in samples")->capture_default_str();
    calibrate->add_option("--warmup", cal_warmup, "ignored leading targets (default: window)");
    add_sweep(calibrate, cal_sweep);

    // features
    Common feat;
    std::string feat_trace;
    double feat_alpha = 0.0;
    std::optional<double> feat_init;
    std::size_t feat_window = kDefaultWindow;
    auto* features = app.add_subcommand("features", "dump the 41 EMA features and targets as CSV");
    add_common(features, feat, false);
    features->add_option("--trace", feat_trace, "trace file")->required()->check(CLI::ExistingFile);
    features->add_option("--alpha-star", feat_alpha, "grid centre")->required();
    features->add_option("--init", feat_init, "initial EMA state (default: mean of first window)");
    features->add_option("--window", feat_window, "prediction window in samples")->capture_default_str();

    // train
    Common tr;
    std::vector<std::string> tr_traces;
    std::string tr_arch = "hourglass";
    std::size_t tr_window = kDefaultWindow;
    std::optional<std::size_t> tr_warmup;
    nn::TrainConfig tr_cfg;
    SweepOptions tr_sweep;
    auto* train = app.add_subcommand("train", "calibrate, featurize and train one network");
    add_common(train, tr, false);
    train->add_option("--trace", tr_traces, "training trace files, merged in order")->required()->check(CLI::ExistingFile);
    train->add_option("--arch", tr_arch, "hourglass or pyramid")->capture_default_str();
    train->add_option("--window", tr_window, "prediction window in samples")->capture_default_str();
    train->add_option("--warmup", tr_warmup, "ignored leading targets (default: window)");
    train->add_option("--epochs", tr_cfg.epochs)->capture_default_str();
    train->add_option("--batch-size", tr_cfg.batch_size)->capture_default_str();
    train->add_option("--lr0", tr_cfg.lr0)->capture_default_str();
    add_sweep(train, tr_sweep);

    // predict
    Common pr;
    std::string pr_model, pr_trace;
    auto* predict = app.add_subcommand("predict", "run a saved model over a trace");
    add_common(predict, pr, false);
    predict->add_option("--model", pr_model, "model file")->required()->check(CLI::ExistingFile);
    predict->add_option("--trace", pr_trace, "trace file")->required()->check(CLI::ExistingFile);

    // evaluate
    Common ev;
    std::string ev_model, ev_trace;
    std::optional<double> ev_alpha, ev_init;
    std::optional<std::size_t> ev_warmup;
    std::size_t ev_window = kDefaultWindow;
    auto* evaluate = app.add_subcommand("evaluate", "error statistics of a model or a single EMA");
    add_common(evaluate, ev, false);
    evaluate->add_option("--trace", ev_trace, "test trace file")->required()->check(CLI::ExistingFile);
    auto* ev_model_opt = evaluate->add_option("--model", ev_model, "model file")->check(CLI::ExistingFile);
    auto* ev_alpha_opt = evaluate->add_option("--ema-alpha", ev_alpha, "evaluate an EMA instead");
    ev_model_opt->excludes(ev_alpha_opt);
    evaluate->add_option("--init", ev_init, "initial EMA state (default: mean of first window)");
    evaluate->add_option("--window", ev_window, "window for --ema-alpha")->capture_default_str();
    evaluate->add_option("--warmup", ev_warmup, "ignored leading targets (default: window)");

    // report
    Common rep;
    std::string rep_csv;
    auto* report = app.add_subcommand("report", "render a results CSV as a table");
    add_common(report, rep, false);
    report->add_option("--results", rep_csv, "results.csv from a run")->required()->check(CLI::ExistingFile);

    // run
    Common run;
    auto* runcmd = app.add_subcommand("run", "full experiment from a configuration");
    add_common(runcmd, run, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(Error::Category::config);
    }

    try {
        if (!isa.empty()) {
            const auto which = simd::parse_isa(isa);
            if (!simd::supported(which)) throw ConfigError("kernel set '" + isa + "' not supported here");
            simd::set_active(which);
        }

        if (*simulate) {
            auto cfg = config_from(sim);
            const fs::path out = sim.out.empty() ? fs::path(".") : fs::path(sim.out);
            if (!sim_channels.empty()) {
                std::vector<ChannelSource> keep;
                for (const auto& l : sim_channels) keep.push_back(cfg.channel(l));
                cfg.channels = keep;
            }
            if (sim_split) {
                materialize_channels(cfg, out);
                for (const auto& c : cfg.channels) std::cout << c.label << ": " << (out / (c.label + ".train.trace")).string() << ", " << (out / (c.label + ".test.trace")).string() << '\n';
            } else {
                fs::create_directories(out);
                for (const auto& c : cfg.channels) {
                    if (c.kind != ChannelSource::Kind::ge) continue;
                    const auto trace = simulate_channel(c);
                    save_trace(trace, out / (c.label + ".trace"));
                    std::cout << c.label << ": " << trace.size() << " samples, delivery ratio "
                              << num(trace.delivery_ratio()) << '\n';
                }
            }
        } else if (*calibrate) {
            const auto traces = load_traces(cal_traces);
            const auto [c, init] =
                calibrate_traces(traces, cal_window, cal_warmup.value_or(cal_window), cal_sweep);
            emit("alpha_star=" + num(c.alpha_star) + "\nmse=" + num(c.mse) + "\nsamples=" +
                     std::to_string(c.samples) + "\ninit_state=" + num(init) + "\n",
                 cal.out, "calibration.txt");
        } else if (*features) {
            const auto trace = load_trace(feat_trace);
            const double init = feat_init.value_or(default_init_state(trace, feat_window));
            const auto grid = build_alpha_grid(feat_alpha);
            const auto f = compute_feature_matrix(grid, trace, init);
            std::optional<TargetSeries> targets;
            if (trace.size() > feat_window) targets = compute_fdr_targets(trace, feat_window);
            std::string csv = "index";
            for (std::size_t k = 0; k < grid.alphas.size(); ++k) csv += ",ema" + std::to_string(k);
            csv += ",target\n";
            for (std::size_t r = 0; r < f.rows(); ++r) {
                csv += std::to_string(r);
                for (double v : f.row(r)) csv += "," + num(v);
                csv += ",";
                if (targets && r < targets->values.size()) csv += num(targets->values[r]);
                csv += "\n";
            }
            if (feat.out.empty())
                std::cout << csv;
            else
                write_text(fs::path(feat.out) / "features.csv", csv);
        } else if (*train) {
            const auto traces = load_traces(tr_traces);
            const std::size_t warmup = tr_warmup.value_or(tr_window);
            const auto [c, init] = calibrate_traces(traces, tr_window, warmup, tr_sweep);
            const auto grid = build_alpha_grid(c.alpha_star);
            const auto data = merge_training_traces(traces, grid, init, tr_window, warmup);
            const auto arch = nn::parse_architecture(tr_arch);
            const std::uint64_t seed = tr.seed.value_or(0);
            auto model = nn::build_architecture(arch, grid.alphas.size(), mix_seed(seed, 1));
            model.provenance = nn::FeatureProvenance{grid, init, tr_window};
            tr_cfg.seed = mix_seed(seed, 2);
            const auto result = nn::train(std::move(model), data, tr_cfg);
            const fs::path out = tr.out.empty() ? fs::path(".") : fs::path(tr.out);
            fs::create_directories(out);
            nn::save_model(result.model, out / (tr_arch + ".model"));
            std::cout << "alpha_star=" << num(c.alpha_star) << "\ntraining_pairs=" << data.size() << '\n';
            for (std::size_t e = 0; e < result.loss_history.size(); ++e)
                std::cout << "epoch " << e + 1 << " lr=" << num(result.lr_history[e])
                          << " mse=" << num(result.loss_history[e]) << '\n';
            std::cout << "model=" << (out / (tr_arch + ".model")).string() << '\n';
        } else if (*predict) {
            const auto model = nn::load_model(pr_model);
            if (!model.provenance) throw DataError("model carries no feature provenance");
            const auto trace = load_trace(pr_trace);
            const auto f = compute_feature_matrix(model.provenance->grid, trace, model.provenance->init_state);
            const auto p = nn::predict_series(model, f);
            std::string csv = "index,prediction\n";
            for (std::size_t i = 0; i < p.size(); ++i) csv += std::to_string(i) + "," + num(p[i]) + "\n";
            if (pr.out.empty())
                std::cout << csv;
            else
                write_text(fs::path(pr.out) / "predictions.csv", csv);
        } else if (*evaluate) {
            const auto trace = load_trace(ev_trace);
            Evaluation result;
            if (ev_alpha) {
                const double init = ev_init.value_or(default_init_state(trace, ev_window));
                result = evaluate_ema(*ev_alpha, init, trace, ev_window, ev_warmup.value_or(ev_window));
            } else if (!ev_model.empty()) {
                const auto model = nn::load_model(ev_model);
                const std::size_t w = model.provenance ? model.provenance->window_w : kDefaultWindow;
                result = evaluate_model(model, trace, ev_warmup.value_or(w));
            } else {
                throw ConfigError("evaluate needs --model or --ema-alpha");
            }
            emit(stats_text(result), ev.out, "evaluation.txt");
        } else if (*report) {
            std::ifstream in(rep_csv, std::ios::binary);
            std::stringstream buf;
            buf << in.rdbuf();
            emit(render_text_table(parse_csv(buf.str())), rep.out, "report.txt");
        } else if (*runcmd) {
            const auto cfg = config_from(run);
            const auto result = run_experiment(cfg);
            std::cout << result.report << "outputs in " << cfg.out_dir.string() << '\n';
            for (const auto& row : result.rows)
                if (!row.stats)
                    std::cerr << "cell " << row.scenario.test_channel << '/'
                              << to_string(row.scenario.source) << '/'
                              << to_string(row.scenario.model) << " failed: " << row.status << '\n';
            return result.failure_exit_code();
        }
    } catch (const Error& e) {
        std::cerr << "linkq: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "linkq: " << e.what() << '\n';
        return static_cast<int>(Error::Category::numerical);
    }
    return 0;
}
