// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
//
//   linkq_acceptance [--bench FILE] [--work DIR] [--only 1,4,7]

#include "grad_check.hpp"
#include "oracles.hpp"

#include "linkq/config.hpp"
#include "linkq/ema.hpp"
#include "linkq/metrics.hpp"
#include "linkq/nn/model_io.hpp"
#include "linkq/nn/train.hpp"
#include "linkq/pipeline.hpp"
#include "linkq/report.hpp"
#include "linkq/rng.hpp"
#include "linkq/simd/kernels.hpp"
#include "linkq/trace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace linkq;

#ifndef LINKQ_BENCH_CONFIG
#define LINKQ_BENCH_CONFIG "bench/synthetic4.ini"
#endif

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Trace random_trace(std::mt19937_64& gen, std::size_t n) {
    const double p = uniform01(gen);
    std::vector<std::uint8_t> x(n);
    for (auto& v : x) v = uniform01(gen) < p;
    return Trace(std::move(x));
}

bool same_bits(const nn::MlpModel& a, const nn::MlpModel& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const auto& x = a.layers[l];
        const auto& y = b.layers[l];
        if (x.weights.size() != y.weights.size() || x.biases.size() != y.biases.size()) return false;
        if (std::memcmp(x.weights.data(), y.weights.data(), x.weights.size() * sizeof(double)) ||
            std::memcmp(x.biases.data(), y.biases.data(), x.biases.size() * sizeof(double)))
            return false;
    }
    return true;
}

// 1. ema_run against the geometric-weight sum.
Outcome ema_oracle() {
    std::mt19937_64 gen(0xE3A);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int pair = 0; pair < 100; ++pair) {
        const std::size_t n = 1 + uniform_below(gen, 10000);
        const double alpha = std::pow(10.0, -5.0 + 5.0 * uniform01(gen));
        const double init = uniform01(gen);
        const auto trace = random_trace(gen, n);
        const auto out = ema_run(alpha, trace, init);
        // Every index is too slow for the O(i) oracle; take the last index
        // plus 40 random ones.
        std::vector<std::size_t> idx{n - 1};
        for (int k = 0; k < 40; ++k) idx.push_back(uniform_below(gen, n));
        for (std::size_t i : idx) {
            const double ref = oracle::ema_closed_form(alpha, trace.outcomes(), i + 1, init);
            worst = std::max(worst, std::fabs(out[i] - ref));
            ++checked;
        }
    }
    return {worst <= 1e-12, fmt("max |diff| %.3g over %zu points of 100 pairs", worst, checked)};
}

// 2. The 41-value grid.
Outcome grid_shape() {
    const double r2 = std::sqrt(2.0);
    std::string bad;
    for (double a : {1e-5, 8.5e-5, 0.0009, 0.0123, 0.03}) {
        const auto g = build_alpha_grid(a);
        bool ok = g.alphas.size() == 41 && g.alphas[20] == a && g.alpha_star == a;
        for (std::size_t k = 1; k < 41; ++k) ok = ok && g.alphas[k - 1] < g.alphas[k];
        for (std::size_t k = 1; k <= 20; ++k) {
            ok = ok && g.alphas[20 + k] == static_cast<double>(k) * r2 * a;
            ok = ok && g.alphas[20 - k] == a / (static_cast<double>(k) * r2);
        }
        // Endpoint ratios to within one rounding of the division.
        ok = ok && std::fabs(g.alphas[40] / a / (20 * r2) - 1) <= 4e-16;
        ok = ok && std::fabs(a / g.alphas[0] / (20 * r2) - 1) <= 4e-16;
        if (!ok) bad += fmt(" a*=%g", a);
    }
    // Above a* = 1/(20 sqrt 2) the upper end clamps to 1; the unclamped values
    // keep the ratio.
    const auto c = build_alpha_grid(0.05);
    const bool clamp_ok = c.alphas[40] == 1.0 && alpha_grid_value(0.05, 40) == 20 * r2 * 0.05 &&
                          alpha_grid_value(0.05, 0) == 0.05 / (20 * r2);
    if (!clamp_ok) bad += " clamp";
    return {bad.empty(), bad.empty() ? "41 strictly increasing values, centre a*, "
                                       "ends 20*sqrt2*a* and a*/(20*sqrt2) for 5 centres"
                                     : "mismatch at" + bad};
}

// 3. backward against central differences.
Outcome gradient_check() {
    double worst = 0.0;
    std::size_t params = 0;
    const std::vector<std::vector<std::size_t>> shapes{{8, 4, 8}, {8, 4, 2}};
    for (const auto& hidden : shapes) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 gen(mix_seed(seed, hidden.back()));
            auto m = nn::build_mlp(41, hidden, seed);
            for (auto& l : m.layers)
                for (auto& b : l.biases) b = 0.2 * (uniform01(gen) - 0.5);
            const std::size_t batch = 8;
            std::vector<double> x(batch * 41), t(batch);
            for (auto& v : x) v = uniform01(gen);
            for (auto& v : t) v = uniform01(gen);
            const auto r = gradcheck::check(m, x, t, 1e-5);
            worst = std::max(worst, r.worst);
            params += r.parameters;
        }
    }
    return {worst < 1e-4,
            fmt("worst relative error %.3g over %zu parameters (40 models, h=1e-5)", worst, params)};
}

// 4. Two full training runs agree bit for bit, and the scalar kernels give the
// same bits as the vector ones.
Outcome training_determinism() {
    GeChannelSpec spec;
    spec.params = {0.02, 0.6, 0.0005, 0.002};
    spec.seed = 404;
    const auto trace = generate_ge_trace(spec, 50000, "det", 0.5);
    const double init = default_init_state(trace, kDefaultWindow);
    const auto targets = compute_fdr_targets(trace, kDefaultWindow);
    const auto cal = calibrate_alpha(trace, targets, default_alpha_candidates());
    const auto grid = build_alpha_grid(cal.alpha_star);
    const auto features = compute_feature_matrix(grid, trace, init);
    const auto data = nn::make_training_set(features, targets, kDefaultWindow);
    nn::TrainConfig cfg;
    cfg.seed = 77;
    auto run = [&] {
        return nn::train(nn::build_architecture(nn::Architecture::hourglass, 41, 5), data, cfg).model;
    };
    const auto a = run();
    const auto b = run();
    const bool same = same_bits(a, b);

    const auto prev = simd::active().isa;
    simd::set_active(simd::Isa::scalar);
    const auto s = run();
    simd::set_active(prev);
    const bool cross = same_bits(a, s);
    return {same && cross, fmt("%zu rows, 15 epochs: repeat %s, %s vs scalar %s", data.size(),
                               same ? "identical" : "DIFFERENT", simd::to_string(prev).data(),
                               cross ? "identical" : "DIFFERENT")};
}

// 5. Learning rate of the 15th epoch.
Outcome lr_schedule() {
    nn::TrainingSet data;
    data.width = 3;
    for (int r = 0; r < 100; ++r) {
        data.inputs.insert(data.inputs.end(), {0.1 * (r % 10), 0.5, 0.9});
        data.targets.push_back(0.5 + 0.004 * r);
    }
    const nn::TrainConfig cfg;
    const auto result = nn::train(nn::build_mlp(3, std::vector<std::size_t>{4}, 1), data, cfg);
    const double want = 0.01 / 16384.0;
    const bool ok = result.lr_history.size() == 15 && result.lr_history[14] == want &&
                    nn::learning_rate(cfg, 15) == want;
    return {ok, fmt("epoch 15 lr = %.17g (0.01/2^14 = %.17g)", result.lr_history.back(), want)};
}

// 6. summarize_errors against the sort-and-formula reference.
Outcome metrics_oracle() {
    std::mt19937_64 gen(0x3E7);
    double worst = 0.0;
    std::size_t order_failures = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 1 + uniform_below(gen, 3000);
        const double scale = std::pow(10.0, -3.0 + 3.0 * uniform01(gen));
        const double shift = (uniform01(gen) - 0.5) * scale;
        std::vector<double> e(n);
        for (auto& v : e) {
            v = shift + scale * (2 * uniform01(gen) - 1);
            if (rep % 7 == 0) v = std::round(v * 20) / 20; // heavy ties
        }
        const auto s = summarize_errors({e});
        const auto r = oracle::summarize(e);
        const double got[] = {s.mu_e2, s.e2_p95, s.e2_max, s.mu_abs, s.sigma_abs, s.abs_p90, s.abs_p95,
                              s.abs_p99, s.abs_max, s.e_min, s.e_p5, s.e_p95, s.e_max};
        const double ref[] = {r.mu_e2, r.e2_p95, r.e2_max, r.mu_abs, r.sigma_abs, r.abs_p90, r.abs_p95,
                              r.abs_p99, r.abs_max, r.e_min, r.e_p5, r.e_p95, r.e_max};
        for (int k = 0; k < 13; ++k) worst = std::max(worst, std::fabs(got[k] - ref[k]));
        const bool ordered = s.e_min <= s.e_p5 && s.e_p5 <= s.e_p95 && s.e_p95 <= s.e_max &&
                             0 <= s.abs_p90 && s.abs_p90 <= s.abs_p95 && s.abs_p95 <= s.abs_p99 &&
                             s.abs_p99 <= s.abs_max && s.e2_p95 <= s.e2_max && s.mu_e2 <= s.e2_max &&
                             s.mu_abs <= s.abs_max && s.sigma_abs >= 0 &&
                             s.mu_e2 >= s.mu_abs * s.mu_abs * (1 - 1e-12) &&
                             s.e2_max == s.abs_max * s.abs_max;
        order_failures += !ordered;
    }
    return {worst <= 1e-12 && order_failures == 0,
            fmt("max |diff| %.3g over 1000 series, %zu ordering violations", worst, order_failures)};
}

struct BenchState {
    fs::path work;
    ExperimentConfig files_cfg;
    std::optional<ExperimentResult> full;
    std::string error;
};

// Runs the benchmark once from materialized trace files; 7 and 8 share it.
BenchState& bench(const fs::path& config, const fs::path& work) {
    static BenchState state;
    if (state.full || !state.error.empty()) return state;
    try {
        state.work = work;
        fs::remove_all(work);
        auto cfg = load_config(config);
        state.files_cfg = materialize_channels(cfg, work / "data");
        state.files_cfg.out_dir = work / "full";
        state.full = run_experiment(state.files_cfg);
    } catch (const std::exception& e) {
        state.error = e.what();
    }
    return state;
}

const ResultRow* find_row(const std::vector<ResultRow>& rows, const std::string& ch,
                          TrainingSource src, ModelKind kind) {
    for (const auto& r : rows)
        if (r.scenario == ScenarioSpec{ch, src, kind}) return &r;
    return nullptr;
}

// 7. Hourglass against the calibrated EMA, both trained on the test channel's
// own training part.
Outcome benchmark(const fs::path& config, const fs::path& work) {
    auto& b = bench(config, work);
    if (!b.full) return {false, "benchmark run failed: " + b.error};
    std::string detail;
    bool every = true;
    int strong = 0;
    for (const auto& ch : b.files_cfg.channels) {
        const auto* ema = find_row(b.full->rows, ch.label, TrainingSource::same_channel, ModelKind::ema);
        const auto* nn = find_row(b.full->rows, ch.label, TrainingSource::same_channel, ModelKind::hourglass);
        if (!ema || !nn || !ema->stats || !nn->stats) return {false, "missing cell for " + ch.label};
        const double ratio = nn->stats->mu_e2 / ema->stats->mu_e2;
        every = every && ratio <= 1.0;
        strong += ratio <= 0.85;
        detail += fmt("%s %.3f  ", ch.label.c_str(), ratio);
    }
    return {every && strong >= 2 && b.full->rows.size() >= 4,
            "hourglass/EMA mu_e2: " + detail + fmt("(%d channels <= 0.85)", strong)};
}

// 8. Deleting the test channel's training file leaves all_except_test cells
// unchanged.
Outcome isolation(const fs::path& config, const fs::path& work) {
    auto& b = bench(config, work);
    if (!b.full) return {false, "benchmark run failed: " + b.error};
    std::string detail;
    bool all_equal = true;
    for (const auto& ch : b.files_cfg.channels) {
        std::vector<ResultRow> expected;
        for (const auto& r : b.full->rows)
            if (r.scenario.test_channel == ch.label &&
                r.scenario.source == TrainingSource::all_except_test)
                expected.push_back(r);
        if (expected.empty()) return {false, "no all_except_test cells for " + ch.label};

        const fs::path data = b.work / ("isolated-" + ch.label);
        fs::remove_all(data);
        fs::copy(b.work / "data", data);
        fs::remove(data / (ch.label + ".train.trace"));
        auto cfg = b.files_cfg;
        for (auto& c : cfg.channels) {
            c.train_file = data / c.train_file.filename();
            c.test_file = data / c.test_file.filename();
        }
        cfg.test_channels = {ch.label};
        cfg.sources = {TrainingSource::all_except_test};
        cfg.out_dir = b.work / ("rerun-" + ch.label);
        const auto rerun = run_experiment(cfg);
        const auto want = fnv1a(render_csv(expected));
        const auto got = fnv1a(rerun.csv);
        const bool eq = want == got && rerun.all_ok();
        all_equal = all_equal && eq;
        detail += fmt("%s %s  ", ch.label.c_str(), eq ? "equal" : "DIFFERENT");
    }
    return {all_equal, "CSV checksums with the training file removed: " + detail};
}

// 9. Trace and model files survive save/load/save unchanged.
Outcome round_trips(const fs::path& work) {
    const fs::path dir = work / "roundtrip";
    fs::create_directories(dir);
    GeChannelSpec spec;
    spec.params = {0.05, 0.7, 0.001, 0.01};
    spec.seed = 9;
    const auto trace = generate_ge_trace(spec, 20000, "rt", 0.5);
    save_trace(trace, dir / "a.trace");
    const auto trace2 = load_trace(dir / "a.trace");
    save_trace(trace2, dir / "b.trace");
    const bool trace_ok = trace2 == trace && slurp(dir / "a.trace") == slurp(dir / "b.trace");

    auto model = nn::build_architecture(nn::Architecture::pyramid, 41, 12);
    std::mt19937_64 gen(12);
    for (auto& l : model.layers)
        for (auto& b : l.biases) b = uniform01(gen) - 0.5;
    model.provenance = nn::FeatureProvenance{build_alpha_grid(0.000325), 0.93, kDefaultWindow};
    nn::save_model(model, dir / "a.model");
    const auto model2 = nn::load_model(dir / "a.model");
    nn::save_model(model2, dir / "b.model");
    const bool model_ok = model2 == model && slurp(dir / "a.model") == slurp(dir / "b.model");

    std::size_t mismatches = 0;
    std::vector<double> x(41);
    for (int rep = 0; rep < 100; ++rep) {
        for (auto& v : x) v = uniform01(gen);
        const double p = nn::forward(model, x);
        const double q = nn::forward(model2, x);
        mismatches += std::memcmp(&p, &q, sizeof p) != 0;
    }
    fs::remove_all(dir);
    return {trace_ok && model_ok && mismatches == 0,
            fmt("trace bytes %s, model bytes %s, %zu/100 prediction mismatches",
                trace_ok ? "identical" : "DIFFER", model_ok ? "identical" : "DIFFER", mismatches)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string bench_config = LINKQ_BENCH_CONFIG;
    std::string work = (fs::temp_directory_path() / "linkq-acceptance").string();
    std::vector<int> only;
    app.add_option("--bench", bench_config, "benchmark configuration")->capture_default_str();
    app.add_option("--work", work, "scratch directory")->capture_default_str();
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"EMA oracle equivalence", ema_oracle},
        {"alpha-grid shape", grid_shape},
        {"gradient check", gradient_check},
        {"training determinism", training_determinism},
        {"learning-rate schedule", lr_schedule},
        {"metrics oracle", metrics_oracle},
        {"synthetic comparative benchmark", [&] { return benchmark(bench_config, work); }},
        {"scenario isolation", [&] { return isolation(bench_config, work); }},
        {"round trips", [&] { return round_trips(work); }},
    };
    const std::set<int> selected(only.begin(), only.end());

    std::printf("kernels: %s\n", simd::to_string(simd::active().isa).data());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %d. %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id,
                    criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    fs::remove_all(work);
    return failed == 0 ? 0 : 1;
}
