#include "doctest.h"

#include "linkq/config.hpp"
#include "linkq/error.hpp"
#include "linkq/nn/model_io.hpp"
#include "linkq/pipeline.hpp"
#include "linkq/report.hpp"

#include <filesystem>
#include <fstream>

using namespace linkq;

namespace {

const char* kSmallConfig = R"(
[experiment]
seed = 7
window_w = 40
models = ema, hourglass
sources = same_channel, all_channels, all_except_test
threads = 1

[training]
epochs = 2
batch_size = 32
hourglass_widths = 6, 3, 6

[calibration]
points = 21

[channel.a]
source = ge
length = 1500
seed = 1
p_good_loss = 0.02
p_bad_loss = 0.8
p_g2b = 0.01
p_b2g = 0.05

[channel.b]
source = ge
length = 1500
seed = 2
p_good_loss = 0.1
p_bad_loss = 0.6
p_g2b = 0.005
p_b2g = 0.02
)";

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

Trace constant_trace(std::uint8_t v, std::size_t n, const std::string& label, double period = 0.5) {
    return Trace(std::vector<std::uint8_t>(n, v), period, label);
}

ResultRow sample_row() {
    ResultRow r;
    r.scenario = {"ch1", TrainingSource::all_except_test, ModelKind::pyramid};
    r.training_channels = {"ch2", "ch3"};
    r.alpha_star = 0.0009;
    r.init_state = 0.8125;
    r.samples = 1234;
    ErrorStats s;
    s.mu_e2 = 0.001234;
    s.abs_p95 = 0.0567;
    s.e_min = -0.25;
    r.stats = s;
    return r;
}

} // namespace

TEST_CASE("report rendering") {
    CHECK(format_alpha_parameter(0.0009) == "\xCE\xB1*=0.000900");
    CHECK(training_label({"ch2", TrainingSource::same_channel, ModelKind::ema}) == "ch2");
    CHECK(training_label({"ch2", TrainingSource::all_channels, ModelKind::ema}) == "all");
    CHECK(training_label({"ch2", TrainingSource::all_except_test, ModelKind::ema}) == "!ch2");
    CHECK_THROWS_AS(render_report({}), DataError);

    auto failed = sample_row();
    failed.scenario.test_channel = "ch2";
    failed.stats.reset();
    failed.status = "numerical failure";
    const std::vector<ResultRow> rows{sample_row(), failed};
    const auto rep = render_report(rows);
    CHECK(rep.text.find("1.23") != std::string::npos); // x1e-3
    CHECK(rep.text.find("5.67") != std::string::npos); // percent
    CHECK(rep.text.find("!ch1") != std::string::npos);
    CHECK(parse_csv(rep.csv) == rows);
    CHECK(render_csv(parse_csv(rep.csv)) == rep.csv);
    CHECK_THROWS_AS(parse_csv("garbage"), DataError);
    CHECK(parse_model_kind("hourglass") == ModelKind::hourglass);
    CHECK_THROWS_AS(parse_training_source("everything"), ConfigError);
}

TEST_CASE("merging training traces") {
    const AlphaGrid grid = build_alpha_grid(0.01);
    const std::vector<Trace> traces{constant_trace(1, 60, "ones"), constant_trace(0, 80, "zeros")};
    const double init = pooled_init_state(traces, 10);
    CHECK(init == 0.5);
    const auto set = merge_training_traces(traces, grid, init, 10, 10);
    // (60 - 10) + (80 - 10) targets, minus the warm-up of each trace.
    REQUIRE(set.size() == 40 + 60);
    for (std::size_t r = 0; r < 40; ++r) CHECK(set.targets[r] == 1.0);
    for (std::size_t r = 40; r < 100; ++r) CHECK(set.targets[r] == 0.0);
    // EMA state restarts at the boundary: the first zeros row sits below init.
    for (double v : set.row(39)) CHECK(v > init);
    for (double v : set.row(40)) CHECK(v < init);

    const std::vector<Trace> mixed{constant_trace(1, 60, "a", 0.5), constant_trace(1, 60, "b", 1.0)};
    CHECK_THROWS_AS(merge_training_traces(mixed, grid, 0.5, 10, 10), DataError);
    CHECK_THROWS_AS(merge_training_traces({}, grid, 0.5, 10, 10), DataError);
}

TEST_CASE("configuration parsing") {
    const auto cfg = parse_config(kSmallConfig, ".");
    CHECK(cfg.channels.size() == 2);
    CHECK(cfg.window_w == 40);
    CHECK(cfg.effective_warmup() == 40);
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.hidden_widths.at(nn::Architecture::hourglass) == std::vector<std::size_t>{6, 3, 6});
    CHECK(cfg.sweep.points == 21);
    CHECK(simulate_channel(cfg.channel("a")).size() == 1500);

    CHECK_THROWS_AS(parse_config(std::string(kSmallConfig) + "\n[channel.a]\nsource=ge\n", "."),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nbogus = 1\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nwindow_w = -3\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nmodels = ema, transformer\n", "."), ConfigError);
}

TEST_CASE("small end-to-end experiment") {
    TempDir dir("linkq_pipeline_test");
    auto cfg = parse_config(kSmallConfig, dir.path);
    cfg.out_dir = dir.path / "run1";
    cfg.source_text = kSmallConfig;
    const auto r1 = run_experiment(cfg);
    CHECK(r1.all_ok());
    CHECK(r1.failure_exit_code() == 0);
    // 2 test channels x 3 sources x 2 models
    REQUIRE(r1.rows.size() == 12);
    CHECK(r1.rows[0].scenario == ScenarioSpec{"a", TrainingSource::same_channel, ModelKind::ema});
    CHECK(r1.rows[11].scenario ==
          ScenarioSpec{"b", TrainingSource::all_except_test, ModelKind::hourglass});
    for (const auto& row : r1.rows) {
        REQUIRE(row.stats);
        CHECK(row.samples == 600 - 2 * 40);
    }
    for (const char* f : {"results.csv", "report.txt", "manifest.txt"})
        CHECK(std::filesystem::exists(cfg.out_dir / f));
    CHECK(r1.model_files.size() == 5); // a, b, all, all-except-a, all-except-b

    SUBCASE("rows agree with a direct recomputation") {
        const auto full = simulate_channel(cfg.channel("a"));
        const auto [train, test] = split_by_fraction(full, cfg.train_fraction);
        const double init = default_init_state(train, 40);
        const auto cal = calibrate_alpha(train, compute_fdr_targets(train, 40),
                                         log_sweep(1e-5, 1e-1, 21));
        CHECK(r1.rows[0].alpha_star == cal.alpha_star);
        CHECK(r1.rows[0].init_state == init);
        const auto ev = evaluate_ema(cal.alpha_star, init, test, 40, 40);
        CHECK(r1.rows[0].stats->mu_e2 == ev.stats.mu_e2);

        const auto model = nn::load_model(cfg.out_dir / "models" / "a__hourglass.model");
        CHECK(evaluate_model(model, test, 40).stats == *r1.rows[1].stats);
    }
    SUBCASE("deterministic across runs") {
        cfg.out_dir = dir.path / "run2";
        const auto r2 = run_experiment(cfg);
        CHECK(r2.csv == r1.csv);
        CHECK(r2.manifest == r1.manifest);
    }
    SUBCASE("materialized channels give the same results") {
        auto files = materialize_channels(cfg, dir.path / "data");
        files.out_dir = dir.path / "run3";
        CHECK(run_experiment(files).csv == r1.csv);
    }
    SUBCASE("a bad channel fails only its own cells") {
        auto files = materialize_channels(cfg, dir.path / "data");
        std::filesystem::remove(dir.path / "data" / "b.test.trace");
        files.out_dir = dir.path / "run4";
        const auto r = run_experiment(files);
        CHECK_FALSE(r.all_ok());
        CHECK(r.failure_exit_code() == 2);
        for (const auto& row : r.rows)
            CHECK(row.stats.has_value() == (row.scenario.test_channel == "a"));
    }
}
