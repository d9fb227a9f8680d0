#include "doctest.h"

#include "linkq/error.hpp"
#include "linkq/rng.hpp"
#include "linkq/trace.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace linkq;
namespace fs = std::filesystem;

namespace {

Trace bits(std::vector<std::uint8_t> v) { return Trace(std::move(v)); }

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "linkq-tests";
    fs::create_directories(dir);
    return dir / name;
}

Trace random_trace(std::uint64_t seed, std::size_t n, double p_one = 0.5) {
    std::mt19937_64 gen(seed);
    std::vector<std::uint8_t> v(n);
    for (auto& x : v) x = uniform01(gen) < p_one ? 1 : 0;
    return Trace(std::move(v), 0.5, "rand", Origin::synthetic, seed);
}

} // namespace

TEST_CASE("Trace validates its invariants") {
    CHECK_THROWS_AS(bits({}), DataError);
    CHECK_THROWS_AS(bits({0, 1, 2}), DataError);
    CHECK_THROWS_AS(Trace({1}, 0.0), DataError);
    CHECK_THROWS_AS(Trace({1}, -0.5), DataError);
    CHECK(bits({1, 1, 0, 1}).delivery_ratio() == 0.75);
}

TEST_CASE("compute_fdr_targets") {
    SUBCASE("constant ones") {
        const auto t = compute_fdr_targets(bits(std::vector<std::uint8_t>(20, 1)), 4);
        CHECK(t.size() == 16);
        for (double v : t.values) CHECK(v == 1.0);
    }
    SUBCASE("alternating sequence, hand-enumerated windows") {
        const auto t = compute_fdr_targets(bits({1, 0, 1, 0, 1, 0}), 2);
        REQUIRE(t.size() == 4);
        for (double v : t.values) CHECK(v == 0.5);
    }
    SUBCASE("targets look strictly ahead") {
        // x = 0 0 0 1 1: target at 0 covers x[1..2] = 0,0; at 2 covers x[3..4] = 1,1
        const auto t = compute_fdr_targets(bits({0, 0, 0, 1, 1}), 2);
        REQUIRE(t.size() == 3);
        CHECK(t.values[0] == 0.0);
        CHECK(t.values[1] == 0.5);
        CHECK(t.values[2] == 1.0);
    }
    SUBCASE("3600 samples at 0.5 s cover 30 minutes") {
        CHECK(horizon_seconds(kDefaultWindow, 0.5) == 1800.0);
    }
    SUBCASE("too short names both lengths") {
        try {
            compute_fdr_targets(bits({1, 0, 1}), 3);
            FAIL("expected an error");
        } catch (const DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("trace too short") != std::string::npos);
            CHECK(msg.find("3 samples") != std::string::npos);
            CHECK(msg.find("window_w=3") != std::string::npos);
        }
        CHECK_NOTHROW(compute_fdr_targets(bits({1, 0, 1, 1}), 3));
    }
}

TEST_CASE("targets equal a naive window mean exactly") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto tr = random_trace(seed, 2000, 0.3 + 0.1 * seed);
        for (std::size_t w : {1u, 7u, 100u, 1999u}) {
            const auto t = compute_fdr_targets(tr, w);
            REQUIRE(t.size() == tr.size() - w);
            for (std::size_t i = 0; i < t.size(); ++i)
                REQUIRE(t.values[i] == oracle::forward_window_mean(tr.outcomes(), i, w));
        }
    }
}

TEST_CASE("Gilbert-Elliott generator") {
    SUBCASE("lossless absorbing GOOD state gives all ones") {
        GeChannelSpec spec{{0.0, 1.0, 0.0, 0.7}, {}, 9};
        const auto t = generate_ge_trace(spec, 5000);
        CHECK(t.delivery_ratio() == 1.0);
        CHECK(t.origin() == Origin::synthetic);
        CHECK(t.seed() == 9u);
    }
    SUBCASE("symmetric chain converges to FDR 0.5") {
        GeChannelSpec spec{{0.0, 1.0, 0.5, 0.5}, {}, 42};
        const std::size_t n = 400000;
        const auto t = generate_ge_trace(spec, n);
        // Successive states are independent for p = 0.5, so the binomial
        // standard error applies.
        const double sigma = std::sqrt(0.25 / static_cast<double>(n));
        CHECK(std::fabs(t.delivery_ratio() - 0.5) < 5 * sigma);
    }
    SUBCASE("same seed, same trace") {
        GeChannelSpec spec{{0.02, 0.6, 0.001, 0.01}, {}, 1234};
        CHECK(generate_ge_trace(spec, 10000) == generate_ge_trace(spec, 10000));
        GeChannelSpec other = spec;
        other.seed = 1235;
        CHECK_FALSE(generate_ge_trace(spec, 10000) == generate_ge_trace(other, 10000));
    }
    SUBCASE("regime schedule overrides from its start index") {
        GeChannelSpec spec{{0.0, 0.0, 0.0, 0.0}, {{100, {1.0, 1.0, 0.0, 0.0}}, {150, {0.0, 0.0, 0.0, 0.0}}}, 5};
        const auto t = generate_ge_trace(spec, 200);
        for (std::size_t i = 0; i < 200; ++i) CHECK(t[i] == ((i >= 100 && i < 150) ? 0 : 1));
    }
    SUBCASE("invalid probabilities are rejected") {
        CHECK_THROWS_AS(generate_ge_trace({{1.5, 0.0, 0.0, 0.0}, {}, 0}, 10), ConfigError);
        CHECK_THROWS_AS(generate_ge_trace({{0.0, -0.1, 0.0, 0.0}, {}, 0}, 10), ConfigError);
        GeChannelSpec bad{{0.0, 1.0, 0.1, 0.1}, {{10, {}}, {10, {}}}, 0};
        CHECK_THROWS_AS(generate_ge_trace(bad, 100), ConfigError);
    }
    SUBCASE("without regime switches the chain is stationary") {
        GeChannelSpec spec{{0.05, 0.7, 0.2, 0.4}, {}, 77};
        const std::size_t n = 200000;
        const auto t = generate_ge_trace(spec, n);
        const auto [a, b] = split_train_test(t, n / 2);
        const double p = t.delivery_ratio();
        const double sigma = std::sqrt(p * (1 - p) / (n / 2.0));
        CHECK(std::fabs(a.delivery_ratio() - b.delivery_ratio()) < 5 * sigma * std::sqrt(2.0));
    }
}

TEST_CASE("random regime schedule") {
    const std::vector<GeParams> palette{{0.01, 0.5, 0.001, 0.01}, {0.1, 0.9, 0.01, 0.01}};
    const auto s = random_regime_schedule(palette, 200000, 20000, 50000, 3);
    REQUIRE(!s.empty());
    CHECK(s.front().start_index == 0);
    for (std::size_t k = 1; k < s.size(); ++k) {
        const auto gap = s[k].start_index - s[k - 1].start_index;
        CHECK(gap >= 20000);
        CHECK(gap <= 50000);
    }
    CHECK(s.back().start_index < 200000);
    CHECK(s == random_regime_schedule(palette, 200000, 20000, 50000, 3));
    CHECK_THROWS_AS(random_regime_schedule({}, 10, 1, 2, 0), ConfigError);
}

TEST_CASE("trace files") {
    SUBCASE("save then load a 10-sample trace") {
        const Trace t({1, 0, 1, 1, 0, 0, 1, 1, 1, 0}, 0.5, "ch1", Origin::synthetic, 77);
        const auto p = temp_path("ten.trace");
        save_trace(t, p);
        CHECK(load_trace(p) == t);
    }
    SUBCASE("length one, both symbols") {
        for (std::uint8_t x : {0, 1}) {
            const Trace t({x}, 0.25, "one");
            CHECK(parse_trace(format_trace(t)) == t);
        }
    }
    SUBCASE("save, load, save is byte-identical") {
        const auto t = random_trace(11, 500);
        const auto text = format_trace(t);
        CHECK(format_trace(parse_trace(text)) == text);
    }
    SUBCASE("header metadata") {
        const auto t = parse_trace("# sample_period_s=0.5\n# channel_label=ch5\n# origin=measured\n1\n0\n");
        CHECK(t.sample_period_s() == 0.5);
        CHECK(t.channel_label() == "ch5");
        CHECK(t.origin() == Origin::measured);
        CHECK_FALSE(t.seed().has_value());
        CHECK(t.size() == 2);
    }
    SUBCASE("alphabet violation reports its line") {
        try {
            parse_trace("# sample_period_s=0.5\n1\n0\n2\n1\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
        CHECK_THROWS_AS(parse_trace("1\r\n0\n"), ParseError);
        CHECK_THROWS_AS(parse_trace("10\n"), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_trace(temp_path("does-not-exist.trace")), DataError);
    }
}

TEST_CASE("train/test split") {
    const auto t = random_trace(5, 100);
    const auto [a, b] = split_train_test(t, 60);
    CHECK(a.size() == 60);
    CHECK(b.size() == 40);
    std::vector<std::uint8_t> joined(a.outcomes().begin(), a.outcomes().end());
    joined.insert(joined.end(), b.outcomes().begin(), b.outcomes().end());
    CHECK(std::equal(joined.begin(), joined.end(), t.outcomes().begin(), t.outcomes().end()));
    CHECK_THROWS_AS(split_train_test(t, 0), DataError);
    CHECK_THROWS_AS(split_train_test(t, 100), DataError);

    CHECK(kReferenceTrainFraction == doctest::Approx(0.55).epsilon(0.01));
    const auto [ra, rb] = split_by_fraction(random_trace(6, 220), kReferenceTrainFraction);
    CHECK(ra.size() == 121);
    CHECK(rb.size() == 99);
}
