#include "linkq/trace.hpp"

#include "linkq/error.hpp"
#include "linkq/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace linkq {

const char* to_string(Origin origin) noexcept {
    return origin == Origin::synthetic ? "synthetic" : "measured";
}

Trace::Trace(std::vector<std::uint8_t> outcomes, double sample_period_s,
             std::string channel_label, Origin origin, std::optional<std::uint64_t> seed)
    : outcomes_(std::move(outcomes)),
      sample_period_s_(sample_period_s),
      channel_label_(std::move(channel_label)),
      origin_(origin),
      seed_(seed) {
    if (outcomes_.empty()) throw DataError("trace must contain at least one outcome");
    if (!(sample_period_s_ > 0.0) || !std::isfinite(sample_period_s_))
        throw DataError("sample_period_s must be positive");
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
        if (outcomes_[i] > 1)
            throw DataError("outcome " + std::to_string(i) + " is not 0 or 1");
}

double Trace::delivery_ratio() const noexcept {
    const auto ones = std::accumulate(outcomes_.begin(), outcomes_.end(), std::size_t{0});
    return static_cast<double>(ones) / static_cast<double>(outcomes_.size());
}

TargetSeries compute_fdr_targets(const Trace& trace, std::size_t window_w) {
    if (window_w == 0) throw ConfigError("window_w must be positive");
    const std::size_t n = trace.size();
    if (n <= window_w)
        throw DataError("trace too short: " + std::to_string(n) + " samples, need at least " +
                        std::to_string(window_w + 1) + " for window_w=" +
                        std::to_string(window_w));
    const auto x = trace.outcomes();
    TargetSeries out;
    out.window_w = window_w;
    out.values.resize(n - window_w);
    // Integer window counts keep every target exactly count / window_w.
    std::size_t count = 0;
    for (std::size_t k = 1; k <= window_w; ++k) count += x[k];
    const double w = static_cast<double>(window_w);
    for (std::size_t i = 0; i + window_w < n; ++i) {
        if (i > 0) count = count + x[i + window_w] - x[i];
        out.values[i] = static_cast<double>(count) / w;
    }
    return out;
}

// ---- Gilbert-Elliott ----

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void validate_params(const GeParams& p, const std::string& where) {
    if (!is_probability(p.p_good_loss) || !is_probability(p.p_bad_loss) ||
        !is_probability(p.p_g2b) || !is_probability(p.p_b2g))
        throw ConfigError(where + ": Gilbert-Elliott probabilities must lie in [0,1]");
}

} // namespace

void validate(const GeChannelSpec& spec) {
    validate_params(spec.params, "channel spec");
    for (std::size_t k = 0; k < spec.regime_schedule.size(); ++k) {
        validate_params(spec.regime_schedule[k].params, "regime " + std::to_string(k));
        if (k > 0 &&
            spec.regime_schedule[k].start_index <= spec.regime_schedule[k - 1].start_index)
            throw ConfigError("regime schedule start indices must be strictly increasing");
    }
}

Trace generate_ge_trace(const GeChannelSpec& spec, std::size_t length, std::string channel_label,
                        double sample_period_s) {
    validate(spec);
    if (length == 0) throw ConfigError("trace length must be positive");

    std::mt19937_64 gen(spec.seed);
    std::vector<std::uint8_t> out(length);
    const GeParams* active = &spec.params;
    std::size_t next_switch = 0;
    bool bad = false;
    for (std::size_t i = 0; i < length; ++i) {
        while (next_switch < spec.regime_schedule.size() &&
               spec.regime_schedule[next_switch].start_index <= i)
            active = &spec.regime_schedule[next_switch++].params;
        const double u_state = uniform01(gen);
        const double u_emit = uniform01(gen);
        bad = bad ? !(u_state < active->p_b2g) : (u_state < active->p_g2b);
        const double p_loss = bad ? active->p_bad_loss : active->p_good_loss;
        out[i] = u_emit < p_loss ? 0 : 1;
    }
    return Trace(std::move(out), sample_period_s, std::move(channel_label), Origin::synthetic,
                 spec.seed);
}

std::vector<RegimeSwitch> random_regime_schedule(std::span<const GeParams> palette,
                                                 std::size_t length, std::size_t min_gap,
                                                 std::size_t max_gap, std::uint64_t seed) {
    if (palette.empty()) throw ConfigError("regime palette is empty");
    if (min_gap == 0 || max_gap < min_gap) throw ConfigError("invalid regime gap range");
    std::mt19937_64 gen(seed);
    std::vector<RegimeSwitch> schedule;
    std::size_t start = 0;
    while (start < length) {
        const auto pick = static_cast<std::size_t>(uniform_below(gen, palette.size()));
        schedule.push_back({start, palette[pick]});
        start += min_gap + static_cast<std::size_t>(uniform_below(gen, max_gap - min_gap + 1));
    }
    return schedule;
}

// ---- File I/O ----

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

std::string format_trace(const Trace& trace) {
    std::string out;
    out.reserve(trace.size() * 2 + 128);
    out += "# sample_period_s=" + format_double(trace.sample_period_s()) + "\n";
    out += "# channel_label=" + trace.channel_label() + "\n";
    out += std::string("# origin=") + to_string(trace.origin()) + "\n";
    if (trace.seed()) out += "# seed=" + std::to_string(*trace.seed()) + "\n";
    for (auto x : trace.outcomes()) {
        out += static_cast<char>('0' + x);
        out += '\n';
    }
    return out;
}

Trace parse_trace(const std::string& text, const std::string& source_name) {
    double period = 0.5;
    std::string label;
    Origin origin = Origin::measured;
    std::optional<std::uint64_t> seed;
    std::vector<std::uint8_t> outcomes;
    outcomes.reserve(text.size() / 2);

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        ++line_no;
        const std::size_t eol = text.find('\n', pos);
        const std::string_view line(text.data() + pos,
                                    (eol == std::string::npos ? text.size() : eol) - pos);
        pos = eol == std::string::npos ? text.size() : eol + 1;

        if (line.size() == 1 && (line[0] == '0' || line[0] == '1')) {
            outcomes.push_back(static_cast<std::uint8_t>(line[0] - '0'));
            continue;
        }
        if (line.empty()) continue;
        if (line[0] != '#')
            throw ParseError(source_name, line_no,
                             "expected '0' or '1', got '" + std::string(line) + "'");

        std::string_view body = line.substr(1);
        while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) continue; // free-form comment
        const std::string_view key = body.substr(0, eq);
        const std::string_view value = body.substr(eq + 1);
        if (key == "sample_period_s") {
            const auto res = std::from_chars(value.data(), value.data() + value.size(), period);
            if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
                throw ParseError(source_name, line_no, "bad sample_period_s");
        } else if (key == "channel_label") {
            label = std::string(value);
        } else if (key == "origin") {
            if (value == "synthetic") origin = Origin::synthetic;
            else if (value == "measured") origin = Origin::measured;
            else throw ParseError(source_name, line_no, "unknown origin");
        } else if (key == "seed") {
            std::uint64_t s = 0;
            const auto res = std::from_chars(value.data(), value.data() + value.size(), s);
            if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
                throw ParseError(source_name, line_no, "bad seed");
            seed = s;
        }
    }
    if (outcomes.empty()) throw DataError(source_name + ": trace has no outcomes");
    try {
        return Trace(std::move(outcomes), period, std::move(label), origin, seed);
    } catch (const DataError& e) {
        throw DataError(source_name + ": " + e.what());
    }
}

Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open trace file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str(), path.string());
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write trace file " + path.string());
    out << format_trace(trace);
    if (!out) throw DataError("write failed for " + path.string());
}

// ---- Split ----

std::pair<Trace, Trace> split_train_test(const Trace& trace, std::size_t boundary_index) {
    if (boundary_index == 0 || boundary_index >= trace.size())
        throw DataError("split boundary " + std::to_string(boundary_index) +
                        " outside (0, " + std::to_string(trace.size()) + ")");
    const auto x = trace.outcomes();
    auto part = [&](std::size_t from, std::size_t to) {
        return Trace(std::vector<std::uint8_t>(x.begin() + static_cast<std::ptrdiff_t>(from),
                                               x.begin() + static_cast<std::ptrdiff_t>(to)),
                     trace.sample_period_s(), trace.channel_label(), trace.origin(),
                     trace.seed());
    };
    return {part(0, boundary_index), part(boundary_index, trace.size())};
}

std::pair<Trace, Trace> split_by_fraction(const Trace& trace, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0,1)");
    const auto boundary =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(trace.size())));
    return split_train_test(trace, boundary);
}

} // namespace linkq
