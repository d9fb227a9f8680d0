#include "linkq/report.hpp"

#include "linkq/error.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace linkq {

std::string_view to_string(TrainingSource s) noexcept {
    switch (s) {
    case TrainingSource::same_channel: return "same_channel";
    case TrainingSource::all_channels: return "all_channels";
    case TrainingSource::all_except_test: return "all_except_test";
    }
    return "unknown";
}

std::string_view to_string(ModelKind m) noexcept {
    switch (m) {
    case ModelKind::ema: return "ema";
    case ModelKind::hourglass: return "hourglass";
    case ModelKind::pyramid: return "pyramid";
    }
    return "unknown";
}

TrainingSource parse_training_source(std::string_view name) {
    if (name == "same_channel") return TrainingSource::same_channel;
    if (name == "all_channels") return TrainingSource::all_channels;
    if (name == "all_except_test") return TrainingSource::all_except_test;
    throw ConfigError("unknown training source '" + std::string(name) + "'");
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "ema") return ModelKind::ema;
    if (name == "hourglass") return ModelKind::hourglass;
    if (name == "pyramid") return ModelKind::pyramid;
    throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string training_label(const ScenarioSpec& s) {
    switch (s.source) {
    case TrainingSource::same_channel: return s.test_channel;
    case TrainingSource::all_channels: return "all";
    case TrainingSource::all_except_test: return "!" + s.test_channel;
    }
    return "?";
}

std::string format_alpha_parameter(double alpha_star) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "\xCE\xB1*=%.6f", alpha_star);
    return buf;
}

namespace {

const char* display_name(ModelKind m) {
    switch (m) {
    case ModelKind::ema: return "EMA";
    case ModelKind::hourglass: return "Hourglass";
    case ModelKind::pyramid: return "Pyramid";
    }
    return "?";
}

struct Column {
    const char* name;
    double ErrorStats::*field;
    double scale; // display multiplier
};

constexpr Column kStatColumns[] = {
    {"mu_e2", &ErrorStats::mu_e2, 1e3},       {"e2_p95", &ErrorStats::e2_p95, 1e3},
    {"e2_max", &ErrorStats::e2_max, 1e3},     {"mu_abs", &ErrorStats::mu_abs, 100},
    {"sigma_abs", &ErrorStats::sigma_abs, 100}, {"abs_p90", &ErrorStats::abs_p90, 100},
    {"abs_p95", &ErrorStats::abs_p95, 100},   {"abs_p99", &ErrorStats::abs_p99, 100},
    {"abs_max", &ErrorStats::abs_max, 100},   {"e_min", &ErrorStats::e_min, 100},
    {"e_p5", &ErrorStats::e_p5, 100},         {"e_p95", &ErrorStats::e_p95, 100},
    {"e_max", &ErrorStats::e_max, 100},
};

std::string number17(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

// Terminal columns of a UTF-8 string: count lead bytes only.
std::size_t display_width(const std::string& s) {
    std::size_t shown = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++shown;
    return shown;
}

std::string pad(const std::string& s, std::size_t width, bool right) {
    const std::size_t shown = display_width(s);
    if (shown >= width) return s;
    const std::string fill(width - shown, ' ');
    return right ? fill + s : s + fill;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s) {
    double v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DataError("bad number '" + s + "' in results CSV");
    return v;
}

} // namespace

std::string render_text_table(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw DataError("no result rows to report");
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> head{"Test", "Model", "Training", "Parameters"};
    std::vector<std::string> units{"channel", "", "channel", ""};
    for (std::size_t c = 0; c < std::size(kStatColumns); ++c) {
        head.emplace_back(kStatColumns[c].name);
        units.emplace_back(c < 3 ? "[1e-3]" : "[%]");
    }
    cells.push_back(head);
    cells.push_back(units);
    for (const auto& r : rows) {
        std::vector<std::string> line{r.scenario.test_channel, display_name(r.scenario.model),
                                      training_label(r.scenario),
                                      format_alpha_parameter(r.alpha_star)};
        for (const auto& col : kStatColumns) {
            if (r.stats) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f", (*r.stats).*col.field * col.scale);
                line.emplace_back(buf);
            } else {
                line.emplace_back("-");
            }
        }
        if (!r.stats) line.push_back("FAILED: " + r.status);
        cells.push_back(std::move(line));
    }

    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& line : cells)
        for (std::size_t c = 0; c < head.size(); ++c)
            width[c] = std::max(width[c], display_width(line[c]));
    std::size_t rule = 0;
    for (std::size_t c = 0; c < width.size(); ++c)
        rule += width[c] + (c == 0 ? 0 : c == 4 || c == 7 || c == 13 ? 3 : 2);
    std::ostringstream out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& line = cells[i];
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c) out << (c == 4 || c == 7 || c == 13 ? " | " : "  ");
            if (c < width.size())
                out << pad(line[c], width[c], c >= 4);
            else
                out << line[c];
        }
        out << '\n';
        if (i == 1) out << std::string(rule, '-') << '\n';
    }
    out << "percentiles: " << kPercentileConvention << '\n';
    return out.str();
}

namespace {

std::string csv_header() {
    std::string h = "test_channel,model,training,training_channels,alpha_star,init_state,samples";
    for (const auto& col : kStatColumns) {
        h += ',';
        h += col.name;
    }
    return h + ",status";
}

} // namespace

std::string render_csv(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw DataError("no result rows to report");
    std::string out = "# units: raw fractions (e = prediction - target); percentiles: ";
    out += kPercentileConvention;
    out += "\n" + csv_header() + "\n";
    for (const auto& r : rows) {
        out += r.scenario.test_channel + "," + std::string(to_string(r.scenario.model)) + "," +
               std::string(to_string(r.scenario.source)) + ",";
        for (std::size_t i = 0; i < r.training_channels.size(); ++i) {
            if (i) out += ';';
            out += r.training_channels[i];
        }
        out += "," + number17(r.alpha_star) + "," + number17(r.init_state) + "," +
               std::to_string(r.samples);
        for (const auto& col : kStatColumns) out += "," + (r.stats ? number17((*r.stats).*col.field) : "nan");
        std::string status = r.status;
        for (auto& c : status)
            if (c == ',' || c == '\n') c = ' ';
        out += "," + status + "\n";
    }
    return out;
}

std::vector<ResultRow> parse_csv(const std::string& csv) {
    std::vector<ResultRow> rows;
    std::istringstream in(csv);
    std::string line;
    bool header_seen = false;
    const std::size_t n_cols = 7 + std::size(kStatColumns) + 1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != csv_header()) throw DataError("not a results CSV: unexpected header");
            header_seen = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != n_cols)
            throw DataError("results CSV row has " + std::to_string(f.size()) + " fields, expected " +
                            std::to_string(n_cols));
        ResultRow r;
        r.scenario.test_channel = f[0];
        r.scenario.model = parse_model_kind(f[1]);
        r.scenario.source = parse_training_source(f[2]);
        if (!f[3].empty()) r.training_channels = split(f[3], ';');
        r.alpha_star = parse_number(f[4]);
        r.init_state = parse_number(f[5]);
        r.samples = static_cast<std::size_t>(parse_number(f[6]));
        r.status = f.back();
        if (r.status == "ok") {
            ErrorStats s;
            for (std::size_t c = 0; c < std::size(kStatColumns); ++c)
                s.*kStatColumns[c].field = parse_number(f[7 + c]);
            r.stats = s;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

RenderedReport render_report(const std::vector<ResultRow>& rows) {
    return {render_text_table(rows), render_csv(rows)};
}

} // namespace linkq
