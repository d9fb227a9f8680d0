#include "linkq/nn/model_io.hpp"

#include "linkq/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace linkq::nn {
namespace {

constexpr std::string_view kMagic = "linkq-model";

void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

void append_row(std::string& out, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        append_number(out, v[i]);
    }
    out += '\n';
}

// Line cursor over the model text.
class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    bool at_end() const { return pos_ >= text_.size(); }
    std::size_t line_no() const { return line_; }

    std::string_view peek() const {
        const std::size_t eol = text_.find('\n', pos_);
        return std::string_view(text_).substr(pos_, (eol == std::string::npos ? text_.size() : eol) - pos_);
    }

    std::string_view next() {
        if (at_end()) fail("unexpected end of file");
        const auto line = peek();
        pos_ += line.size() + 1;
        ++line_;
        return line;
    }

    // Consumes "key=value" and returns value.
    std::string_view expect_key(std::string_view key) {
        const auto line = next();
        if (line.size() <= key.size() || line.substr(0, key.size()) != key ||
            line[key.size()] != '=')
            fail("expected '" + std::string(key) + "='");
        return line.substr(key.size() + 1);
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ModelFormatError("model file line " + std::to_string(line_) + ": " + what);
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

template <class T>
T parse_int(const Reader& r, std::string_view s) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        r.fail("bad integer '" + std::string(s) + "'");
    return v;
}

double parse_double(const Reader& r, std::string_view s) {
    double v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        r.fail("bad number '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const std::size_t j = line.find(' ', i);
        const std::size_t end = j == std::string_view::npos ? line.size() : j;
        if (end > i) out.push_back(line.substr(i, end - i));
        i = end;
    }
    return out;
}

bool is_block_header(std::string_view line) {
    return line.starts_with("weights ") || line.starts_with("biases ") || line == "end";
}

// Reads numbers until the next block header and checks the count.
std::vector<double> read_values(Reader& r, std::size_t expected, const std::string& what) {
    std::vector<double> values;
    values.reserve(expected);
    while (!r.at_end() && !is_block_header(r.peek()))
        for (auto tok : split_ws(r.next())) values.push_back(parse_double(r, tok));
    if (values.size() != expected)
        throw ModelShapeError(what + " declares " + std::to_string(expected) + " values but holds " +
                              std::to_string(values.size()));
    return values;
}

} // namespace

std::string format_model(const MlpModel& model) {
    model.validate();
    std::string out;
    out += kMagic;
    out += "\nformat_version=" + std::to_string(kModelFormatVersion) + "\n";
    out += "arch=" + std::string(to_string(model.arch)) + "\n";
    out += "input_width=" + std::to_string(model.input_width) + "\n";
    out += "layers=" + std::to_string(model.layers.size()) + "\n";
    for (const auto& l : model.layers)
        out += "layer=" + std::to_string(l.spec.width) + " " +
               std::string(to_string(l.spec.activation)) + "\n";
    if (model.provenance) {
        const auto& p = *model.provenance;
        out += "provenance=1\nalpha_star=";
        append_number(out, p.grid.alpha_star);
        out += "\ninit_state=";
        append_number(out, p.init_state);
        out += "\nwindow_w=" + std::to_string(p.window_w) + "\n";
        out += "alpha_grid=" + std::to_string(p.grid.alphas.size()) + "\n";
        for (double a : p.grid.alphas) append_row(out, &a, 1);
    } else {
        out += "provenance=0\n";
    }
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        out += "weights " + std::to_string(i) + " " + std::to_string(l.fan_in) + "x" +
               std::to_string(l.spec.width) + "\n";
        for (std::size_t r = 0; r < l.fan_in; ++r)
            append_row(out, l.weights.data() + r * l.spec.width, l.spec.width);
        out += "biases " + std::to_string(i) + " " + std::to_string(l.spec.width) + "\n";
        append_row(out, l.biases.data(), l.biases.size());
    }
    out += "end\n";
    return out;
}

MlpModel parse_model(const std::string& text) {
    Reader r(text);
    if (r.at_end() || r.next() != kMagic) r.fail("missing 'linkq-model' header");
    const int version = parse_int<int>(r, r.expect_key("format_version"));
    if (version != kModelFormatVersion)
        throw ModelVersionError("model format_version " + std::to_string(version) +
                                " is not supported (expected " +
                                std::to_string(kModelFormatVersion) + ")");

    MlpModel model;
    try {
        model.arch = parse_architecture(r.expect_key("arch"));
    } catch (const ConfigError& e) {
        r.fail(e.what());
    }
    model.input_width = parse_int<std::size_t>(r, r.expect_key("input_width"));
    const auto n_layers = parse_int<std::size_t>(r, r.expect_key("layers"));
    std::size_t fan_in = model.input_width;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto parts = split_ws(r.expect_key("layer"));
        if (parts.size() != 2) r.fail("layer line needs '<width> <activation>'");
        DenseLayer layer;
        layer.spec.width = parse_int<std::size_t>(r, parts[0]);
        try {
            layer.spec.activation = parse_activation(parts[1]);
        } catch (const ConfigError& e) {
            r.fail(e.what());
        }
        layer.fan_in = fan_in;
        fan_in = layer.spec.width;
        model.layers.push_back(std::move(layer));
    }

    const auto has_prov = r.expect_key("provenance");
    if (has_prov == "1") {
        FeatureProvenance p;
        p.grid.alpha_star = parse_double(r, r.expect_key("alpha_star"));
        p.init_state = parse_double(r, r.expect_key("init_state"));
        p.window_w = parse_int<std::size_t>(r, r.expect_key("window_w"));
        const auto count = parse_int<std::size_t>(r, r.expect_key("alpha_grid"));
        if (count != p.grid.alphas.size())
            throw ModelShapeError("alpha grid declares " + std::to_string(count) +
                                  " values, expected " + std::to_string(p.grid.alphas.size()));
        for (auto& a : p.grid.alphas) a = parse_double(r, r.next());
        model.provenance = p;
    } else if (has_prov != "0") {
        r.fail("provenance must be 0 or 1");
    }

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto& l = model.layers[i];
        const auto wh = split_ws(r.next());
        if (wh.size() != 3 || wh[0] != "weights" || parse_int<std::size_t>(r, wh[1]) != i)
            r.fail("expected 'weights " + std::to_string(i) + " <rows>x<cols>'");
        const auto x = wh[2].find('x');
        if (x == std::string_view::npos) r.fail("bad weight shape");
        const auto rows = parse_int<std::size_t>(r, wh[2].substr(0, x));
        const auto cols = parse_int<std::size_t>(r, wh[2].substr(x + 1));
        if (rows != l.fan_in || cols != l.spec.width)
            throw ModelShapeError("layer " + std::to_string(i) + " weights declared " +
                                  std::to_string(rows) + "x" + std::to_string(cols) +
                                  " but the architecture implies " + std::to_string(l.fan_in) +
                                  "x" + std::to_string(l.spec.width));
        l.weights = read_values(r, rows * cols, "layer " + std::to_string(i) + " weights");

        const auto bh = split_ws(r.next());
        if (bh.size() != 3 || bh[0] != "biases" || parse_int<std::size_t>(r, bh[1]) != i)
            r.fail("expected 'biases " + std::to_string(i) + " <width>'");
        const auto bcount = parse_int<std::size_t>(r, bh[2]);
        if (bcount != l.spec.width)
            throw ModelShapeError("layer " + std::to_string(i) + " biases declared " +
                                  std::to_string(bcount) + " but the layer width is " +
                                  std::to_string(l.spec.width));
        l.biases = read_values(r, bcount, "layer " + std::to_string(i) + " biases");
    }
    if (r.at_end() || r.next() != "end") r.fail("missing 'end' marker");
    model.validate();
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    const std::string text = format_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

} // namespace linkq::nn
