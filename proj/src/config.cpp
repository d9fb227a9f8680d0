#include "linkq/config.hpp"

#include "linkq/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace linkq {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(sep, start);
        const auto item = trim(s.substr(start, end == std::string_view::npos ? s.size() - start
                                                                             : end - start));
        if (!item.empty()) out.push_back(item);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

// Section accessor that reports unknown keys.
class Section {
public:
    Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {}

    bool has(const std::string& key) {
        used_.insert(key);
        return tree_.find(key) != tree_.not_found();
    }

    std::string str(const std::string& key) {
        used_.insert(key);
        const auto it = tree_.find(key);
        if (it == tree_.not_found()) throw ConfigError("[" + name_ + "] is missing '" + key + "'");
        return trim(it->second.data());
    }

    std::string str(const std::string& key, const std::string& fallback) {
        return has(key) ? str(key) : fallback;
    }

    double real(const std::string& key) { return to_real(key, str(key)); }
    double real(const std::string& key, double fallback) {
        return has(key) ? real(key) : fallback;
    }

    std::uint64_t uint(const std::string& key) {
        const auto s = str(key);
        std::uint64_t v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ConfigError("[" + name_ + "] " + key + ": expected a non-negative integer");
        return v;
    }
    std::uint64_t uint(const std::string& key, std::uint64_t fallback) {
        return has(key) ? uint(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("[" + name_ + "] " + key + ": expected true/false");
    }

    double to_real(const std::string& key, const std::string& s) const {
        double v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ConfigError("[" + name_ + "] " + key + ": expected a number, got '" + s + "'");
        return v;
    }

    void reject_unknown() const {
        for (const auto& [key, _] : tree_)
            if (!used_.contains(key))
                throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
    }

private:
    std::string name_;
    const pt::ptree& tree_;
    std::set<std::string> used_;
};

std::vector<std::size_t> parse_widths(Section& sec, const std::string& key,
                                      std::vector<std::size_t> fallback) {
    if (!sec.has(key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : split_list(sec.str(key), ',')) {
        std::size_t v{};
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || v == 0)
            throw ConfigError(key + ": widths must be positive integers");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(key + ": at least one hidden layer is required");
    return out;
}

GeParams parse_ge_tuple(Section& sec, const std::string& key, const std::string& text) {
    const auto parts = split_list(text, ' ');
    if (parts.size() != 4)
        throw ConfigError(key + ": each regime needs 'p_good_loss p_bad_loss p_g2b p_b2g'");
    return {sec.to_real(key, parts[0]), sec.to_real(key, parts[1]), sec.to_real(key, parts[2]),
            sec.to_real(key, parts[3])};
}

ChannelSource parse_channel(const std::string& label, Section sec,
                            const std::filesystem::path& base_dir) {
    ChannelSource ch;
    ch.label = label;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    const auto kind = sec.str("source");
    if (kind == "files") {
        ch.kind = ChannelSource::Kind::files;
        ch.train_file = resolve(sec.str("train"));
        ch.test_file = resolve(sec.str("test"));
    } else if (kind == "file") {
        ch.kind = ChannelSource::Kind::file;
        ch.file = resolve(sec.str("path"));
    } else if (kind == "ge") {
        ch.kind = ChannelSource::Kind::ge;
        ch.length = sec.uint("length");
        ch.sample_period_s = sec.real("sample_period_s", 0.5);
        ch.ge.seed = sec.uint("seed");
        ch.ge.params = {sec.real("p_good_loss"), sec.real("p_bad_loss"), sec.real("p_g2b"),
                        sec.real("p_b2g")};
        if (sec.has("regime_palette")) {
            std::vector<GeParams> palette;
            for (const auto& item : split_list(sec.str("regime_palette"), '|'))
                palette.push_back(parse_ge_tuple(sec, "regime_palette", item));
            ch.ge.regime_schedule = random_regime_schedule(
                palette, ch.length, sec.uint("regime_min_gap"), sec.uint("regime_max_gap"),
                sec.uint("regime_seed"));
        } else if (sec.has("regimes")) {
            // explicit "start: pg pb g2b b2g | start: ..."
            for (const auto& item : split_list(sec.str("regimes"), '|')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("regimes: expected '<start>: <4 probabilities>'");
                const auto start = trim(item.substr(0, colon));
                std::size_t idx{};
                const auto res = std::from_chars(start.data(), start.data() + start.size(), idx);
                if (res.ec != std::errc{} || res.ptr != start.data() + start.size())
                    throw ConfigError("regimes: bad start index '" + start + "'");
                ch.ge.regime_schedule.push_back(
                    {idx, parse_ge_tuple(sec, "regimes", item.substr(colon + 1))});
            }
        }
        validate(ch.ge);
    } else {
        throw ConfigError("[channel." + label + "] source must be files, file or ge");
    }
    sec.reject_unknown();
    return ch;
}

} // namespace

const ChannelSource& ExperimentConfig::channel(const std::string& label) const {
    for (const auto& c : channels)
        if (c.label == label) return c;
    throw ConfigError("unknown channel '" + label + "'");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.channels.empty()) throw ConfigError("no channels configured");
    std::set<std::string> labels;
    for (const auto& c : cfg.channels) {
        if (c.label.empty()) throw ConfigError("channel label must not be empty");
        if (!labels.insert(c.label).second)
            throw ConfigError("duplicate channel label '" + c.label + "'");
        if (c.kind == ChannelSource::Kind::ge && c.length == 0)
            throw ConfigError("channel '" + c.label + "' needs a positive length");
    }
    for (const auto& t : cfg.test_channels)
        if (!labels.contains(t)) throw ConfigError("unknown test channel '" + t + "'");
    if (cfg.window_w == 0) throw ConfigError("window_w must be positive");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0,1)");
    if (cfg.models.empty() || cfg.sources.empty())
        throw ConfigError("at least one model kind and one training source are required");
    if (!(cfg.sweep.min > 0.0) || !(cfg.sweep.max > cfg.sweep.min) || cfg.sweep.max > 1.0 ||
        cfg.sweep.points < 2)
        throw ConfigError("calibration sweep must satisfy 0 < min < max <= 1 with >= 2 points");
    nn::validate(cfg.train);
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.source_text = text;
    for (const auto& [name, body] : tree) {
        if (name == "experiment") {
            Section sec(name, body);
            cfg.seed = sec.uint("seed", 0);
            cfg.window_w = sec.uint("window_w", kDefaultWindow);
            if (sec.has("warmup")) cfg.warmup = sec.uint("warmup");
            cfg.train_fraction = sec.real("train_fraction", 0.6);
            if (sec.has("models")) {
                cfg.models.clear();
                for (const auto& m : split_list(sec.str("models"), ','))
                    cfg.models.push_back(parse_model_kind(m));
            }
            if (sec.has("sources")) {
                cfg.sources.clear();
                for (const auto& s : split_list(sec.str("sources"), ','))
                    cfg.sources.push_back(parse_training_source(s));
            }
            if (sec.has("test_channels")) cfg.test_channels = split_list(sec.str("test_channels"), ',');
            cfg.threads = sec.uint("threads", 0);
            if (sec.has("out")) {
                std::filesystem::path out(sec.str("out"));
                cfg.out_dir = out.is_absolute() ? out : base_dir / out;
            }
            sec.reject_unknown();
        } else if (name == "training") {
            Section sec(name, body);
            cfg.train.epochs = sec.uint("epochs", 15);
            cfg.train.batch_size = sec.uint("batch_size", 64);
            cfg.train.lr0 = sec.real("lr0", 0.01);
            cfg.train.shuffle = sec.boolean("shuffle", true);
            auto& hw = cfg.hidden_widths;
            hw[nn::Architecture::hourglass] =
                parse_widths(sec, "hourglass_widths", hw[nn::Architecture::hourglass]);
            hw[nn::Architecture::pyramid] =
                parse_widths(sec, "pyramid_widths", hw[nn::Architecture::pyramid]);
            sec.reject_unknown();
        } else if (name == "calibration") {
            Section sec(name, body);
            cfg.sweep.min = sec.real("alpha_min", 1e-5);
            cfg.sweep.max = sec.real("alpha_max", 1e-1);
            cfg.sweep.points = sec.uint("points", 61);
            sec.reject_unknown();
        } else if (name.starts_with("channel.")) {
            cfg.channels.push_back(
                parse_channel(name.substr(8), Section(name, body), base_dir));
        } else {
            throw ConfigError("unknown config section [" + name + "]");
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

Trace simulate_channel(const ChannelSource& ch) {
    if (ch.kind != ChannelSource::Kind::ge)
        throw ConfigError("channel '" + ch.label + "' is not synthetic");
    return generate_ge_trace(ch.ge, ch.length, ch.label, ch.sample_period_s);
}

} // namespace linkq
