#include "mixnet/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>

namespace mixnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

i64 parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const i64 v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\" expects an integer, got \"" + value + "\"");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\" expects a number, got \"" + value + "\"");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key \"" + key + "\" expects true/false, got \"" + value + "\"");
}

} // namespace

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path);

    RunConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"num_fmb", [&](const std::string& k, const std::string& v) { cfg.model.num_fmb = parse_int(k, v); }},
        {"channels", [&](const std::string& k, const std::string& v) { cfg.model.channels = parse_int(k, v); }},
        {"gfml_size", [&](const std::string& k, const std::string& v) { cfg.model.gfml_size = parse_int(k, v); }},
        {"lfml_reduction", [&](const std::string& k, const std::string& v) { cfg.model.lfml_reduction = parse_int(k, v); }},
        {"downsample_factor", [&](const std::string& k, const std::string& v) { cfg.model.downsample_factor = parse_int(k, v); }},
        {"use_gfml", [&](const std::string& k, const std::string& v) { cfg.model.toggles.gfml = parse_bool(k, v); }},
        {"use_lfml", [&](const std::string& k, const std::string& v) { cfg.model.toggles.lfml = parse_bool(k, v); }},
        {"use_ffl", [&](const std::string& k, const std::string& v) { cfg.model.toggles.ffl = parse_bool(k, v); }},
        {"lr0", [&](const std::string& k, const std::string& v) { cfg.train.lr0 = parse_double(k, v); }},
        {"lr_min", [&](const std::string& k, const std::string& v) { cfg.train.lr_min = parse_double(k, v); }},
        {"total_iters", [&](const std::string& k, const std::string& v) { cfg.train.total_iters = parse_int(k, v); }},
        {"batch_size", [&](const std::string& k, const std::string& v) { cfg.train.batch_size = parse_int(k, v); }},
        {"crop", [&](const std::string& k, const std::string& v) { cfg.train.crop = parse_int(k, v); }},
        {"seed", [&](const std::string& k, const std::string& v) { cfg.train.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
        {"log_interval", [&](const std::string& k, const std::string& v) { cfg.train.log_interval = parse_int(k, v); }},
        {"checkpoint_interval", [&](const std::string& k, const std::string& v) { cfg.train.checkpoint_interval = parse_int(k, v); }},
        {"train_dir", [&](const std::string&, const std::string& v) { cfg.train_dir = v; }},
        {"val_dir", [&](const std::string&, const std::string& v) { cfg.val_dir = v; }},
        {"checkpoint_dir", [&](const std::string&, const std::string& v) { cfg.checkpoint_dir = v; }},
        {"resume", [&](const std::string&, const std::string& v) { cfg.resume = v; }},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key=value, got \"" + line + "\"");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key \"" + key +
                              "\"");
        it->second(key, value);
    }
    return cfg;
}

} // namespace mixnet
