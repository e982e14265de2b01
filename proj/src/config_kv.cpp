#include "crashsev/config_kv.hpp"

#include <charconv>
#include <fstream>

#include "crashsev/errors.hpp"
#include "crashsev/numfmt.hpp"

namespace crashsev::config {

namespace {

int parse_int(const std::string& key, const std::string& s) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError(key + ": expected an unsigned integer, got '" + s + "'");
    return v;
}

double parse_num(const std::string& key, const std::string& s) {
    double v = 0.0;
    if (!try_parse_double(s, v))
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_kv(tabnet::TabNetConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "n_d") cfg.n_d = parse_int(key, value);
    else if (key == "n_a") cfg.n_a = parse_int(key, value);
    else if (key == "n_steps") cfg.n_steps = parse_int(key, value);
    else if (key == "lambda_sparse") cfg.lambda_sparse = parse_num(key, value);
    else if (key == "gamma") cfg.gamma = parse_num(key, value);
    else if (key == "n_independent") cfg.n_independent = parse_int(key, value);
    else if (key == "n_shared") cfg.n_shared = parse_int(key, value);
    else if (key == "bn_momentum") cfg.bn_momentum = parse_num(key, value);
    else if (key == "clip_value") cfg.clip_value = parse_num(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_num(key, value);
    else if (key == "mask_type") cfg.mask_type = tabnet::mask_type_from_name(value);
    else if (key == "entmax_alpha") cfg.entmax_alpha = parse_num(key, value);
    else if (key == "n_classes") cfg.n_classes = parse_int(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "max_epochs") cfg.max_epochs = parse_int(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
    else if (key == "patience") cfg.patience = parse_int(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> to_kv(const tabnet::TabNetConfig& cfg) {
    return {
        {"n_d", std::to_string(cfg.n_d)},
        {"n_a", std::to_string(cfg.n_a)},
        {"n_steps", std::to_string(cfg.n_steps)},
        {"lambda_sparse", format_double(cfg.lambda_sparse)},
        {"gamma", format_double(cfg.gamma)},
        {"n_independent", std::to_string(cfg.n_independent)},
        {"n_shared", std::to_string(cfg.n_shared)},
        {"bn_momentum", format_double(cfg.bn_momentum)},
        {"clip_value", format_double(cfg.clip_value)},
        {"learning_rate", format_double(cfg.learning_rate)},
        {"mask_type", tabnet::mask_type_name(cfg.mask_type)},
        {"entmax_alpha", format_double(cfg.entmax_alpha)},
        {"n_classes", std::to_string(cfg.n_classes)},
        {"seed", std::to_string(cfg.seed)},
        {"max_epochs", std::to_string(cfg.max_epochs)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"patience", std::to_string(cfg.patience)},
    };
}

tabnet::TabNetConfig load_kv_file(const std::string& path, tabnet::TabNetConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + t + "'");
        apply_kv(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    base.validate();
    return base;
}

void save_kv_file(const tabnet::TabNetConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing", path);
    for (const auto& [k, v] : to_kv(cfg)) out << k << "=" << v << "\n";
    if (!out) throw DataError("write failed", path);
}

}  // namespace crashsev::config
