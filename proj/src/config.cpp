#include "csf/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace csf {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
    Config cfg;
    cfg.raw_ = text;
    std::istringstream is(text);
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
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = val;
    }
    return cfg;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a number, got '" + it->second + "'");
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(key);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected an integer, got '" + it->second +
                          "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + it->second + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& s : get_list(key)) {
        try {
            out.push_back(std::stoi(s));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": expected integers, got '" + s + "'");
        }
    }
    return out;
}

StateSpaceModel model_from_config(const Config& cfg) {
    StateSpaceModel m;
    m.drift = drift_kind_from_string(cfg.get("model.model", "double_well"));
    m.obs = obs_kind_from_string(cfg.get("model.obs", "cubic"));
    m.dim = cfg.get_int("model.dim", 1);
    m.dt = cfg.get_double("model.dt", 0.1);
    m.well_scale = cfg.get_double("model.C", 1.0);
    m.linear_rho = cfg.get_double("model.linear_rho", 0.9);
    m.ou_form = cfg.get_bool("model.ou_form", false);
    m.process.kind = noise_kind_from_string(cfg.get("model.proc_noise", "gaussian"));
    m.process.scale = cfg.get_double("model.proc_sigma", 0.2);
    m.observation.kind = noise_kind_from_string(cfg.get("model.obs_noise", "gaussian"));
    m.observation.scale = m.observation.kind == NoiseKind::kCauchy
                              ? cfg.get_double("model.cauchy_gamma", 0.0544)
                              : cfg.get_double("model.obs_sigma", 0.1);
    m.init_sigma = cfg.get_double("model.init_sigma", 0.5);
    m.validate();
    return m;
}

NoiseSchedule schedule_from_config(const Config& cfg) {
    NoiseSchedule s;
    s.sigma_min = cfg.get_double("schedule.sigma_min", 0.01);
    s.sigma_max = cfg.get_double("schedule.sigma_max", 25.0);
    s.horizon = cfg.get_double("schedule.T", 1.0);
    s.eps = cfg.get_double("schedule.eps", 1e-3);
    s.reverse_steps = cfg.get_int("schedule.reverse_steps", 500);
    s.validate();
    return s;
}

EncoderConfig encoder_from_config(const Config& cfg) {
    EncoderConfig e;
    e.sab_layers = cfg.get_int("encoder.sab_layers", 2);
    e.hidden = cfg.get_int("encoder.hidden", 128);
    e.heads = cfg.get_int("encoder.heads", 4);
    e.code_dim = cfg.get_int("encoder.code_dim", 64);
    e.cap = cfg.get_int("encoder.cap", 1000);
    e.validate();
    return e;
}

ScoreNetConfig score_from_config(const Config& cfg) {
    ScoreNetConfig s;
    s.layers = cfg.get_int("score.score_layers", 4);
    s.hidden = cfg.get_int("score.score_hidden", 256);
    s.n_freq = cfg.get_int("score.n_freq", 16);
    s.validate();
    return s;
}

TrainConfig train_from_config(const Config& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_int("train.epochs", 20);
    t.batch = cfg.get_int("train.batch", 32);
    t.lr = cfg.get_double("train.lr", 1e-3);
    t.steplr_period = cfg.get_int("train.steplr_period", std::max(1, t.epochs / 4));
    t.steplr_gamma = cfg.get_double("train.steplr_gamma", 0.5);
    t.seed = static_cast<uint64_t>(cfg.get_int("train.seed", 1));
    t.multi_x0 = cfg.get_int("train.multi_x0", 1);
    t.validate();
    return t;
}

ShockSpec shocks_from_config(const Config& cfg, int steps) {
    ShockSpec s;
    s.sigma = cfg.get_double("model.shock_sigma", 1.0);
    if (cfg.has("model.shock_steps")) {
        s.steps = cfg.get_int_list("model.shock_steps");
    } else {
        // Default: two shocks at one and two thirds of the trajectory.
        if (steps >= 3) s.steps = {steps / 3, 2 * steps / 3};
    }
    return s;
}

GuidanceOpts guidance_from_config(const Config& cfg) {
    GuidanceOpts g;
    g.zeta = cfg.get_double("filter.guidance_scale", 1.0);
    g.clip_norm = cfg.get_double("filter.clip_norm", 0.0);
    g.exact_jacobian = cfg.get_bool("filter.exact_jacobian", false);
    g.skip_first_guidance = cfg.get_bool("filter.skip_first_guidance", false);
    return g;
}

SfConfig sf_from_config(const Config& cfg) {
    SfConfig s;
    s.iters = cfg.get_int("filter.sf_iters", 500);
    s.batch = cfg.get_int("filter.sf_batch", 128);
    s.lr = cfg.get_double("filter.sf_lr", 1e-3);
    return s;
}

}  // namespace csf
