#include "deguv/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace deguv {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

float parse_float(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        float x = std::stof(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

std::string fmt_float(float x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(x));
    return buf;
}

// One table drives parsing, overrides and canonical output.
struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define F_FLOAT(KEY, REF)                                                       \
    Field{KEY, [](RunConfig& c, const std::string& v) { c.REF = parse_float(v, KEY); }, \
          [](const RunConfig& c) { return fmt_float(c.REF); }}
#define F_INT(KEY, REF, TYPE)                                                   \
    Field{KEY, [](RunConfig& c, const std::string& v) { c.REF = static_cast<TYPE>(parse_int(v, KEY)); }, \
          [](const RunConfig& c) { return std::to_string(c.REF); }}
#define F_BOOL(KEY, REF)                                                        \
    Field{KEY, [](RunConfig& c, const std::string& v) { c.REF = parse_bool(v, KEY); }, \
          [](const RunConfig& c) { return c.REF ? std::string("true") : std::string("false"); }}
#define F_STR(KEY, REF)                                                         \
    Field{KEY, [](RunConfig& c, const std::string& v) { c.REF = v; },            \
          [](const RunConfig& c) { return c.REF; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        F_INT("env.resolution", env.resolution, int),
        F_INT("env.frame_stack", env.frame_stack, int),
        F_INT("env.horizon", env.horizon, int),
        F_FLOAT("env.move_delta", env.move_delta),
        F_FLOAT("env.grip_radius", env.grip_radius),
        F_INT("env.distractors", env.n_distractors, int),
        F_FLOAT("env.zone_x", env.zone_x),
        F_FLOAT("env.zone_y", env.zone_y),
        F_FLOAT("env.zone_radius", env.zone_radius),
        F_FLOAT("env.hard_brightness_lo", env.hard_brightness_lo),
        F_FLOAT("env.hard_brightness_hi", env.hard_brightness_hi),

        F_INT("aug.shift_pad", aug.shift_pad, int),
        F_FLOAT("aug.overlay_alpha", aug.overlay_alpha),
        F_FLOAT("aug.jitter_contrast", aug.jitter_contrast),
        F_FLOAT("aug.jitter_hue", aug.jitter_hue),
        F_BOOL("aug.compose_all", aug.compose_all),

        F_FLOAT("train.gamma", train.gamma),
        F_FLOAT("train.ema_rate", train.ema_rate),
        F_FLOAT("train.alpha", train.alpha),
        F_FLOAT("train.beta", train.beta),
        F_FLOAT("train.nce_temperature", train.nce_temperature),
        F_FLOAT("train.actor_lr", train.actor_lr),
        F_FLOAT("train.critic_lr", train.critic_lr),
        F_FLOAT("train.aux_lr", train.aux_lr),
        F_FLOAT("train.entropy_lr", train.entropy_lr),
        F_FLOAT("train.init_entropy_coef", train.init_entropy_coef),
        F_FLOAT("train.target_entropy", train.target_entropy),
        F_INT("train.batch_size", train.batch_size, int),
        F_INT("train.total_steps", train.total_steps, std::int64_t),
        F_INT("train.update_every", train.update_every, int),
        F_INT("train.aux_every", train.aux_every, int),
        F_INT("train.warmup_steps", train.warmup_steps, int),
        F_INT("train.replay_capacity", train.replay_capacity, std::int64_t),
        F_INT("train.seed", train.seed, std::uint64_t),
        F_BOOL("train.encoder_target_ema", train.encoder_target_ema),
        F_BOOL("train.actor_on_aug", train.actor_on_aug),

        F_BOOL("ablate.masker_enabled", train.masker_enabled),
        F_BOOL("ablate.auxiliary_enabled", train.auxiliary_enabled),
        F_BOOL("ablate.augmented_branch_enabled", train.augmented_branch_enabled),

        F_BOOL("masker.per_frame", masker.per_frame),

        F_INT("eval.interval", eval.interval, std::int64_t),
        F_INT("eval.episodes", eval.episodes, int),
        F_INT("eval.seeds", eval.seeds, int),

        F_STR("run.output_dir", output_dir),
        F_STR("run.tag", tag),
    };
    return table;
}

const Field* find_field(const std::string& key) {
    for (const Field& f : fields())
        if (key == f.key) return &f;
    return nullptr;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key: '" + key + "'");
    f->set(*this, value);
}

void RunConfig::set_override(const std::string& key, const std::string& value) {
    if (key.find('.') != std::string::npos) {
        set(key, value);
        return;
    }
    const Field* hit = nullptr;
    for (const Field& f : fields()) {
        const std::string k = f.key;
        if (k.size() > key.size() && k.compare(k.size() - key.size(), key.size(), key) == 0 &&
            k[k.size() - key.size() - 1] == '.') {
            if (hit)
                throw ConfigError("ambiguous config key: '" + key + "' (use the dotted form)");
            hit = &f;
        }
    }
    if (!hit) throw ConfigError("unknown config key: '" + key + "'");
    hit->set(*this, value);
}

void RunConfig::validate() const {
    if (env.resolution != 64)
        throw ConfigError("env.resolution must be 64 (network shapes are fixed at 64x64)");
    if (env.frame_stack < 1 || env.frame_stack > 8)
        throw ConfigError("env.frame_stack out of range [1,8]");
    if (env.horizon < 1) throw ConfigError("env.horizon must be positive");
    if (env.move_delta <= 0 || env.grip_radius <= 0)
        throw ConfigError("env.move_delta and env.grip_radius must be positive");
    if (env.n_distractors < 0) throw ConfigError("env.distractors must be >= 0");
    if (aug.shift_pad < 0) throw ConfigError("aug.shift_pad must be >= 0");
    if (aug.shift_pad >= env.resolution)
        throw ConfigError("aug.shift_pad must be smaller than the image side");
    if (aug.overlay_alpha < 0.0f || aug.overlay_alpha > 1.0f)
        throw ConfigError("aug.overlay_alpha must be in [0,1]");
    if (aug.jitter_contrast < 0.0f || aug.jitter_hue < 0.0f)
        throw ConfigError("augmentation strengths must be >= 0");
    if (!(train.gamma > 0.0f && train.gamma < 1.0f))
        throw ConfigError("train.gamma must be in (0,1)");
    if (train.ema_rate < 0.0f || train.ema_rate > 1.0f)
        throw ConfigError("train.ema_rate must be in [0,1]");
    if (train.alpha < 0.0f || train.beta < 0.0f || train.alpha + train.beta <= 0.0f)
        throw ConfigError("train.alpha and train.beta must be >= 0 with alpha + beta > 0");
    if (train.nce_temperature <= 0.0f)
        throw ConfigError("train.nce_temperature must be positive");
    if (train.batch_size < 2)
        throw ConfigError("train.batch_size must be >= 2 (contrastive negatives)");
    if (train.total_steps < 0) throw ConfigError("train.total_steps must be >= 0");
    if (train.update_every < 1) throw ConfigError("train.update_every must be >= 1");
    if (train.aux_every < 1) throw ConfigError("train.aux_every must be >= 1");
    if (train.warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
    if (train.replay_capacity < train.batch_size + env.frame_stack + 1)
        throw ConfigError("train.replay_capacity too small");
    if (eval.interval < 1 || eval.episodes < 1 || eval.seeds < 1)
        throw ConfigError("eval.interval, eval.episodes and eval.seeds must be >= 1");
}

std::string RunConfig::canonical() const {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const Field& f : fields()) kv.emplace_back(f.key, f.get(*this));
    std::sort(kv.begin(), kv.end());
    std::string out;
    for (auto& [k, v] : kv) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t RunConfig::compat_hash() const {
    // env.* shapes the observation space; masker.* and env.frame_stack shape
    // the networks. Run-length and output knobs do not affect compatibility.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Field& f : fields()) {
        std::string key = f.key;
        if (key.rfind("env.", 0) == 0 || key.rfind("masker.", 0) == 0) {
            h = fnv1a64(key, h);
            h = fnv1a64(f.get(*this), h);
        }
    }
    return h;
}

std::vector<std::string> RunConfig::ablation_tags() const {
    std::vector<std::string> tags;
    if (!train.masker_enabled) tags.push_back("ablation:no-masker");
    if (!train.auxiliary_enabled) tags.push_back("ablation:no-auxiliary");
    if (!train.augmented_branch_enabled) tags.push_back("ablation:no-aug-branch");
    return tags;
}

}  // namespace deguv
