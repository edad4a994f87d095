#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "prefixbench/attack.hpp"
#include "prefixbench/evalharness.hpp"
#include "prefixbench/policy.hpp"
#include "prefixbench/training.hpp"

namespace pbench {

// Run configuration, flat key = value config files with [section] headers,
// workspace layout, and content digests for artifact provenance.

// ---- digests ----------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string digest_hex(const std::string& data) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t h = fnv1a64(data);
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hex[h & 0xf];
        h >>= 4;
    }
    return s;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArtifactError("cannot read: " + path);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline void write_file(const std::string& path, const std::string& data) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ArtifactError("cannot write: " + path);
    f << data;
}

// ---- profiles and the merged run configuration ---------------------------------------

enum class Profile { paper, desk, ci };

inline Profile parse_profile(const std::string& s) {
    if (s == "paper") return Profile::paper;
    if (s == "desk") return Profile::desk;
    if (s == "ci") return Profile::ci;
    throw ContractError("unknown profile: " + s + " (expected paper, desk, or ci)");
}

inline const char* profile_name(Profile p) {
    switch (p) {
        case Profile::paper: return "paper";
        case Profile::desk: return "desk";
        default: return "ci";
    }
}

struct RunConfig {
    Profile profile = Profile::desk;
    std::string workspace = "workspace";
    int threads = 1;  // accepted cap; execution is sequential for determinism
    TrainConfig train;
    AttackConfig attack;
    LossSpec loss;
    EvalConfig eval;

    void apply_profile() {
        switch (profile) {
            case Profile::paper:
                train.demos_per_task = 200;
                eval.n_demos_per_task = 150;
                break;
            case Profile::desk:
                train.demos_per_task = 200;
                eval.n_demos_per_task = 50;
                break;
            case Profile::ci:
                train.demos_per_task = 20;
                train.epochs = 40;
                train.learning_rate = 0.02;
                attack = AttackConfig::ci_profile();
                eval.n_demos_per_task = 10;
                eval.seeds = {42};
                eval.prefix_lengths = {10};
                break;
        }
    }

    // ci runs a reduced model so the whole pipeline stays fast
    ModelConfig model_config(const std::string& variant) const {
        ModelConfig cfg;
        if (variant == "large") {
            cfg = large_config();
        } else if (variant == "small") {
            cfg = small_config();
        } else {
            throw ContractError("unknown variant: " + variant + " (expected large or small)");
        }
        if (profile == Profile::ci) {
            cfg.hidden_dim = variant == "large" ? 32 : 16;
            cfg.n_heads = 2;
            cfg.n_encoder_layers = 1;
            cfg.n_controller_layers = 1;
        }
        return cfg;
    }

    // workspace layout, discovery by convention
    std::string datasets_dir() const { return workspace + "/datasets"; }
    std::string checkpoints_dir() const { return workspace + "/checkpoints"; }
    std::string prefixes_dir() const { return workspace + "/prefixes"; }
    std::string reports_dir() const { return workspace + "/reports"; }
};

// ---- config files -----------------------------------------------------------------
//
//   [train]
//   epochs = 300
//   learning_rate = 3e-3
//
// Keys are returned as "section.key"; values are raw strings.

inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ArtifactError("config line " + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArtifactError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ArtifactError("config line " + std::to_string(lineno) + ": empty key");
        out[section.empty() ? key : section + "." + key] = val;
    }
    return out;
}

namespace configdetail {

inline int to_int(const std::string& k, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ArtifactError("config: " + k + " expects an integer, got '" + v + "'");
    }
}

inline double to_double(const std::string& k, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ArtifactError("config: " + k + " expects a number, got '" + v + "'");
    }
}

}  // namespace configdetail

// File values override defaults; command-line flags override file values
// (the CLI applies flags after calling this).
inline void apply_config(RunConfig& rc, const std::map<std::string, std::string>& kv) {
    using configdetail::to_double;
    using configdetail::to_int;
    for (const auto& [k, v] : kv) {
        if (k == "profile") rc.profile = parse_profile(v);
        else if (k == "workspace") rc.workspace = v;
        else if (k == "threads") rc.threads = to_int(k, v);
        else if (k == "train.demos_per_task") rc.train.demos_per_task = to_int(k, v);
        else if (k == "train.epochs") rc.train.epochs = to_int(k, v);
        else if (k == "train.learning_rate") rc.train.learning_rate = to_double(k, v);
        else if (k == "train.batch_size") rc.train.batch_size = to_int(k, v);
        else if (k == "train.rng_seed") rc.train.rng_seed = to_int(k, v);
        else if (k == "attack.steps") rc.attack.steps = to_int(k, v);
        else if (k == "attack.batch_size") rc.attack.batch_size = to_int(k, v);
        else if (k == "attack.top_k") rc.attack.top_k = to_int(k, v);
        else if (k == "attack.momentum_weight") rc.attack.momentum_weight = to_double(k, v);
        else if (k == "attack.gd_epochs") rc.attack.gd_epochs = to_int(k, v);
        else if (k == "attack.gd_learning_rate") rc.attack.gd_learning_rate = to_double(k, v);
        else if (k == "attack.prefix_length") rc.attack.prefix_length = to_int(k, v);
        else if (k == "loss.alpha") rc.loss.alpha = to_double(k, v);
        else if (k == "loss.beta") rc.loss.beta = to_double(k, v);
        else if (k == "loss.metric")
            rc.loss.metric = v == "cosine" ? LossMetric::cosine : LossMetric::squared_l2;
        else if (k == "eval.n_demos_per_task") rc.eval.n_demos_per_task = to_int(k, v);
        else if (k == "eval.eval_seed_root") rc.eval.eval_seed_root = to_int(k, v);
        else throw ArtifactError("config: unknown key '" + k + "'");
    }
}

inline std::string describe_config(const RunConfig& rc) {
    std::ostringstream s;
    s << "profile " << profile_name(rc.profile) << "\n";
    s << "threads " << rc.threads << "\n";
    s << "train demos_per_task " << rc.train.demos_per_task << " epochs " << rc.train.epochs
      << " learning_rate " << sim::detail::fmt_double(rc.train.learning_rate) << " batch_size "
      << rc.train.batch_size << " rng_seed " << rc.train.rng_seed << "\n";
    s << "attack steps " << rc.attack.steps << " batch_size " << rc.attack.batch_size << " top_k "
      << rc.attack.top_k << " momentum_weight "
      << sim::detail::fmt_double(rc.attack.momentum_weight) << " gd_epochs " << rc.attack.gd_epochs
      << " gd_learning_rate " << sim::detail::fmt_double(rc.attack.gd_learning_rate) << "\n";
    s << "eval n_demos_per_task " << rc.eval.n_demos_per_task << " eval_seed_root "
      << rc.eval.eval_seed_root << "\n";
    return s.str();
}

}  // namespace pbench
