#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hgr/error.hpp"
#include "hgr/rng.hpp"
#include "hgr/tensor.hpp"

namespace hgr {

// One sample: K person tracklets of T feature vectors each, with per-person
// per-timestep action labels and one group activity label.
struct Scene {
    std::string id;
    std::size_t activity = 0;
    std::vector<std::vector<Tensor>> persons;       // K x T, vectors of length D_in
    std::vector<std::vector<std::size_t>> actions;  // K x T

    std::size_t num_persons() const { return persons.size(); }
    std::size_t num_timesteps() const { return persons.empty() ? 0 : persons[0].size(); }
};

struct Dataset {
    std::size_t feature_dim = 0;
    std::size_t num_actions = 0;
    std::size_t num_activities = 0;
    std::vector<Scene> scenes;
};

struct GenConfig {
    std::size_t num_scenes = 600;
    std::size_t k_min = 3;
    std::size_t k_max = 6;
    std::size_t timesteps = 9;
    std::size_t feature_dim = 12;
    std::size_t num_actions = 5;
    std::size_t num_activities = 6;
    double noise_std = 0.3;
    // When set, paired activities share identical per-frame action multisets
    // and differ only in the temporal order of individual tracklets.
    bool confusable = true;
    std::uint64_t seed = 1;
    // Scenes are assigned round-robin to this many disjoint group keys; the
    // train/test split never separates scenes within a group.
    std::size_t num_groups = 15;
};

// Action vocabulary used by the generator.
//   0 idle, 1/2 paired roles, 3 burst, 4 side marker.
namespace gen_action {
constexpr std::size_t idle = 0;
constexpr std::size_t role_a = 1;
constexpr std::size_t role_b = 2;
constexpr std::size_t burst = 3;
constexpr std::size_t marker = 4;
}  // namespace gen_action

// Activity layout: plays {set, pass} form the confusable pair on each side;
// spike is identifiable from a single frame. The right side additionally
// designates a marker agent active at every timestep.
//   0 left_set, 1 left_pass, 2 right_set, 3 right_pass, 4 left_spike,
//   5 right_spike
inline std::string activity_name(std::size_t activity) {
    static const char* names[6] = {"left_set",  "left_pass",  "right_set",
                                   "right_pass", "left_spike", "right_spike"};
    return activity < 6 ? names[activity] : "activity_" + std::to_string(activity);
}

inline void validate(const GenConfig& cfg) {
    if (cfg.num_scenes == 0) throw ConfigError("generate: num_scenes must be positive");
    if (cfg.k_min == 0 || cfg.k_min > cfg.k_max) {
        throw ConfigError("generate: invalid person-count range [" + std::to_string(cfg.k_min) +
                          ", " + std::to_string(cfg.k_max) + "]");
    }
    if (cfg.timesteps < 2) throw ConfigError("generate: need at least 2 timesteps");
    if (cfg.feature_dim == 0) throw ConfigError("generate: feature_dim must be positive");
    if (cfg.num_activities < 2 || cfg.num_activities > 6) {
        throw ConfigError("generate: supports 2 to 6 activities, got " +
                          std::to_string(cfg.num_activities));
    }
    const std::size_t need_actions = cfg.num_activities <= 2 ? 3 : 5;
    if (cfg.num_actions < need_actions) {
        throw ConfigError("generate: " + std::to_string(cfg.num_activities) +
                          " activities require at least " + std::to_string(need_actions) +
                          " actions, got " + std::to_string(cfg.num_actions));
    }
    const std::size_t need_persons = cfg.num_activities <= 2 ? 2 : 3;
    if (cfg.k_min < need_persons) {
        throw ConfigError("generate: k_min must be at least " + std::to_string(need_persons) +
                          " for " + std::to_string(cfg.num_activities) + " activities");
    }
    if (cfg.noise_std < 0.0) throw ConfigError("generate: noise_std must be non-negative");
    if (cfg.num_groups < 2) throw ConfigError("generate: need at least 2 scene groups");
}

// Per-action prototype vectors drawn from the dataset seed before any scene
// is generated. The two role prototypes are placed close together so that,
// under feature noise, telling the roles apart from one frame is unreliable
// and temporal smoothing of a tracklet genuinely helps action recognition.
inline std::vector<Tensor> action_prototypes(const GenConfig& cfg) {
    Rng rng(cfg.seed);
    std::vector<Tensor> protos(cfg.num_actions, Tensor::vec(cfg.feature_dim));
    for (Tensor& p : protos) {
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) p[j] = rng.uniform();
    }
    if (cfg.num_actions > gen_action::role_b) {
        const double offset = 0.22 / std::sqrt(static_cast<double>(cfg.feature_dim));
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
            protos[gen_action::role_b][j] =
                protos[gen_action::role_a][j] + (rng.uniform() < 0.5 ? -offset : offset);
        }
    }
    return protos;
}

// Each scene draws an activity uniformly; the activity fixes a role pattern
// of per-person action sequences inside a burst window. The "set" and
// "pass" plays of one side place the same two role actions in the window at
// every timestep -- set holds them on fixed agents, pass crosses them at the
// window midpoint -- so no single frame's action multiset distinguishes the
// two and only the temporal order of individual tracklets does.
inline Dataset generate(const GenConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    std::vector<Tensor> protos = action_prototypes(cfg);

    Dataset ds;
    ds.feature_dim = cfg.feature_dim;
    ds.num_actions = cfg.num_actions;
    ds.num_activities = cfg.num_activities;
    ds.scenes.reserve(cfg.num_scenes);

    for (std::size_t s = 0; s < cfg.num_scenes; ++s) {
        Scene scene;
        scene.id = "v" + std::to_string(s % cfg.num_groups) + "_" + std::to_string(s);
        scene.activity = rng.below(cfg.num_activities);

        const bool is_spike = scene.activity >= 4;
        const bool is_pass = scene.activity == 1 || scene.activity == 3;
        const bool crossed = is_pass && cfg.confusable;
        const bool right_side = scene.activity == 2 || scene.activity == 3 ||
                                scene.activity == 5;

        const std::size_t k =
            cfg.k_min + rng.below(cfg.k_max - cfg.k_min + 1);
        const std::size_t t_len = cfg.timesteps;
        const std::size_t window =
            std::min<std::size_t>(std::max<std::size_t>(4, (2 * t_len) / 3), t_len);
        const std::size_t t0 = rng.below(t_len - window + 1);

        // designated agents: role pairs fill the scene (every non-marker
        // agent that can be paired takes part), the marker takes the last
        // slot of the shuffled order
        std::vector<std::size_t> order(k);
        for (std::size_t i = 0; i < k; ++i) order[i] = i;
        rng.shuffle(order);
        const std::size_t avail = k - (right_side ? 1 : 0);
        const std::size_t npairs = avail / 2;

        scene.actions.assign(k, std::vector<std::size_t>(t_len, gen_action::idle));
        for (std::size_t t = t0; t < t0 + window; ++t) {
            const bool second_half = t - t0 >= window / 2;
            if (is_spike) {
                scene.actions[order[0]][t] = gen_action::burst;
                continue;
            }
            // without the confusable pairing, "pass" swaps role_b for the
            // burst action so the plays separate frame by frame
            std::size_t role_second = gen_action::role_b;
            if (!cfg.confusable && is_pass) role_second = gen_action::burst;
            for (std::size_t pair = 0; pair < npairs; ++pair) {
                const std::size_t agent_p = order[2 * pair];
                const std::size_t agent_q = order[2 * pair + 1];
                if (crossed) {
                    scene.actions[agent_p][t] =
                        second_half ? gen_action::role_b : gen_action::role_a;
                    scene.actions[agent_q][t] =
                        second_half ? gen_action::role_a : gen_action::role_b;
                } else {
                    scene.actions[agent_p][t] = gen_action::role_a;
                    scene.actions[agent_q][t] = role_second;
                }
            }
        }
        if (right_side) {
            for (std::size_t t = 0; t < t_len; ++t)
                scene.actions[order[k - 1]][t] = gen_action::marker;
        }

        scene.persons.assign(k, std::vector<Tensor>(t_len));
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t t = 0; t < t_len; ++t) {
                Tensor x = protos[scene.actions[i][t]];
                for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
                    x[j] += rng.normal(0.0, cfg.noise_std);
                }
                scene.persons[i][t] = std::move(x);
            }
        }
        ds.scenes.push_back(std::move(scene));
    }
    return ds;
}

// Unstructured scene with uniform features and labels; shape fodder for the
// gradient-check harness.
inline Scene random_scene(std::size_t feature_dim, std::size_t k, std::size_t t_len,
                          std::size_t num_actions, std::size_t num_activities, Rng& rng,
                          const std::string& id = "probe_0") {
    Scene s;
    s.id = id;
    s.activity = rng.below(num_activities);
    s.persons.assign(k, std::vector<Tensor>(t_len));
    s.actions.assign(k, std::vector<std::size_t>(t_len, 0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t t = 0; t < t_len; ++t) {
            Tensor x = Tensor::vec(feature_dim);
            for (std::size_t j = 0; j < feature_dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
            s.persons[i][t] = std::move(x);
            s.actions[i][t] = rng.below(num_actions);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// HGRDATA text format.
//
//   HGRDATA 1 <feature_dim> <num_actions> <num_activities>
//   scene <id> <activity> <K> <T>
//   <t> <action> <f_1> ... <f_D>      (K blocks of T lines)
//
// Features are written with the shortest decimal representation that parses
// back to the identical double.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("save_dataset: cannot open " + path + " for writing");
    out << "HGRDATA 1 " << ds.feature_dim << " " << ds.num_actions << " " << ds.num_activities
        << "\n";
    for (const Scene& s : ds.scenes) {
        out << "scene " << s.id << " " << s.activity << " " << s.num_persons() << " "
            << s.num_timesteps() << "\n";
        for (std::size_t k = 0; k < s.num_persons(); ++k) {
            for (std::size_t t = 0; t < s.num_timesteps(); ++t) {
                out << t << " " << s.actions[k][t];
                const Tensor& x = s.persons[k][t];
                for (std::size_t j = 0; j < x.size(); ++j) out << " " << format_double(x[j]);
                out << "\n";
            }
        }
    }
    if (!out) throw InputError("save_dataset: write to " + path + " failed");
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no, const char* what) {
    T value{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                         std::string(s) + "'");
    }
    return value;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_dataset: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&](const char* expect) -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        if (expect) {
            throw ParseError("line " + std::to_string(line_no + 1) + ": unexpected end of file, expected " +
                             expect);
        }
        return false;
    };

    next_line("header");
    auto header = detail::split_fields(line);
    if (header.size() != 5 || header[0] != "HGRDATA") {
        throw ParseError("line 1: not an HGRDATA file");
    }
    const auto version = detail::parse_number<std::size_t>(header[1], line_no, "version");
    if (version != 1) {
        throw VersionError("unsupported HGRDATA version " + std::to_string(version) +
                           ", this reader supports version 1");
    }
    Dataset ds;
    ds.feature_dim = detail::parse_number<std::size_t>(header[2], line_no, "feature_dim");
    ds.num_actions = detail::parse_number<std::size_t>(header[3], line_no, "num_actions");
    ds.num_activities = detail::parse_number<std::size_t>(header[4], line_no, "num_activities");

    while (next_line(nullptr)) {
        auto fields = detail::split_fields(line);
        if (fields.size() != 5 || fields[0] != "scene") {
            throw ParseError("line " + std::to_string(line_no) + ": expected scene header");
        }
        Scene s;
        s.id = std::string(fields[1]);
        s.activity = detail::parse_number<std::size_t>(fields[2], line_no, "activity");
        if (s.activity >= ds.num_activities) {
            throw ParseError("line " + std::to_string(line_no) + ": activity " +
                             std::to_string(s.activity) + " out of range [0, " +
                             std::to_string(ds.num_activities) + ")");
        }
        const auto k = detail::parse_number<std::size_t>(fields[3], line_no, "person count");
        const auto t_len = detail::parse_number<std::size_t>(fields[4], line_no, "timesteps");
        if (k == 0 || t_len == 0) {
            throw ParseError("line " + std::to_string(line_no) + ": scene must have K >= 1 and T >= 1");
        }
        s.persons.assign(k, std::vector<Tensor>(t_len));
        s.actions.assign(k, std::vector<std::size_t>(t_len, 0));
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t t = 0; t < t_len; ++t) {
                next_line("tracklet line");
                auto f = detail::split_fields(line);
                if (f.size() != 2 + ds.feature_dim) {
                    throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(2 + ds.feature_dim) + " fields, got " +
                                     std::to_string(f.size()));
                }
                const auto tt = detail::parse_number<std::size_t>(f[0], line_no, "timestep");
                if (tt != t) {
                    throw ParseError("line " + std::to_string(line_no) + ": timestep " +
                                     std::to_string(tt) + " out of order, expected " +
                                     std::to_string(t));
                }
                const auto action = detail::parse_number<std::size_t>(f[1], line_no, "action");
                if (action >= ds.num_actions) {
                    throw ParseError("line " + std::to_string(line_no) + ": action " +
                                     std::to_string(action) + " out of range [0, " +
                                     std::to_string(ds.num_actions) + ")");
                }
                s.actions[i][t] = action;
                Tensor x = Tensor::vec(ds.feature_dim);
                for (std::size_t j = 0; j < ds.feature_dim; ++j) {
                    x[j] = detail::parse_number<double>(f[2 + j], line_no, "feature");
                }
                s.persons[i][t] = std::move(x);
            }
        }
        ds.scenes.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Train/test split by scene group.
// ---------------------------------------------------------------------------

// Group key: everything before the last '_' in the scene id; ids without an
// underscore form their own group.
inline std::string scene_group_key(const std::string& id) {
    auto pos = id.rfind('_');
    return pos == std::string::npos ? id : id.substr(0, pos);
}

struct SplitResult {
    Dataset train, test;
};

// Partitions whole groups so no group key appears on both sides.
inline SplitResult split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InputError("split: train_fraction must be in (0, 1)");
    }
    std::vector<std::string> groups;
    for (const Scene& s : ds.scenes) {
        std::string key = scene_group_key(s.id);
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) {
            groups.push_back(key);
        }
    }
    if (groups.size() < 2) {
        throw InputError("split: need at least 2 scene groups, found " +
                         std::to_string(groups.size()));
    }
    std::sort(groups.begin(), groups.end());
    Rng rng(seed);
    rng.shuffle(groups);

    std::size_t n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(groups.size()) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, groups.size() - 1);

    std::map<std::string, bool> in_train;
    for (std::size_t i = 0; i < groups.size(); ++i) in_train[groups[i]] = i < n_train;

    SplitResult out;
    out.train.feature_dim = out.test.feature_dim = ds.feature_dim;
    out.train.num_actions = out.test.num_actions = ds.num_actions;
    out.train.num_activities = out.test.num_activities = ds.num_activities;
    for (const Scene& s : ds.scenes) {
        (in_train[scene_group_key(s.id)] ? out.train : out.test).scenes.push_back(s);
    }
    return out;
}

}  // namespace hgr
