#include "qxfer/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qxfer/errors.hpp"

namespace qxfer {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json profile_json(const DeviceProfile& p) {
    return {{"name", p.name},
            {"t1_us", p.t1_us},
            {"t2_us", p.t2_us},
            {"readout_error", p.readout_error},
            {"cx_error", p.cx_error}};
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["suite_seed"] = c.suite_seed;
    j["shots"] = c.shots;
    j["shot_seed"] = c.shot_seed;
    j["split_seed"] = c.split_seed;
    j["train_seed"] = c.train_seed;
    j["source"] = profile_json(c.source);
    j["target"] = profile_json(c.target);
    j["gate_durations"] = {{"t_1q_us", c.durations.t_1q_us}, {"t_2q_us", c.durations.t_2q_us}};
    j["jitter_sigma"] = c.jitter_sigma;
    j["scaler_mode"] = c.scaler_mode == ScalerMode::AllScalars ? "all" : "calibration_only";
    j["train"] = {{"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay},
                  {"batch_train", c.train.batch_train},
                  {"batch_val", c.train.batch_val},
                  {"max_epochs", c.train.max_epochs},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"early_stop_tolerance", c.train.early_stop_tolerance},
                  {"plateau_factor", c.train.plateau_factor},
                  {"plateau_patience", c.train.plateau_patience},
                  {"plateau_threshold", c.train.plateau_threshold}};
    j["adapt"] = {{"ks", c.adapt.ks},
                  {"seeds", c.adapt.seeds},
                  {"replay_size", c.adapt.replay_size},
                  {"patience", c.adapt.patience},
                  {"dropout", c.adapt.dropout},
                  {"threads", c.adapt.threads}};
    return j;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) {
            throw ConfigError("unknown config key '" + where + key + "'");
        }
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

void read_profile(const nlohmann::json& j, DeviceProfile& p, const std::string& where) {
    reject_unknown(j, {"name", "t1_us", "t2_us", "readout_error", "cx_error"}, where);
    read(j, "name", p.name);
    read(j, "t1_us", p.t1_us);
    read(j, "t2_us", p.t2_us);
    read(j, "readout_error", p.readout_error);
    read(j, "cx_error", p.cx_error);
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
    RunConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        reject_unknown(j,
                       {"suite_seed", "shots", "shot_seed", "split_seed", "train_seed", "source", "target",
                        "gate_durations", "jitter_sigma", "scaler_mode", "train", "adapt"},
                       "");
        read(j, "suite_seed", c.suite_seed);
        read(j, "shots", c.shots);
        read(j, "shot_seed", c.shot_seed);
        read(j, "split_seed", c.split_seed);
        read(j, "train_seed", c.train_seed);
        if (j.contains("source")) read_profile(j["source"], c.source, "source.");
        if (j.contains("target")) read_profile(j["target"], c.target, "target.");
        if (j.contains("gate_durations")) {
            const auto& d = j["gate_durations"];
            reject_unknown(d, {"t_1q_us", "t_2q_us"}, "gate_durations.");
            read(d, "t_1q_us", c.durations.t_1q_us);
            read(d, "t_2q_us", c.durations.t_2q_us);
        }
        read(j, "jitter_sigma", c.jitter_sigma);
        if (j.contains("scaler_mode")) {
            const auto mode = j["scaler_mode"].get<std::string>();
            if (mode == "all") {
                c.scaler_mode = ScalerMode::AllScalars;
            } else if (mode == "calibration_only") {
                c.scaler_mode = ScalerMode::CalibrationOnly;
            } else {
                throw ConfigError("scaler_mode must be 'all' or 'calibration_only'");
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            reject_unknown(t,
                           {"lr", "weight_decay", "batch_train", "batch_val", "max_epochs", "early_stop_patience",
                            "early_stop_tolerance", "plateau_factor", "plateau_patience", "plateau_threshold"},
                           "train.");
            read(t, "lr", c.train.lr);
            read(t, "weight_decay", c.train.weight_decay);
            read(t, "batch_train", c.train.batch_train);
            read(t, "batch_val", c.train.batch_val);
            read(t, "max_epochs", c.train.max_epochs);
            read(t, "early_stop_patience", c.train.early_stop_patience);
            read(t, "early_stop_tolerance", c.train.early_stop_tolerance);
            read(t, "plateau_factor", c.train.plateau_factor);
            read(t, "plateau_patience", c.train.plateau_patience);
            read(t, "plateau_threshold", c.train.plateau_threshold);
        }
        if (j.contains("adapt")) {
            const auto& a = j["adapt"];
            reject_unknown(a, {"ks", "seeds", "replay_size", "patience", "dropout", "threads"}, "adapt.");
            read(a, "ks", c.adapt.ks);
            read(a, "seeds", c.adapt.seeds);
            read(a, "replay_size", c.adapt.replay_size);
            read(a, "patience", c.adapt.patience);
            read(a, "dropout", c.adapt.dropout);
            read(a, "threads", c.adapt.threads);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate_config(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

std::string config_hash(const RunConfig& cfg) {
    char hex[17];
    // The thread count cannot change results, so it stays out of the hash.
    auto j = to_json(cfg);
    j["adapt"].erase("threads");
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return hex;
}

void validate_config(const RunConfig& c) {
    try {
        validate_profile(c.source);
        validate_profile(c.target);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.source.name == c.target.name) throw ConfigError("source and target devices need distinct names");
    if (c.shots < 1) throw ConfigError("shots must be >= 1");
    if (c.jitter_sigma < 0.0) throw ConfigError("jitter_sigma must be >= 0");
    if (c.durations.t_1q_us < 0.0 || c.durations.t_2q_us < 0.0) throw ConfigError("gate durations must be >= 0");
    const auto& t = c.train;
    if (!(t.lr > 0.0) || t.weight_decay < 0.0 || t.batch_train == 0 || t.batch_val == 0 || t.max_epochs <= 0 ||
        t.early_stop_patience <= 0 || !(t.plateau_factor > 0.0 && t.plateau_factor < 1.0) ||
        t.plateau_patience <= 0) {
        throw ConfigError("train settings must be positive (plateau_factor in (0, 1))");
    }
    if (c.adapt.ks.empty() || c.adapt.seeds.empty()) throw ConfigError("adapt grid must list K values and seeds");
    for (const int k : c.adapt.ks) {
        if (k < 1) throw ConfigError("adapt K values must be >= 1");
    }
    if (c.adapt.patience <= 0) throw ConfigError("adapt patience must be positive");
}

}  // namespace qxfer
