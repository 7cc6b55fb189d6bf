#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/device.hpp"
#include "qxfer/qsim.hpp"
#include "qxfer/train.hpp"

namespace qxfer {

struct AdaptGrid {
    std::vector<int> ks{5, 10, 20};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t replay_size = 24;
    int patience = 12;
    bool dropout = true;
    unsigned threads = 1;
};

// Every protocol constant of the experiment. Defaults reproduce the reference
// protocol; see README for the key reference.
struct RunConfig {
    std::uint64_t suite_seed = 42;
    std::int64_t shots = 8192;
    std::uint64_t shot_seed = 42;
    std::uint64_t split_seed = 42;
    std::uint64_t train_seed = 42;
    DeviceProfile source = preset(DevicePreset::SourceA);
    DeviceProfile target = preset(DevicePreset::TargetB);
    GateDurations durations;
    double jitter_sigma = 0.0;
    ScalerMode scaler_mode = ScalerMode::AllScalars;
    TrainConfig train;
    AdaptGrid adapt;
};

// Pretty-printed JSON with every key present.
std::string config_to_json(const RunConfig& cfg);

// Missing keys keep their defaults; unknown keys and invalid values throw
// ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the canonical compact serialization.
std::string config_hash(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

}  // namespace qxfer
