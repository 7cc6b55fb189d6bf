#pragma once

#include <array>
#include <string>
#include <string_view>

#include "qxfer/rng.hpp"

namespace qxfer {

// Device-level mean calibration. Times in microseconds, errors as
// probabilities.
struct DeviceProfile {
    std::string name;
    double t1_us = 0.0;
    double t2_us = 0.0;
    double readout_error = 0.0;
    double cx_error = 0.0;

    friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

enum class DevicePreset { SourceA, TargetB };

DeviceProfile preset(DevicePreset which);

// Resolves "SourceA" / "TargetB"; throws std::invalid_argument otherwise.
DevicePreset preset_from_string(std::string_view name);

// Throws std::invalid_argument naming the violated bound.
void validate_profile(const DeviceProfile& profile);

// [t1_us, t2_us, readout_error, cx_error], unstandardized.
std::array<double, 4> calibration_features(const DeviceProfile& profile);

// Multiplies each calibration scalar by (1 + sigma * N(0,1)) and clamps the
// result back inside the profile invariants. sigma == 0 returns the profile
// unchanged without consuming randomness.
DeviceProfile jittered(const DeviceProfile& profile, double sigma, Rng& rng);

}  // namespace qxfer
