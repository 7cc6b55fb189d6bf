#include "qxfer/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qxfer {

DeviceProfile preset(DevicePreset which) {
    switch (which) {
        case DevicePreset::SourceA: return {"SourceA", 142.4, 104.1, 0.0285, 0.0328};
        case DevicePreset::TargetB: return {"TargetB", 192.8, 114.0, 0.0335, 0.0560};
    }
    throw std::invalid_argument("unknown device preset");
}

DevicePreset preset_from_string(std::string_view name) {
    if (name == "SourceA") return DevicePreset::SourceA;
    if (name == "TargetB") return DevicePreset::TargetB;
    throw std::invalid_argument("unknown device preset '" + std::string(name) + "'");
}

void validate_profile(const DeviceProfile& p) {
    const auto fail = [&](const char* what) {
        throw std::invalid_argument("device profile '" + p.name + "': " + what);
    };
    if (!std::isfinite(p.t1_us) || !std::isfinite(p.t2_us) || !std::isfinite(p.readout_error) ||
        !std::isfinite(p.cx_error)) {
        fail("non-finite calibration value");
    }
    if (!(p.t1_us > 0.0)) fail("t1_us must be > 0");
    if (!(p.t2_us > 0.0)) fail("t2_us must be > 0");
    if (p.t2_us > 2.0 * p.t1_us) fail("t2_us must be <= 2 * t1_us");
    if (p.readout_error < 0.0 || p.readout_error >= 0.5) fail("readout_error must be in [0, 0.5)");
    if (p.cx_error < 0.0 || p.cx_error >= 1.0) fail("cx_error must be in [0, 1)");
}

std::array<double, 4> calibration_features(const DeviceProfile& p) {
    return {p.t1_us, p.t2_us, p.readout_error, p.cx_error};
}

DeviceProfile jittered(const DeviceProfile& profile, double sigma, Rng& rng) {
    if (sigma < 0.0) {
        throw std::invalid_argument("jitter sigma must be >= 0");
    }
    if (sigma == 0.0) {
        return profile;
    }
    DeviceProfile out = profile;
    const auto scale = [&](double v) { return v * (1.0 + sigma * rng.normal()); };
    out.t1_us = std::max(scale(profile.t1_us), 1e-3);
    out.t2_us = std::clamp(scale(profile.t2_us), 1e-3, 2.0 * out.t1_us);
    out.readout_error = std::clamp(scale(profile.readout_error), 0.0, 0.499);
    out.cx_error = std::clamp(scale(profile.cx_error), 0.0, 0.999);
    return out;
}

}  // namespace qxfer
