#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qxfer/circuits.hpp"
#include "qxfer/device.hpp"
#include "qxfer/qsim.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

inline constexpr std::size_t kScalarCount = 9;
inline constexpr std::size_t kPaddedStates = 32;
inline constexpr std::size_t kFeatureDim = kScalarCount + kPaddedStates;
// Indices of the calibration scalars inside the feature vector.
inline constexpr std::size_t kFirstCalibrationIndex = 5;
inline constexpr std::size_t kLastCalibrationIndex = 8;
inline constexpr double kStdFloor = 1e-8;

using Scalars = std::array<double, kScalarCount>;
using Padded = std::array<double, kPaddedStates>;
using Features = std::array<double, kFeatureDim>;

struct Sample {
    std::string circuit_id;
    CircuitFamily family = CircuitFamily::Random;
    std::string backend;
    int n_qubits = 0;
    int depth = 0;
    std::vector<Gate> gates;
    GateCounts counts;
    DeviceProfile calibration;
    std::int64_t shots = 0;
    CountsMap noisy_counts;
    std::vector<double> ideal_probs;

    // Derived from the fields above.
    Scalars raw_scalars{};
    Padded noisy{};
    Padded y{};
    // Valid once a scaler has been applied.
    Features x{};
};

enum class ScalerMode {
    AllScalars,       // standardize indices 0..8
    CalibrationOnly,  // standardize 5..8, pass 0..4 through
};

struct Scaler {
    Scalars mean{};
    Scalars std{};
    ScalerMode mode = ScalerMode::AllScalars;
    // Backends of the samples the statistics were computed from.
    std::set<std::string> fitted_backends;
};

struct SplitSpec {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    std::uint64_t seed = 0;
};

struct DatasetOptions {
    GateDurations durations;
    // Relative per-circuit calibration jitter; 0 disables.
    double jitter_sigma = 0.0;
};

Padded pad_distribution(const Distribution& dist);
Padded pad_distribution(std::span<const double> probs, int n_qubits);

// [n_qubits, depth, cx_like, h, x, t1_us, t2_us, readout_error, cx_error]
Scalars encode_raw_scalars(const Circuit& circuit, const DeviceProfile& profile);

// Population statistics over raw_scalars; std floored at kStdFloor.
Scaler fit_scaler(std::span<const Sample> samples, ScalerMode mode = ScalerMode::AllScalars);
Features apply_scaler(const Scalars& raw, const Scaler& scaler, const Padded& noisy_padded);
void standardize(std::vector<Sample>& samples, const Scaler& scaler);

SplitSpec split_train_val(std::size_t n, std::uint64_t seed);

std::vector<Sample> select(std::span<const Sample> samples, std::span<const std::size_t> idx);

// Recomputes raw_scalars, noisy and y from the stored fields and checks every
// Sample invariant. Throws DataError.
void finalize_sample(Sample& sample);

std::vector<Sample> build_dataset(const CircuitSuite& suite, const DeviceProfile& profile,
                                  std::int64_t shots, Rng& rng, const DatasetOptions& options = {});

// One JSON object per line. `config_hash`, when non-empty, is stamped on every
// line.
std::string sample_to_json_line(const Sample& sample, const std::string& config_hash = {});
void write_jsonl(const std::filesystem::path& path, std::span<const Sample> samples,
                 const std::string& config_hash = {});

struct LoadedDataset {
    std::vector<Sample> samples;
    std::string config_hash;
};

// Throws DataError with "path:line: reason" for malformed lines or lines
// breaking an invariant.
LoadedDataset read_jsonl(const std::filesystem::path& path);

// Suite manifest written by the `gen` subcommand.
std::string suite_manifest_json(const CircuitSuite& suite, const std::string& config_hash = {});

}  // namespace qxfer
