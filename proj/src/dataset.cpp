#include "qxfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qxfer/errors.hpp"

namespace qxfer {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kSimplexTolerance = 1e-9;

ordered_json gate_to_json(const Gate& g) {
    ordered_json j;
    j["kind"] = std::string(to_string(g.kind));
    j["qubits"] = g.arity() == 2 ? ordered_json::array({g.qubits[0], g.qubits[1]})
                                 : ordered_json::array({g.qubits[0]});
    if (g.kind == GateKind::CP) {
        j["angle"] = g.angle;
    }
    return j;
}

Gate gate_from_json(const ordered_json& j) {
    Gate g;
    g.kind = gate_kind_from_string(j.at("kind").get<std::string>());
    const auto& qubits = j.at("qubits");
    if (static_cast<int>(qubits.size()) != g.arity()) {
        throw std::invalid_argument("gate qubit list has the wrong length");
    }
    for (int i = 0; i < g.arity(); ++i) {
        g.qubits[static_cast<std::size_t>(i)] = qubits.at(static_cast<std::size_t>(i)).get<int>();
    }
    if (g.kind == GateKind::CP) {
        g.angle = j.at("angle").get<double>();
    }
    return g;
}

}  // namespace

Padded pad_distribution(std::span<const double> probs, int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("pad_distribution: width " + std::to_string(n_qubits) +
                                    " exceeds 5 qubits");
    }
    if (probs.size() != (std::size_t{1} << n_qubits)) {
        throw std::invalid_argument("pad_distribution: length does not match 2^n");
    }
    Padded out{};
    std::copy(probs.begin(), probs.end(), out.begin());
    return out;
}

Padded pad_distribution(const Distribution& dist) { return pad_distribution(dist.probs, dist.n_qubits); }

Scalars encode_raw_scalars(const Circuit& circuit, const DeviceProfile& profile) {
    const GateCounts counts = gate_counts(circuit);
    const auto cal = calibration_features(profile);
    return {static_cast<double>(circuit.n_qubits),
            static_cast<double>(circuit.depth),
            static_cast<double>(counts.cx_like),
            static_cast<double>(counts.h),
            static_cast<double>(counts.x),
            cal[0],
            cal[1],
            cal[2],
            cal[3]};
}

Scaler fit_scaler(std::span<const Sample> samples, ScalerMode mode) {
    if (samples.size() < 2) {
        throw std::invalid_argument("fit_scaler: at least 2 samples required");
    }
    Scaler s;
    s.mode = mode;
    const double n = static_cast<double>(samples.size());
    // Accumulate offsets from the first sample so a constant column gets an
    // exact mean; otherwise rounding residue is blown up by the std floor.
    const Scalars& pivot = samples.front().raw_scalars;
    Scalars offset{};
    for (const auto& sample : samples) {
        s.fitted_backends.insert(sample.backend);
        for (std::size_t i = 0; i < kScalarCount; ++i) {
            offset[i] += sample.raw_scalars[i] - pivot[i];
        }
    }
    for (std::size_t i = 0; i < kScalarCount; ++i) {
        s.mean[i] = pivot[i] + offset[i] / n;
    }
    Scalars var{};
    for (const auto& sample : samples) {
        for (std::size_t i = 0; i < kScalarCount; ++i) {
            const double d = sample.raw_scalars[i] - s.mean[i];
            var[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < kScalarCount; ++i) {
        s.std[i] = std::max(std::sqrt(var[i] / n), kStdFloor);
    }
    if (mode == ScalerMode::CalibrationOnly) {
        for (std::size_t i = 0; i < kFirstCalibrationIndex; ++i) {
            s.mean[i] = 0.0;
            s.std[i] = 1.0;
        }
    }
    return s;
}

Features apply_scaler(const Scalars& raw, const Scaler& scaler, const Padded& noisy_padded) {
    Features x{};
    for (std::size_t i = 0; i < kScalarCount; ++i) {
        x[i] = (raw[i] - scaler.mean[i]) / scaler.std[i];
    }
    std::copy(noisy_padded.begin(), noisy_padded.end(), x.begin() + kScalarCount);
    return x;
}

void standardize(std::vector<Sample>& samples, const Scaler& scaler) {
    for (auto& s : samples) {
        s.x = apply_scaler(s.raw_scalars, scaler, s.noisy);
    }
}

SplitSpec split_train_val(std::size_t n, std::uint64_t seed) {
    if (n < 2) {
        throw std::invalid_argument("split_train_val: need at least 2 samples");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(derive_seed(seed, "train-val-split"));
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n)));
    SplitSpec split;
    split.seed = seed;
    split.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return split;
}

std::vector<Sample> select(std::span<const Sample> samples, std::span<const std::size_t> idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) {
        out.push_back(samples[i]);
    }
    return out;
}

void finalize_sample(Sample& s) {
    const auto fail = [&](const std::string& why) {
        throw DataError("sample '" + s.circuit_id + "': " + why);
    };
    if (s.n_qubits < kMinQubits || s.n_qubits > kMaxQubits) {
        fail("n_qubits outside 2..5");
    }
    Circuit c{s.circuit_id, s.family, s.n_qubits, s.gates, 0};
    try {
        for (const auto& g : c.gates) {
            validate_gate(g, c.n_qubits);
        }
        validate_profile(s.calibration);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    c.depth = compute_depth(c);
    if (c.depth != s.depth) {
        fail("stored depth disagrees with the gate list");
    }
    if (gate_counts(c) != s.counts) {
        fail("stored gate_counts disagree with the gate list");
    }
    const std::size_t dim = std::size_t{1} << s.n_qubits;
    if (s.ideal_probs.size() != dim) {
        fail("ideal_probs length is not 2^n_qubits");
    }
    double total = 0.0;
    for (const double p : s.ideal_probs) {
        if (!(p >= 0.0)) fail("ideal_probs has a negative or non-finite entry");
        total += p;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
        fail("ideal_probs does not sum to 1");
    }
    if (s.shots != s.noisy_counts.shots) {
        fail("shots disagrees with the counts record");
    }
    Distribution noisy;
    try {
        noisy = counts_to_distribution(s.noisy_counts, s.n_qubits);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    s.raw_scalars = encode_raw_scalars(c, s.calibration);
    s.noisy = pad_distribution(noisy);
    s.y = pad_distribution(s.ideal_probs, s.n_qubits);
}

std::vector<Sample> build_dataset(const CircuitSuite& suite, const DeviceProfile& profile,
                                  std::int64_t shots, Rng& rng, const DatasetOptions& options) {
    validate_profile(profile);
    std::vector<Sample> out;
    out.reserve(suite.circuits.size());
    for (const auto& circuit : suite.circuits) {
        const DeviceProfile cal = jittered(profile, options.jitter_sigma, rng);
        const NoiseChannelSet channels = build_channels(cal, options.durations);
        const Distribution noisy = noisy_distribution(circuit, channels);
        Sample s;
        s.circuit_id = circuit.id;
        s.family = circuit.family;
        s.backend = profile.name;
        s.n_qubits = circuit.n_qubits;
        s.depth = circuit.depth;
        s.gates = circuit.gates;
        s.counts = gate_counts(circuit);
        s.calibration = cal;
        s.shots = shots;
        s.noisy_counts = sample_counts(noisy, shots, rng);
        s.ideal_probs = ideal_distribution(circuit).probs;
        finalize_sample(s);
        out.push_back(std::move(s));
    }
    return out;
}

std::string sample_to_json_line(const Sample& s, const std::string& config_hash) {
    ordered_json j;
    j["circuit_id"] = s.circuit_id;
    j["family"] = std::string(to_string(s.family));
    j["backend"] = s.backend;
    j["n_qubits"] = s.n_qubits;
    j["depth"] = s.depth;
    j["gate_counts"] = {{"cx", s.counts.cx_like}, {"h", s.counts.h}, {"x", s.counts.x}};
    j["calibration"] = {{"t1_us", s.calibration.t1_us},
                        {"t2_us", s.calibration.t2_us},
                        {"readout_error", s.calibration.readout_error},
                        {"cx_error", s.calibration.cx_error}};
    j["shots"] = s.shots;
    ordered_json counts = ordered_json::object();
    for (const auto& [bits, n] : s.noisy_counts.counts) {
        counts[bits] = n;
    }
    j["noisy_counts"] = counts;
    j["ideal_probs"] = s.ideal_probs;
    ordered_json gates = ordered_json::array();
    for (const auto& g : s.gates) {
        gates.push_back(gate_to_json(g));
    }
    j["gates"] = gates;
    if (!config_hash.empty()) {
        j["config_hash"] = config_hash;
    }
    return j.dump();
}

void write_jsonl(const std::filesystem::path& path, std::span<const Sample> samples,
                 const std::string& config_hash) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    for (const auto& s : samples) {
        out << sample_to_json_line(s, config_hash) << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

LoadedDataset read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    LoadedDataset loaded;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        try {
            const auto j = ordered_json::parse(line);
            Sample s;
            s.circuit_id = j.at("circuit_id").get<std::string>();
            s.family = circuit_family_from_string(j.at("family").get<std::string>());
            s.backend = j.at("backend").get<std::string>();
            s.n_qubits = j.at("n_qubits").get<int>();
            s.depth = j.at("depth").get<int>();
            const auto& gc = j.at("gate_counts");
            s.counts = {gc.at("cx").get<int>(), gc.at("h").get<int>(), gc.at("x").get<int>()};
            const auto& cal = j.at("calibration");
            s.calibration = {s.backend, cal.at("t1_us").get<double>(), cal.at("t2_us").get<double>(),
                             cal.at("readout_error").get<double>(), cal.at("cx_error").get<double>()};
            s.shots = j.at("shots").get<std::int64_t>();
            s.noisy_counts.shots = s.shots;
            for (const auto& [bits, n] : j.at("noisy_counts").items()) {
                s.noisy_counts.counts.emplace(bits, n.get<std::int64_t>());
            }
            s.ideal_probs = j.at("ideal_probs").get<std::vector<double>>();
            for (const auto& g : j.at("gates")) {
                s.gates.push_back(gate_from_json(g));
            }
            const std::string hash = j.value("config_hash", std::string{});
            if (first) {
                loaded.config_hash = hash;
                first = false;
            } else if (hash != loaded.config_hash) {
                throw DataError("config_hash differs from earlier lines");
            }
            finalize_sample(s);
            loaded.samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + "parse error: " + e.what());
        } catch (const std::exception& e) {
            throw DataError(where + e.what());
        }
    }
    return loaded;
}

std::string suite_manifest_json(const CircuitSuite& suite, const std::string& config_hash) {
    ordered_json j;
    j["suite_seed"] = suite.seed;
    if (!config_hash.empty()) {
        j["config_hash"] = config_hash;
    }
    ordered_json circuits = ordered_json::array();
    for (const auto& c : suite.circuits) {
        const GateCounts gc = gate_counts(c);
        ordered_json entry;
        entry["id"] = c.id;
        entry["family"] = std::string(to_string(c.family));
        entry["n_qubits"] = c.n_qubits;
        entry["depth"] = c.depth;
        entry["gate_counts"] = {{"cx", gc.cx_like}, {"h", gc.h}, {"x", gc.x}};
        ordered_json gates = ordered_json::array();
        for (const auto& g : c.gates) {
            gates.push_back(gate_to_json(g));
        }
        entry["gates"] = gates;
        circuits.push_back(entry);
    }
    j["circuits"] = circuits;
    return j.dump(2) + "\n";
}

}  // namespace qxfer
