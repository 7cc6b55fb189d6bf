#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qxfer/rng.hpp"

namespace qxfer {

inline constexpr int kMinQubits = 2;
inline constexpr int kMaxQubits = 5;
inline constexpr int kMinRandomDepth = 2;
inline constexpr int kMaxRandomDepth = 8;
inline constexpr int kVariantsPerFamily = 15;
inline constexpr int kRandomCircuitCount = 40;

enum class GateKind { H, X, CX, CP };

enum class CircuitFamily { Random, Bell, GHZ, QFT };

std::string_view to_string(GateKind kind);
std::string_view to_string(CircuitFamily family);
GateKind gate_kind_from_string(std::string_view name);
CircuitFamily circuit_family_from_string(std::string_view name);

struct Gate {
    GateKind kind = GateKind::H;
    // Only the first arity() entries are meaningful. For CX, qubits[0] is the
    // control.
    std::array<int, 2> qubits{0, 0};
    double angle = 0.0;

    int arity() const { return (kind == GateKind::CX || kind == GateKind::CP) ? 2 : 1; }

    static Gate h(int q) { return {GateKind::H, {q, 0}, 0.0}; }
    static Gate x(int q) { return {GateKind::X, {q, 0}, 0.0}; }
    static Gate cx(int control, int target) { return {GateKind::CX, {control, target}, 0.0}; }
    static Gate cp(int a, int b, double angle) { return {GateKind::CP, {a, b}, angle}; }

    friend bool operator==(const Gate&, const Gate&) = default;
};

struct Circuit {
    std::string id;
    CircuitFamily family = CircuitFamily::Random;
    int n_qubits = 0;
    std::vector<Gate> gates;
    int depth = 0;

    friend bool operator==(const Circuit&, const Circuit&) = default;
};

struct GateCounts {
    int cx_like = 0;
    int h = 0;
    int x = 0;

    friend bool operator==(const GateCounts&, const GateCounts&) = default;
};

struct CircuitSuite {
    std::vector<Circuit> circuits;
    std::uint64_t seed = 0;
};

// Throws std::invalid_argument when a gate breaks the Gate invariants for a
// circuit of the given width.
void validate_gate(const Gate& gate, int n_qubits);
void validate_circuit(const Circuit& circuit);

// Greedy moment count: each gate lands in the earliest layer where all of its
// qubits are free.
int compute_depth(const std::vector<Gate>& gates, int n_qubits);
int compute_depth(const Circuit& circuit);

GateCounts gate_counts(const Circuit& circuit);

Circuit gen_random(int n_qubits, int depth, Rng& rng);
Circuit gen_bell(int variant);
Circuit gen_ghz(int variant);
Circuit gen_qft(int variant, Rng& rng);

// 40 Random circuits, then Bell, GHZ and QFT variants 0..14.
CircuitSuite generate_suite(std::uint64_t seed);

// One line per gate, e.g. "CX 0 1" or "CP 1 2 0.78539816339744828".
std::string serialize_gates(const Circuit& circuit);

}  // namespace qxfer
