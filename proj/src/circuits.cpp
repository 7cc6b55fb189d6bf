#include "qxfer/circuits.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qxfer {

namespace {

int width_for_variant(int variant) { return kMinQubits + variant % (kMaxQubits - kMinQubits + 1); }

void check_variant(int variant, std::string_view what) {
    if (variant < 0 || variant >= kVariantsPerFamily) {
        throw std::invalid_argument(std::string(what) + ": variant " + std::to_string(variant) +
                                    " outside 0.." + std::to_string(kVariantsPerFamily - 1));
    }
}

std::string make_id(std::string_view prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*s-%03d", static_cast<int>(prefix.size()), prefix.data(),
                  index);
    return buf;
}

Circuit finish(std::string id, CircuitFamily family, int n_qubits, std::vector<Gate> gates) {
    Circuit c{std::move(id), family, n_qubits, std::move(gates), 0};
    c.depth = compute_depth(c);
    return c;
}

}  // namespace

std::string_view to_string(GateKind kind) {
    switch (kind) {
        case GateKind::H: return "H";
        case GateKind::X: return "X";
        case GateKind::CX: return "CX";
        case GateKind::CP: return "CP";
    }
    return "?";
}

std::string_view to_string(CircuitFamily family) {
    switch (family) {
        case CircuitFamily::Random: return "Random";
        case CircuitFamily::Bell: return "Bell";
        case CircuitFamily::GHZ: return "GHZ";
        case CircuitFamily::QFT: return "QFT";
    }
    return "?";
}

GateKind gate_kind_from_string(std::string_view name) {
    if (name == "H") return GateKind::H;
    if (name == "X") return GateKind::X;
    if (name == "CX") return GateKind::CX;
    if (name == "CP") return GateKind::CP;
    throw std::invalid_argument("unknown gate kind '" + std::string(name) + "'");
}

CircuitFamily circuit_family_from_string(std::string_view name) {
    if (name == "Random") return CircuitFamily::Random;
    if (name == "Bell") return CircuitFamily::Bell;
    if (name == "GHZ") return CircuitFamily::GHZ;
    if (name == "QFT") return CircuitFamily::QFT;
    throw std::invalid_argument("unknown circuit family '" + std::string(name) + "'");
}

void validate_gate(const Gate& gate, int n_qubits) {
    for (int i = 0; i < gate.arity(); ++i) {
        if (gate.qubits[i] < 0 || gate.qubits[i] >= n_qubits) {
            throw std::invalid_argument("gate qubit index out of range");
        }
    }
    if (gate.arity() == 2 && gate.qubits[0] == gate.qubits[1]) {
        throw std::invalid_argument("two-qubit gate on a repeated qubit");
    }
    if (!std::isfinite(gate.angle)) {
        throw std::invalid_argument("gate angle is not finite");
    }
    if (gate.kind != GateKind::CP && gate.angle != 0.0) {
        throw std::invalid_argument("only CP gates carry an angle");
    }
}

void validate_circuit(const Circuit& circuit) {
    if (circuit.n_qubits < kMinQubits || circuit.n_qubits > kMaxQubits) {
        throw std::invalid_argument("circuit '" + circuit.id + "' width outside 2..5");
    }
    for (const auto& gate : circuit.gates) {
        validate_gate(gate, circuit.n_qubits);
    }
    if (circuit.depth != compute_depth(circuit)) {
        throw std::invalid_argument("circuit '" + circuit.id + "' depth does not match its gates");
    }
}

int compute_depth(const std::vector<Gate>& gates, int n_qubits) {
    std::vector<int> frontier(static_cast<std::size_t>(n_qubits), 0);
    int depth = 0;
    for (const auto& gate : gates) {
        int layer = 0;
        for (int i = 0; i < gate.arity(); ++i) {
            layer = std::max(layer, frontier[static_cast<std::size_t>(gate.qubits[i])]);
        }
        ++layer;
        for (int i = 0; i < gate.arity(); ++i) {
            frontier[static_cast<std::size_t>(gate.qubits[i])] = layer;
        }
        depth = std::max(depth, layer);
    }
    return depth;
}

int compute_depth(const Circuit& circuit) { return compute_depth(circuit.gates, circuit.n_qubits); }

GateCounts gate_counts(const Circuit& circuit) {
    GateCounts counts;
    for (const auto& gate : circuit.gates) {
        switch (gate.kind) {
            case GateKind::CX:
            case GateKind::CP: ++counts.cx_like; break;
            case GateKind::H: ++counts.h; break;
            case GateKind::X: ++counts.x; break;
        }
    }
    return counts;
}

Circuit gen_random(int n_qubits, int depth, Rng& rng) {
    if (n_qubits < kMinQubits || n_qubits > kMaxQubits) {
        throw std::invalid_argument("gen_random: n_qubits outside 2..5");
    }
    if (depth < kMinRandomDepth || depth > kMaxRandomDepth) {
        throw std::invalid_argument("gen_random: depth outside 2..8");
    }
    std::vector<Gate> gates;
    for (int layer = 0; layer < depth; ++layer) {
        // A layer is redrawn until it extends the greedy depth by exactly one,
        // so that the computed depth equals the number of drawn layers.
        for (;;) {
            std::vector<Gate> candidate;
            std::vector<bool> busy(static_cast<std::size_t>(n_qubits), false);
            if (rng.bernoulli(0.5)) {
                const int control = static_cast<int>(rng.uniform_index(n_qubits));
                int target = static_cast<int>(rng.uniform_index(n_qubits - 1));
                if (target >= control) {
                    ++target;
                }
                candidate.push_back(Gate::cx(control, target));
                busy[static_cast<std::size_t>(control)] = true;
                busy[static_cast<std::size_t>(target)] = true;
            }
            for (int q = 0; q < n_qubits; ++q) {
                if (busy[static_cast<std::size_t>(q)]) {
                    continue;
                }
                const double u = rng.uniform();
                if (u < 0.35) {
                    candidate.push_back(Gate::h(q));
                } else if (u < 0.70) {
                    candidate.push_back(Gate::x(q));
                }
            }
            std::vector<Gate> extended = gates;
            extended.insert(extended.end(), candidate.begin(), candidate.end());
            if (compute_depth(extended, n_qubits) == layer + 1) {
                gates = std::move(extended);
                break;
            }
        }
    }
    return finish("rand", CircuitFamily::Random, n_qubits, std::move(gates));
}

Circuit gen_bell(int variant) {
    check_variant(variant, "gen_bell");
    const int n = width_for_variant(variant);
    std::vector<Gate> gates{Gate::h(0), Gate::cx(0, 1)};
    for (int q = 2; q < n; ++q) {
        if ((variant >> (q - 2)) & 1) {
            gates.push_back(Gate::x(q));
        }
    }
    return finish(make_id("bell", variant), CircuitFamily::Bell, n, std::move(gates));
}

Circuit gen_ghz(int variant) {
    check_variant(variant, "gen_ghz");
    const int n = width_for_variant(variant);
    std::vector<Gate> gates{Gate::h(0)};
    for (int q = 0; q + 1 < n; ++q) {
        gates.push_back(Gate::cx(q, q + 1));
    }
    return finish(make_id("ghz", variant), CircuitFamily::GHZ, n, std::move(gates));
}

Circuit gen_qft(int variant, Rng& rng) {
    check_variant(variant, "gen_qft");
    const int n = width_for_variant(variant);
    std::vector<Gate> gates;
    for (int q = 0; q < n; ++q) {
        if (rng.bernoulli(0.5)) {
            gates.push_back(Gate::x(q));
        }
    }
    // Textbook QFT without the final swaps, so the output is bit-reversed.
    for (int j = 0; j < n; ++j) {
        gates.push_back(Gate::h(j));
        for (int k = j + 1; k < n; ++k) {
            gates.push_back(Gate::cp(k, j, std::numbers::pi / static_cast<double>(1 << (k - j))));
        }
    }
    return finish(make_id("qft", variant), CircuitFamily::QFT, n, std::move(gates));
}

CircuitSuite generate_suite(std::uint64_t seed) {
    CircuitSuite suite;
    suite.seed = seed;
    Rng rng(derive_seed(seed, "circuit-suite"));
    for (int i = 0; i < kRandomCircuitCount; ++i) {
        const int n = rng.uniform_int(kMinQubits, kMaxQubits);
        const int depth = rng.uniform_int(kMinRandomDepth, kMaxRandomDepth);
        Circuit c = gen_random(n, depth, rng);
        c.id = make_id("rand", i);
        suite.circuits.push_back(std::move(c));
    }
    for (int v = 0; v < kVariantsPerFamily; ++v) {
        suite.circuits.push_back(gen_bell(v));
    }
    for (int v = 0; v < kVariantsPerFamily; ++v) {
        suite.circuits.push_back(gen_ghz(v));
    }
    for (int v = 0; v < kVariantsPerFamily; ++v) {
        suite.circuits.push_back(gen_qft(v, rng));
    }
    return suite;
}

std::string serialize_gates(const Circuit& circuit) {
    std::ostringstream out;
    char angle[40];
    for (const auto& gate : circuit.gates) {
        out << to_string(gate.kind);
        for (int i = 0; i < gate.arity(); ++i) {
            out << ' ' << gate.qubits[i];
        }
        if (gate.kind == GateKind::CP) {
            std::snprintf(angle, sizeof(angle), " %.17g", gate.angle);
            out << angle;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace qxfer
