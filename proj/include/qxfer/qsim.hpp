#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qxfer/circuits.hpp"
#include "qxfer/device.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

using cplx = std::complex<double>;

// Row-major 2x2 operator.
using Mat2 = std::array<cplx, 4>;

// Basis index i has qubit q's outcome in bit q (qubit 0 is the LSB).
struct Distribution {
    std::vector<double> probs;
    int n_qubits = 0;
};

struct GateDurations {
    double t_1q_us = 0.05;
    double t_2q_us = 0.30;
};

struct NoiseChannelSet {
    double gamma1_1q = 0.0;
    double gamma_phi_1q = 0.0;
    double p_dep_1q = 0.0;
    double gamma1_2q = 0.0;
    double gamma_phi_2q = 0.0;
    double p_dep_2q = 0.0;
    double p_readout = 0.0;
};

struct CountsMap {
    // Bitstrings are MSB-left: the rightmost character is qubit 0.
    std::map<std::string, std::int64_t> counts;
    std::int64_t shots = 0;

    friend bool operator==(const CountsMap&, const CountsMap&) = default;
};

std::string bitstring(std::size_t index, int n_qubits);
std::size_t index_from_bitstring(const std::string& bits);

std::vector<Mat2> amplitude_damping_kraus(double gamma);
std::vector<Mat2> phase_damping_kraus(double gamma);
// rho -> (1 - p) rho + p I/2
std::vector<Mat2> depolarizing_kraus(double p);

class DensityMatrix {
  public:
    explicit DensityMatrix(int n_qubits);  // |0...0><0...0|

    int n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return dim_; }
    cplx at(std::size_t row, std::size_t col) const { return data_[row * dim_ + col]; }
    cplx& at(std::size_t row, std::size_t col) { return data_[row * dim_ + col]; }

    void apply_gate(const Gate& gate);
    // rho -> sum_k K rho K^dagger on one qubit.
    void apply_kraus(int qubit, std::span<const Mat2> ops);

    cplx trace() const;
    // max |rho - rho^dagger| over entries.
    double hermiticity_error() const;
    std::vector<double> diagonal() const;

  private:
    void left_multiply(int qubit, const Mat2& m, std::vector<cplx>& rho) const;
    void right_multiply_adjoint(int qubit, const Mat2& m, std::vector<cplx>& rho) const;

    int n_qubits_;
    std::size_t dim_;
    std::vector<cplx> data_;
};

Distribution ideal_distribution(const Circuit& circuit);

// Throws std::invalid_argument for profiles breaking the DeviceProfile
// invariants (in particular T2 > 2 T1, which makes T_phi negative).
NoiseChannelSet build_channels(const DeviceProfile& profile, GateDurations durations = {});

// Gate-by-gate density-matrix evolution with the per-gate channels, before
// readout confusion.
DensityMatrix noisy_density_matrix(const Circuit& circuit, const NoiseChannelSet& channels);

void apply_readout_confusion(Distribution& dist, double p);

Distribution noisy_distribution(const Circuit& circuit, const NoiseChannelSet& channels);

CountsMap sample_counts(const Distribution& dist, std::int64_t shots, Rng& rng);

Distribution counts_to_distribution(const CountsMap& counts, int n_qubits);

}  // namespace qxfer
