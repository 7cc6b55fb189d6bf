#include "qxfer/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qxfer {

namespace {

constexpr double kTraceTolerance = 1e-10;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw std::invalid_argument(std::string(what) + " must lie in [0, 1)");
    }
}

// The simulator accepts 1..5 qubits; the suite itself only uses 2..5.
void check_simulable(const Circuit& circuit) {
    if (circuit.n_qubits < 1 || circuit.n_qubits > kMaxQubits) {
        throw std::invalid_argument("circuit '" + circuit.id + "' width outside 1..5");
    }
    for (const auto& gate : circuit.gates) {
        validate_gate(gate, circuit.n_qubits);
    }
}

void normalize(std::vector<double>& probs) {
    double total = 0.0;
    for (double& p : probs) {
        p = std::max(p, 0.0);
        total += p;
    }
    if (!(total > 0.0)) {
        throw std::runtime_error("distribution has no probability mass");
    }
    for (double& p : probs) {
        p /= total;
    }
}

void apply_statevector_gate(std::vector<cplx>& psi, const Gate& gate) {
    const std::size_t dim = psi.size();
    switch (gate.kind) {
        case GateKind::H: {
            const std::size_t bit = std::size_t{1} << gate.qubits[0];
            const double s = std::numbers::sqrt2 / 2.0;
            for (std::size_t i = 0; i < dim; ++i) {
                if (i & bit) continue;
                const cplx a = psi[i];
                const cplx b = psi[i | bit];
                psi[i] = s * (a + b);
                psi[i | bit] = s * (a - b);
            }
            break;
        }
        case GateKind::X: {
            const std::size_t bit = std::size_t{1} << gate.qubits[0];
            for (std::size_t i = 0; i < dim; ++i) {
                if (!(i & bit)) std::swap(psi[i], psi[i | bit]);
            }
            break;
        }
        case GateKind::CX: {
            const std::size_t cbit = std::size_t{1} << gate.qubits[0];
            const std::size_t tbit = std::size_t{1} << gate.qubits[1];
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & cbit) && !(i & tbit)) std::swap(psi[i], psi[i | tbit]);
            }
            break;
        }
        case GateKind::CP: {
            const std::size_t mask = (std::size_t{1} << gate.qubits[0]) |
                                     (std::size_t{1} << gate.qubits[1]);
            const cplx phase = std::polar(1.0, gate.angle);
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & mask) == mask) psi[i] *= phase;
            }
            break;
        }
    }
}

// Index permutation applied by a CX; an involution.
std::size_t cx_image(std::size_t i, std::size_t cbit, std::size_t tbit) {
    return (i & cbit) ? (i ^ tbit) : i;
}

}  // namespace

std::string bitstring(std::size_t index, int n_qubits) {
    std::string bits(static_cast<std::size_t>(n_qubits), '0');
    for (int q = 0; q < n_qubits; ++q) {
        if ((index >> q) & 1U) {
            bits[static_cast<std::size_t>(n_qubits - 1 - q)] = '1';
        }
    }
    return bits;
}

std::size_t index_from_bitstring(const std::string& bits) {
    std::size_t index = 0;
    for (const char c : bits) {
        if (c != '0' && c != '1') {
            throw std::invalid_argument("bitstring '" + bits + "' has a non-binary character");
        }
        index = (index << 1) | static_cast<std::size_t>(c == '1');
    }
    return index;
}

std::vector<Mat2> amplitude_damping_kraus(double gamma) {
    check_probability(gamma, "amplitude damping gamma");
    return {Mat2{1.0, 0.0, 0.0, std::sqrt(1.0 - gamma)}, Mat2{0.0, std::sqrt(gamma), 0.0, 0.0}};
}

std::vector<Mat2> phase_damping_kraus(double gamma) {
    check_probability(gamma, "dephasing gamma");
    return {Mat2{1.0, 0.0, 0.0, std::sqrt(1.0 - gamma)}, Mat2{0.0, 0.0, 0.0, std::sqrt(gamma)}};
}

std::vector<Mat2> depolarizing_kraus(double p) {
    check_probability(p, "depolarizing probability");
    const double a = std::sqrt(1.0 - 0.75 * p);
    const double b = std::sqrt(0.25 * p);
    const cplx i{0.0, 1.0};
    return {Mat2{a, 0.0, 0.0, a}, Mat2{0.0, b, b, 0.0}, Mat2{0.0, -i * b, i * b, 0.0},
            Mat2{b, 0.0, 0.0, -b}};
}

DensityMatrix::DensityMatrix(int n_qubits)
    : n_qubits_(n_qubits), dim_(std::size_t{1} << n_qubits), data_(dim_ * dim_, 0.0) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("density matrix width outside 1..5");
    }
    data_[0] = 1.0;
}

void DensityMatrix::left_multiply(int qubit, const Mat2& m, std::vector<cplx>& rho) const {
    const std::size_t bit = std::size_t{1} << qubit;
    for (std::size_t r = 0; r < dim_; ++r) {
        if (r & bit) continue;
        for (std::size_t c = 0; c < dim_; ++c) {
            const cplx a = rho[r * dim_ + c];
            const cplx b = rho[(r | bit) * dim_ + c];
            rho[r * dim_ + c] = m[0] * a + m[1] * b;
            rho[(r | bit) * dim_ + c] = m[2] * a + m[3] * b;
        }
    }
}

void DensityMatrix::right_multiply_adjoint(int qubit, const Mat2& m,
                                           std::vector<cplx>& rho) const {
    const std::size_t bit = std::size_t{1} << qubit;
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = 0; c < dim_; ++c) {
            if (c & bit) continue;
            const cplx a = rho[r * dim_ + c];
            const cplx b = rho[r * dim_ + (c | bit)];
            rho[r * dim_ + c] = a * std::conj(m[0]) + b * std::conj(m[1]);
            rho[r * dim_ + (c | bit)] = a * std::conj(m[2]) + b * std::conj(m[3]);
        }
    }
}

void DensityMatrix::apply_gate(const Gate& gate) {
    validate_gate(gate, n_qubits_);
    switch (gate.kind) {
        case GateKind::H: {
            const double s = std::numbers::sqrt2 / 2.0;
            const Mat2 h{s, s, s, -s};
            left_multiply(gate.qubits[0], h, data_);
            right_multiply_adjoint(gate.qubits[0], h, data_);
            break;
        }
        case GateKind::X: {
            const Mat2 x{0.0, 1.0, 1.0, 0.0};
            left_multiply(gate.qubits[0], x, data_);
            right_multiply_adjoint(gate.qubits[0], x, data_);
            break;
        }
        case GateKind::CX: {
            const std::size_t cbit = std::size_t{1} << gate.qubits[0];
            const std::size_t tbit = std::size_t{1} << gate.qubits[1];
            std::vector<cplx> out(data_.size());
            for (std::size_t r = 0; r < dim_; ++r) {
                const std::size_t pr = cx_image(r, cbit, tbit);
                for (std::size_t c = 0; c < dim_; ++c) {
                    out[r * dim_ + c] = data_[pr * dim_ + cx_image(c, cbit, tbit)];
                }
            }
            data_ = std::move(out);
            break;
        }
        case GateKind::CP: {
            const std::size_t mask = (std::size_t{1} << gate.qubits[0]) |
                                     (std::size_t{1} << gate.qubits[1]);
            const cplx phase = std::polar(1.0, gate.angle);
            for (std::size_t r = 0; r < dim_; ++r) {
                const bool row_on = (r & mask) == mask;
                for (std::size_t c = 0; c < dim_; ++c) {
                    const bool col_on = (c & mask) == mask;
                    if (row_on && !col_on) {
                        data_[r * dim_ + c] *= phase;
                    } else if (!row_on && col_on) {
                        data_[r * dim_ + c] *= std::conj(phase);
                    }
                }
            }
            break;
        }
    }
}

void DensityMatrix::apply_kraus(int qubit, std::span<const Mat2> ops) {
    if (qubit < 0 || qubit >= n_qubits_) {
        throw std::invalid_argument("kraus qubit out of range");
    }
    std::vector<cplx> sum(data_.size(), 0.0);
    std::vector<cplx> term;
    for (const Mat2& k : ops) {
        term = data_;
        left_multiply(qubit, k, term);
        right_multiply_adjoint(qubit, k, term);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += term[i];
        }
    }
    data_ = std::move(sum);
}

cplx DensityMatrix::trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        t += at(i, i);
    }
    return t;
}

double DensityMatrix::hermiticity_error() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = r; c < dim_; ++c) {
            worst = std::max(worst, std::abs(at(r, c) - std::conj(at(c, r))));
        }
    }
    return worst;
}

std::vector<double> DensityMatrix::diagonal() const {
    std::vector<double> d(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        d[i] = at(i, i).real();
    }
    return d;
}

Distribution ideal_distribution(const Circuit& circuit) {
    check_simulable(circuit);
    const std::size_t dim = std::size_t{1} << circuit.n_qubits;
    std::vector<cplx> psi(dim, 0.0);
    psi[0] = 1.0;
    for (const auto& gate : circuit.gates) {
        apply_statevector_gate(psi, gate);
    }
    Distribution d{std::vector<double>(dim), circuit.n_qubits};
    for (std::size_t i = 0; i < dim; ++i) {
        d.probs[i] = std::norm(psi[i]);
    }
    normalize(d.probs);
    return d;
}

NoiseChannelSet build_channels(const DeviceProfile& profile, GateDurations durations) {
    validate_profile(profile);
    if (!(durations.t_1q_us >= 0.0) || !(durations.t_2q_us >= 0.0)) {
        throw std::invalid_argument("gate durations must be >= 0");
    }
    const double dephasing_rate = 1.0 / profile.t2_us - 1.0 / (2.0 * profile.t1_us);
    const auto gamma1 = [&](double t) { return -std::expm1(-t / profile.t1_us); };
    const auto gamma_phi = [&](double t) {
        return dephasing_rate > 0.0 ? -std::expm1(-t * dephasing_rate) : 0.0;
    };
    NoiseChannelSet ch;
    ch.gamma1_1q = gamma1(durations.t_1q_us);
    ch.gamma_phi_1q = gamma_phi(durations.t_1q_us);
    ch.p_dep_1q = profile.cx_error / 10.0;
    ch.gamma1_2q = gamma1(durations.t_2q_us);
    ch.gamma_phi_2q = gamma_phi(durations.t_2q_us);
    ch.p_dep_2q = profile.cx_error;
    ch.p_readout = profile.readout_error;
    return ch;
}

DensityMatrix noisy_density_matrix(const Circuit& circuit, const NoiseChannelSet& ch) {
    check_simulable(circuit);
    const auto damp_1q = amplitude_damping_kraus(ch.gamma1_1q);
    const auto phase_1q = phase_damping_kraus(ch.gamma_phi_1q);
    const auto dep_1q = depolarizing_kraus(ch.p_dep_1q);
    const auto damp_2q = amplitude_damping_kraus(ch.gamma1_2q);
    const auto phase_2q = phase_damping_kraus(ch.gamma_phi_2q);
    const auto dep_2q = depolarizing_kraus(ch.p_dep_2q);

    DensityMatrix rho(circuit.n_qubits);
    for (const auto& gate : circuit.gates) {
        rho.apply_gate(gate);
        const bool two_qubit = gate.arity() == 2;
        for (int i = 0; i < gate.arity(); ++i) {
            const int q = gate.qubits[i];
            rho.apply_kraus(q, two_qubit ? damp_2q : damp_1q);
            rho.apply_kraus(q, two_qubit ? phase_2q : phase_1q);
            rho.apply_kraus(q, two_qubit ? dep_2q : dep_1q);
        }
        if (std::abs(rho.trace() - 1.0) > kTraceTolerance) {
            throw std::runtime_error("trace drifted during simulation of '" + circuit.id + "'");
        }
    }
    return rho;
}

void apply_readout_confusion(Distribution& dist, double p) {
    if (!(p >= 0.0 && p < 0.5)) {
        throw std::invalid_argument("readout error must lie in [0, 0.5)");
    }
    if (p == 0.0) {
        return;
    }
    const std::size_t dim = dist.probs.size();
    for (int q = 0; q < dist.n_qubits; ++q) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t i = 0; i < dim; ++i) {
            if (i & bit) continue;
            const double a = dist.probs[i];
            const double b = dist.probs[i | bit];
            dist.probs[i] = (1.0 - p) * a + p * b;
            dist.probs[i | bit] = p * a + (1.0 - p) * b;
        }
    }
}

Distribution noisy_distribution(const Circuit& circuit, const NoiseChannelSet& channels) {
    const DensityMatrix rho = noisy_density_matrix(circuit, channels);
    Distribution d{rho.diagonal(), circuit.n_qubits};
    normalize(d.probs);
    apply_readout_confusion(d, channels.p_readout);
    return d;
}

CountsMap sample_counts(const Distribution& dist, std::int64_t shots, Rng& rng) {
    if (shots < 1) {
        throw std::invalid_argument("sample_counts: shots must be >= 1");
    }
    const std::size_t dim = dist.probs.size();
    std::vector<double> cdf(dim);
    double running = 0.0;
    std::size_t last_support = 0;
    for (std::size_t i = 0; i < dim; ++i) {
        if (dist.probs[i] < 0.0) {
            throw std::invalid_argument("sample_counts: negative probability");
        }
        running += dist.probs[i];
        cdf[i] = running;
        if (dist.probs[i] > 0.0) last_support = i;
    }
    if (!(running > 0.0)) {
        throw std::invalid_argument("sample_counts: distribution has no mass");
    }
    std::vector<std::int64_t> tally(dim, 0);
    for (std::int64_t s = 0; s < shots; ++s) {
        const double u = rng.uniform() * running;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t idx = it == cdf.end() ? last_support : static_cast<std::size_t>(it - cdf.begin());
        // Zero-probability outcomes share their cdf value with a predecessor and
        // are never selected by upper_bound.
        ++tally[std::min(idx, last_support)];
    }
    CountsMap out;
    out.shots = shots;
    for (std::size_t i = 0; i < dim; ++i) {
        if (tally[i] > 0) {
            out.counts.emplace(bitstring(i, dist.n_qubits), tally[i]);
        }
    }
    return out;
}

Distribution counts_to_distribution(const CountsMap& cm, int n_qubits) {
    if (cm.shots <= 0) {
        throw std::invalid_argument("counts_to_distribution: empty counts");
    }
    Distribution d{std::vector<double>(std::size_t{1} << n_qubits, 0.0), n_qubits};
    std::int64_t total = 0;
    for (const auto& [bits, count] : cm.counts) {
        if (static_cast<int>(bits.size()) != n_qubits) {
            throw std::invalid_argument("counts bitstring '" + bits + "' has the wrong width");
        }
        if (count < 0) {
            throw std::invalid_argument("negative count for '" + bits + "'");
        }
        d.probs[index_from_bitstring(bits)] = static_cast<double>(count) / static_cast<double>(cm.shots);
        total += count;
    }
    if (total != cm.shots) {
        throw std::invalid_argument("counts do not sum to the shot total");
    }
    return d;
}

}  // namespace qxfer
