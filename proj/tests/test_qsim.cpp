#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qxfer/device.hpp"
#include "qxfer/qsim.hpp"
#include "qxfer/rng.hpp"

using namespace qxfer;

namespace {

Circuit one_qubit(std::vector<Gate> gates) {
    Circuit c;
    c.id = "1q";
    c.n_qubits = 1;
    c.gates = std::move(gates);
    c.depth = static_cast<int>(c.gates.size());
    return c;
}

double kraus_completeness_error(const std::vector<Mat2>& ops) {
    // sum_k K^dagger K against the identity
    std::array<cplx, 4> s{};
    for (const auto& k : ops) {
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                for (int m = 0; m < 2; ++m) s[r * 2 + c] += std::conj(k[m * 2 + r]) * k[m * 2 + c];
            }
        }
    }
    return std::max({std::abs(s[0] - 1.0), std::abs(s[1]), std::abs(s[2]), std::abs(s[3] - 1.0)});
}

}  // namespace

TEST_CASE("bitstrings are MSB-left") {
    CHECK(bitstring(1, 3) == "001");
    CHECK(bitstring(6, 3) == "110");
    CHECK(index_from_bitstring("110") == 6);
    for (std::size_t i = 0; i < 32; ++i) CHECK(index_from_bitstring(bitstring(i, 5)) == i);
}

TEST_CASE("ideal distributions of the reference states") {
    const auto bell = ideal_distribution(gen_bell(0));
    CHECK(bell.probs == std::vector<double>{0.5, 0.0, 0.0, 0.5});
    const auto ghz = ideal_distribution(gen_ghz(1));
    REQUIRE(ghz.probs.size() == 8);
    CHECK(ghz.probs[0] == doctest::Approx(0.5));
    CHECK(ghz.probs[7] == doctest::Approx(0.5));
    Rng rng(11);
    for (int v = 0; v < 15; v += 4) {
        const auto q = ideal_distribution(gen_qft(v, rng));
        for (double p : q.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("ideal distribution agrees with the statevector oracle on the whole suite") {
    for (const auto& c : generate_suite(42).circuits) {
        const auto d = ideal_distribution(c);
        const auto ref = oracle::statevector_probs(c);
        REQUIRE(d.probs.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(d.probs[i] - ref[i]) < 1e-12);
    }
}

TEST_CASE("build_channels maps calibration to channel strengths") {
    const auto a = preset(DevicePreset::SourceA);
    const auto ch = build_channels(a, {0.05, 0.3});
    CHECK(ch.gamma1_2q == doctest::Approx(1.0 - std::exp(-0.3 / 142.4)).epsilon(1e-14));
    CHECK(ch.gamma1_1q == doctest::Approx(1.0 - std::exp(-0.05 / 142.4)).epsilon(1e-14));
    const double rate = 1.0 / 104.1 - 1.0 / (2.0 * 142.4);
    CHECK(ch.gamma_phi_2q == doctest::Approx(1.0 - std::exp(-0.3 * rate)).epsilon(1e-14));
    CHECK(ch.p_dep_2q == 0.0328);
    CHECK(ch.p_dep_1q == doctest::Approx(0.00328));
    CHECK(ch.p_readout == 0.0285);

    DeviceProfile ideal{"ideal", 1e12, 1e12, 0.0, 0.0};
    const auto z = build_channels(ideal);
    CHECK(z.gamma1_1q < 1e-12);
    CHECK(z.gamma_phi_2q < 1e-12);

    DeviceProfile bad = a;
    bad.t2_us = 3.0 * bad.t1_us;
    CHECK_THROWS_AS(build_channels(bad), std::invalid_argument);
}

TEST_CASE("Kraus sets are complete across the parameter sweep") {
    for (int i = 0; i <= 9; ++i) {
        const double g = 0.1 * i;
        CHECK(kraus_completeness_error(amplitude_damping_kraus(g)) < 1e-12);
        CHECK(kraus_completeness_error(phase_damping_kraus(g)) < 1e-12);
        CHECK(kraus_completeness_error(depolarizing_kraus(g)) < 1e-12);
    }
    CHECK_THROWS_AS(amplitude_damping_kraus(1.5), std::invalid_argument);
    CHECK_THROWS_AS(depolarizing_kraus(-0.1), std::invalid_argument);
}

TEST_CASE("hand-computed single-qubit examples") {
    NoiseChannelSet ro;
    ro.p_readout = 0.1;
    const auto a = noisy_distribution(one_qubit({Gate::x(0)}), ro);
    CHECK(a.probs[0] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(a.probs[1] == doctest::Approx(0.9).epsilon(1e-14));

    NoiseChannelSet dep;
    dep.p_dep_1q = 0.2;
    const auto b = noisy_distribution(one_qubit({Gate::x(0)}), dep);
    CHECK(std::abs(b.probs[0] - 0.1) < 1e-12);
    CHECK(std::abs(b.probs[1] - 0.9) < 1e-12);
}

TEST_CASE("single-qubit circuits with one active channel match 2x2 algebra") {
    const std::vector<std::vector<Gate>> circuits = {
        {}, {Gate::h(0)}, {Gate::x(0)}, {Gate::h(0), Gate::h(0)}, {Gate::h(0), Gate::x(0)},
        {Gate::x(0), Gate::h(0)}, {Gate::x(0), Gate::x(0)}};
    for (int channel = 0; channel < 4; ++channel) {
        for (int step = 0; step <= 9; ++step) {
            const double p = 0.1 * step;
            if (channel == 3 && p >= 0.5) continue;  // readout must stay below 0.5
            NoiseChannelSet ch;
            if (channel == 0) ch.gamma1_1q = p;
            if (channel == 1) ch.gamma_phi_1q = p;
            if (channel == 2) ch.p_dep_1q = p;
            if (channel == 3) ch.p_readout = p;
            for (const auto& gates : circuits) {
                oracle::Rho2 rho;
                for (const auto& g : gates) {
                    rho = g.kind == GateKind::H ? oracle::apply_h(rho) : oracle::apply_x(rho);
                    rho = oracle::amplitude_damp(rho, ch.gamma1_1q);
                    rho = oracle::dephase(rho, ch.gamma_phi_1q);
                    rho = oracle::depolarize(rho, ch.p_dep_1q);
                }
                const auto expect = oracle::readout(rho, ch.p_readout);
                const auto got = noisy_distribution(one_qubit(gates), ch);
                CHECK(std::abs(got.probs[0] - expect[0]) < 1e-12);
                CHECK(std::abs(got.probs[1] - expect[1]) < 1e-12);

                if (channel < 3) {
                    // off-diagonal coherence as well
                    const DensityMatrix dm = noisy_density_matrix(one_qubit(gates), ch);
                    CHECK(std::abs(dm.at(0, 1) - rho.b) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("null channels reproduce the ideal distribution on the suite") {
    const NoiseChannelSet none;
    for (const auto& c : generate_suite(42).circuits) {
        const auto ideal = ideal_distribution(c);
        const auto noisy = noisy_distribution(c, none);
        for (std::size_t i = 0; i < ideal.probs.size(); ++i) {
            CHECK(std::abs(ideal.probs[i] - noisy.probs[i]) < 1e-12);
        }
    }
}

TEST_CASE("noisy evolution preserves trace and hermiticity") {
    const auto ch = build_channels(preset(DevicePreset::TargetB));
    for (const auto& c : generate_suite(7).circuits) {
        const DensityMatrix dm = noisy_density_matrix(c, ch);
        CHECK(std::abs(dm.trace() - 1.0) < 1e-10);
        CHECK(dm.hermiticity_error() < 1e-10);
        const auto d = noisy_distribution(c, ch);
        double s = 0.0;
        for (double p : d.probs) {
            CHECK(p >= 0.0);
            s += p;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("readout confusion on two qubits factorizes") {
    Distribution d{{1.0, 0.0, 0.0, 0.0}, 2};
    apply_readout_confusion(d, 0.1);
    CHECK(d.probs[0] == doctest::Approx(0.81));
    CHECK(d.probs[1] == doctest::Approx(0.09));
    CHECK(d.probs[2] == doctest::Approx(0.09));
    CHECK(d.probs[3] == doctest::Approx(0.01));
}

TEST_CASE("sample_counts") {
    Rng rng(42);
    const auto point = sample_counts(Distribution{{1.0, 0.0}, 1}, 8192, rng);
    CHECK(point.counts.at("0") == 8192);
    CHECK(point.shots == 8192);

    const auto bell = ideal_distribution(gen_bell(0));
    Rng r2(derive_seed(42, "bell"));
    const auto counts = sample_counts(bell, 8192, r2);
    std::int64_t total = 0;
    for (const auto& [bits, n] : counts.counts) {
        CHECK(bits.size() == 2);
        total += n;
    }
    CHECK(total == 8192);
    const double bound = 4.0 * std::sqrt(0.25 / 8192.0);
    CHECK(std::abs(counts.counts.at("00") / 8192.0 - 0.5) < bound);
    CHECK(std::abs(counts.counts.at("11") / 8192.0 - 0.5) < bound);

    Rng r3(derive_seed(42, "bell"));
    CHECK(sample_counts(bell, 8192, r3) == counts);

    std::mt19937_64 gen(1);
    for (int t = 0; t < 50; ++t) {
        const auto p = oracle::random_simplex(gen, 8, 0.3);
        Rng r(static_cast<std::uint64_t>(t));
        const auto c = sample_counts(Distribution{p, 3}, 1000, r);
        std::int64_t s = 0;
        for (const auto& [bits, n] : c.counts) {
            s += n;
            CHECK(p[index_from_bitstring(bits)] > 0.0);
        }
        CHECK(s == 1000);
    }
}

TEST_CASE("counts_to_distribution") {
    CountsMap cm{{{"00", 4096}, {"11", 4096}}, 8192};
    CHECK(counts_to_distribution(cm, 2).probs == std::vector<double>{0.5, 0.0, 0.0, 0.5});
    CountsMap one{{{"1", 8192}}, 8192};
    CHECK(counts_to_distribution(one, 1).probs == std::vector<double>{0.0, 1.0});
    CountsMap empty{{}, 0};
    CHECK_THROWS(counts_to_distribution(empty, 1));

    Rng rng(4);
    const auto noisy = noisy_distribution(gen_ghz(3), build_channels(preset(DevicePreset::SourceA)));
    const auto d = counts_to_distribution(sample_counts(noisy, 8192, rng), 5);
    double s = 0.0;
    for (double p : d.probs) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
}
