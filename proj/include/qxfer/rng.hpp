#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace qxfer {

// Seeded random stream with portable derived distributions. std::mt19937_64 is
// bit-specified by the standard; the std:: distributions are not, so every
// draw used by the pipeline goes through the helpers below.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    bool bernoulli(double p) { return uniform() < p; }

    double normal();

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for an independent stream identified by `tag` under a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace qxfer
