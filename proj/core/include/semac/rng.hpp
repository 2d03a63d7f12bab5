#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace semac {

// Seeded 64-bit generator. Every consumer of randomness gets its own named
// sub-stream derived from the scenario seed, so adding draws in one concern
// never shifts the sequence seen by another.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0);

    // Independent stream for (seed, label, index).
    static Rng stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    bool bernoulli(double p) { return uniform() < p; }
    // Unbiased integer in [0, n).
    std::size_t uniform_index(std::size_t n);

private:
    std::mt19937_64 engine_;
};

} // namespace semac
