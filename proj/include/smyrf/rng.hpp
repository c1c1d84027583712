#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace smyrf {

// Splittable deterministic generator (SplitMix64 core). The raw engine is
// fully specified here rather than delegated to <random> distributions so
// that a given seed produces the same stream on every platform and stdlib.
// Parallel hashing rounds derive independent streams via child(seed, round).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent stream keyed by (seed, stream). Rounds use stream = round
    // index, so they can run in any order and still reproduce bit-for-bit.
    static Rng child(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53 random mantissa bits.
    double uniform();

    // Standard normal via Box-Muller; pairs are cached.
    double gaussian();

    // Uniform integer in [0, bound), bound >= 1.
    std::uint64_t uniform_index(std::uint64_t bound);

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// dim i.i.d. standard normal samples drawn from rng.
std::vector<double> gaussian_vector(Rng& rng, std::size_t dim);

}  // namespace smyrf
