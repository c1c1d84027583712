#include "smyrf/rng.hpp"

#include <cmath>

#include "smyrf/error.hpp"

namespace smyrf {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(mix64(seed ^ kGolden)) {}

Rng Rng::child(std::uint64_t seed, std::uint64_t stream) {
    // Decorrelate the stream index from the seed before mixing so that
    // (seed, 0) and (seed + 1, 0) do not collide with (seed, 1).
    return Rng(mix64(seed) ^ mix64(kGolden * (stream + 1)));
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller on (0,1] x [0,1) uniforms.
    double u = 1.0 - uniform();
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double angle = 2.0 * M_PI * v;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_index: bound must be >= 1");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim) {
    std::vector<double> out(dim);
    for (auto& x : out) x = rng.gaussian();
    return out;
}

}  // namespace smyrf
