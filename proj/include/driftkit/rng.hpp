#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace driftkit {

/// Deterministic random number generator (xoshiro256++ seeded through
/// splitmix64). All randomness in the library flows through this class so
/// that runs are bit-reproducible across platforms: the standard library's
/// distributions are implementation-defined, so uniform/normal draws are
/// generated here directly.
///
/// Streams are defined by call order. Independent substreams for parallel
/// or order-insensitive work are derived with substream(), which mixes the
/// parent seed with the child index; substream(i) of a given generator is
/// the same generator regardless of how much the parent has been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer in [0, bound). bound must be >= 1. Unbiased
    /// (rejection sampling).
    std::uint64_t uniform_int(std::uint64_t bound);

    /// Standard normal draw (Box-Muller; each call consumes exactly two
    /// uniforms, so streams depend only on the number of draws).
    double normal();

    /// Child generator with its own state, derived from this generator's
    /// seed and the index only.
    Rng substream(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_;
};

/// In-place Fisher-Yates shuffle driven by rng.uniform_int.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace driftkit
