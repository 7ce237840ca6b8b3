#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace cbo {

/// Independent noise sources used by the scheme. Each gets its own stream.
enum class Channel : std::uint64_t {
    Consensus = 1,  // B^1
    Memory = 2,     // B^2
    Gradient = 3,   // B^3
    Init = 4,
    DataBatch = 5,
    ParticleBatch = 6,
    Instance = 7,
};

/// SplitMix64 generator; satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

private:
    std::uint64_t state_;
};

/// Deterministic, coordinate-addressed random source.
///
/// A stream is identified by (seed, trial); draws are keyed additionally by
/// (particle, step, channel). Identical coordinates yield identical numbers no
/// matter which thread asks or in which order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t trial = 0) noexcept
        : seed_(seed), trial_(trial) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t trial() const noexcept { return trial_; }

    RngStream with_trial(std::uint64_t trial) const noexcept { return RngStream(seed_, trial); }

    SplitMix64 engine(std::uint64_t particle, std::uint64_t step, Channel channel) const noexcept;

    /// Fills `out` with i.i.d. N(0, stddev^2) samples.
    void gaussian(std::uint64_t particle, std::uint64_t step, Channel channel, double stddev,
                  std::span<double> out) const;

private:
    std::uint64_t seed_;
    std::uint64_t trial_;
};

}  // namespace cbo
