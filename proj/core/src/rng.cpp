#include "cbo/rng.hpp"

#include <random>

namespace cbo {

namespace {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

SplitMix64::result_type SplitMix64::operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

SplitMix64 RngStream::engine(std::uint64_t particle, std::uint64_t step, Channel channel) const noexcept {
    std::uint64_t key = mix64(seed_ + 0x243f6a8885a308d3ULL);
    key = mix64(key ^ (trial_ + 0x13198a2e03707344ULL));
    key = mix64(key ^ (particle + 0xa4093822299f31d0ULL));
    key = mix64(key ^ (step + 0x082efa98ec4e6c89ULL));
    key = mix64(key ^ (static_cast<std::uint64_t>(channel) + 0x452821e638d01377ULL));
    return SplitMix64(key);
}

void RngStream::gaussian(std::uint64_t particle, std::uint64_t step, Channel channel, double stddev,
                         std::span<double> out) const {
    auto gen = engine(particle, step, channel);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out) v = stddev * normal(gen);
}

}  // namespace cbo
