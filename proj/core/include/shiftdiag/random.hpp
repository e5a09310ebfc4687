#pragma once

#include <cstdint>
#include <random>

namespace shiftdiag {

using Rng = std::mt19937_64;

// One step of the splitmix64 generator; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

// Independent stream for (seed, index); the same pair always yields the same
// sequence regardless of which thread draws it.
Rng stream_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace shiftdiag
