#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace superedge {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream...). Every consumer of randomness
// derives its own stream from the run seed, so results do not depend on the
// order in which streams are created or consumed.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

// Well-known stream ids.
namespace streams {
inline constexpr std::uint64_t kSynthetic = 1;
inline constexpr std::uint64_t kHomography = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kCellLabels = 4;
inline constexpr std::uint64_t kInit = 5;
}  // namespace streams

}  // namespace superedge
