#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace oasis {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hierarchical stream key: derive_seed(seed, {a, b, c}) is stable and
/// independent of any keys not on the path.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t s = mix64(root);
    for (auto k : path)
        s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
    return s;
}

namespace stream_key {
inline constexpr std::uint64_t world = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t pair_sampler = 3;
inline constexpr std::uint64_t schedule = 4;
inline constexpr std::uint64_t batch = 5;
inline constexpr std::uint64_t ber = 6;
} // namespace stream_key

} // namespace oasis
