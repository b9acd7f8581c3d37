#pragma once
// Counter-based seeding: every (seed, stream, index) triple maps to its own engine,
// so sampled values do not depend on thread count or iteration order.

#include <cstdint>
#include <random>

namespace oksim::rng {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

inline std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return std::mt19937_64(derive(seed, stream, index));
}

template <class Int = std::int64_t>
Int poisson(double mean, std::mt19937_64& eng)
{
    if (!(mean > 0.0))
        return 0;
    return std::poisson_distribution<Int>(mean)(eng);
}

} // namespace oksim::rng
