#pragma once

#include "types.hpp"

#include <cstdint>
#include <random>

namespace n2sid {

/// splitmix64 finalizer; used to derive independent stream seeds from a
/// master seed and a counter.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter,
                                                  std::uint64_t stream = 0) noexcept {
    return mix_seed(mix_seed(master ^ mix_seed(counter)) + stream);
}

using Rng = std::mt19937_64;

[[nodiscard]] inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix G(rows, cols);
    // fill column-major so the stream order is stable
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            G(i, j) = dist(rng);
    return G;
}

[[nodiscard]] inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed, double stddev = 1.0) {
    Rng rng(seed);
    return gaussian_matrix(rows, cols, rng, stddev);
}

} // namespace n2sid
