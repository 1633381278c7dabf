#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sae {

using Rng = std::mt19937_64;

/// Independent stream derived from a base seed and a list of stream coordinates
/// (replicate, chain, area, ...).
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords = {}) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                     static_cast<std::uint32_t>(seed >> 32U)};
    for (auto c : coords) {
        words.push_back(static_cast<std::uint32_t>(c));
        words.push_back(static_cast<std::uint32_t>(c >> 32U) ^ 0x85ebca6bU);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng{seq};
}

} // namespace sae
