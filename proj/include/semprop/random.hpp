#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace semprop::detail {

inline double uniform_unit(std::mt19937_64& rng) {  // [0,1), 53-bit
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal_unit(std::mt19937_64& rng) {  // Box-Muller, one draw per call
    const double u1 = 1.0 - uniform_unit(rng);  // (0,1]
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Fisher-Yates with an explicit bounded draw so shuffles are reproducible
// across standard libraries.
template <typename T>
inline void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace semprop::detail
