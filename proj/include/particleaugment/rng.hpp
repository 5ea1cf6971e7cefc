/*
 * Copyright 2026 ParticleAugment Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pa {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Steele, Lea, Flood / Vigna), used only to derive
// well-separated stream seeds from a root seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Purpose tags for derived RNG streams. Each (root seed, purpose, a, b)
/// tuple yields an independent stream, so enabling or reordering one
/// consumer never perturbs the draws seen by another.
enum class Stream : std::uint64_t {
    generic = 0,
    filter_init = 1,
    predict = 2,
    resample = 3,
    policy_choice = 4,
    ref_shuffle = 5,
    ref_augment = 6,
    upd_shuffle = 7,
    upd_augment = 8,
    split_tp = 9,
    split_vp = 10,
    measure = 11,
    model_init = 12,
    data_gen = 13,
    order_shuffle = 14,
};

/**
 * Seedable random source with reproducible stream splitting.
 *
 * The engine is std::mt19937_64 (bit-exact by the standard); all
 * distributions are implemented here rather than taken from <random>
 * because the standard leaves distribution algorithms implementation
 * defined and this library promises bit-identical runs for a fixed seed.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream from a root seed, a purpose tag and up
    /// to two indices (e.g. epoch and particle index).
    static Rng stream(std::uint64_t root, Stream purpose,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t s = detail::mix64(root + detail::kGolden);
        s = detail::mix64(s ^ (static_cast<std::uint64_t>(purpose) * detail::kGolden + 1));
        s = detail::mix64(s ^ (a * detail::kGolden + 2));
        s = detail::mix64(s ^ (b * detail::kGolden + 3));
        return Rng(s);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Gaussian draw via Box-Muller. Consumes exactly two engine values per
    /// call and keeps no cached spare, so the stream position is a pure
    /// function of the call count.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) *
                         std::cos(2.0 * 3.14159265358979323846 * u2);
        return mean + stddev * z;
    }

    /// One uniform is consumed regardless of p, so stream alignment does not
    /// depend on the probability value.
    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform sign in {-1, +1}.
    int sign() { return (next_u64() >> 63) ? 1 : -1; }

    /// Fisher-Yates shuffle driven by uniform_below.
    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = uniform_below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace pa
