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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "particleaugment/rng.hpp"

using pa::Rng;
using pa::Stream;

TEST_CASE("identical seeds give identical sequences") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c = Rng::stream(7, Stream::predict, 3, 1);
    Rng d = Rng::stream(7, Stream::predict, 3, 1);
    for (int i = 0; i < 100; ++i) REQUIRE(c.uniform() == d.uniform());
}

TEST_CASE("stream derivation separates purposes and indices") {
    auto first = [](Rng r) { return r.next_u64(); };
    const std::uint64_t root = 123456789;
    REQUIRE(first(Rng::stream(root, Stream::predict)) !=
            first(Rng::stream(root, Stream::resample)));
    REQUIRE(first(Rng::stream(root, Stream::predict, 0)) !=
            first(Rng::stream(root, Stream::predict, 1)));
    REQUIRE(first(Rng::stream(root, Stream::measure, 5, 0)) !=
            first(Rng::stream(root, Stream::measure, 5, 1)));
    REQUIRE(first(Rng::stream(root, Stream::predict)) !=
            first(Rng::stream(root + 1, Stream::predict)));
}

TEST_CASE("uniform stays in [0,1) and has the right first moments") {
    Rng rng(2024);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean - 0.5) < 0.005);
    REQUIRE(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("normal moments match requested mean and stddev") {
    Rng rng(99);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(0.0, 0.05);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    REQUIRE(std::abs(mean) < 0.001);
    REQUIRE(std::abs(sd - 0.05) < 0.002);
}

TEST_CASE("bernoulli consumes one draw regardless of p") {
    Rng a(5), b(5);
    (void)a.bernoulli(0.0);
    (void)b.bernoulli(1.0);
    REQUIRE(a.next_u64() == b.next_u64());

    Rng c(6);
    for (int i = 0; i < 1000; ++i) REQUIRE_FALSE(c.bernoulli(0.0));
    for (int i = 0; i < 1000; ++i) REQUIRE(c.bernoulli(1.0));
}

TEST_CASE("uniform_below covers the range without bias at small n") {
    Rng rng(77);
    std::vector<int> counts(5, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.uniform_below(5)];
    for (int c : counts) {
        // 3 sigma of a binomial(n, 1/5)
        REQUIRE(std::abs(c - n / 5) < 3.0 * std::sqrt(n * 0.2 * 0.8));
    }
}

TEST_CASE("shuffle is a permutation and seed-stable") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    Rng a(11), b(11);
    a.shuffle(v.begin(), v.end());
    b.shuffle(w.begin(), w.end());
    REQUIRE(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) REQUIRE(sorted[static_cast<std::size_t>(i)] == i);
}
