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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "particleaugment/errors.hpp"
#include "particleaugment/rng.hpp"

namespace pa {

/// One augmentation policy: a vector of per-operation application
/// probabilities in [0,1] plus its importance weight.
struct Particle {
    std::vector<double> state;
    double weight = 0.0;
};

/**
 * Static parameters of the SIR filter.
 *
 * Defaults follow the reference setup: 50 particles over 15 operation
 * probabilities, process noise 0.05, update rate 1, resample threshold
 * fraction 0.5, sparse initialization with 3 entries at 0.25.
 */
struct FilterConfig {
    int particle_count = 50;              ///< r
    int state_dim = 15;                   ///< n
    double process_noise_sigma = 0.05;    ///< sigma of the transition noise
    std::vector<double> velocity;         ///< c; empty means the zero vector
    double update_rate = 1.0;             ///< eta
    double resample_fraction = 0.5;       ///< alpha; resample when N_eff < r*alpha
    int sparse_init_count = 3;            ///< l, number of nonzero entries per particle
    double init_value = 0.25;             ///< value given to the nonzero entries
    bool orthogonal_init = false;         ///< unit-vector variant of the initializer

    double velocity_at(int j) const {
        return velocity.empty() ? 0.0 : velocity.at(static_cast<std::size_t>(j));
    }

    void validate() const {
        if (particle_count < 1) throw ConfigError("filter.particles: must be >= 1");
        if (state_dim < 1) throw ConfigError("filter.state_dim: must be >= 1");
        if (process_noise_sigma < 0.0) throw ConfigError("filter.sigma: must be >= 0");
        if (!(update_rate > 0.0)) throw ConfigError("filter.eta: must be > 0");
        if (!(resample_fraction > 0.0) || resample_fraction > 1.0)
            throw ConfigError("filter.alpha: must be in (0, 1]");
        if (sparse_init_count < 0 || sparse_init_count > state_dim)
            throw ConfigError("filter.init_count: must be in [0, state_dim]");
        if (init_value < 0.0 || init_value > 1.0)
            throw ConfigError("filter.init_value: must be in [0, 1]");
        if (!velocity.empty() && static_cast<int>(velocity.size()) != state_dim)
            throw ConfigError("filter.velocity: size must equal state_dim");
    }
};

/// The filter state: r particles plus the epoch counter.
struct ParticleSet {
    std::vector<Particle> particles;
    long epoch = 0;

    int size() const { return static_cast<int>(particles.size()); }
    int dim() const { return particles.empty() ? 0 : static_cast<int>(particles[0].state.size()); }

    double weight_sum() const {
        double s = 0.0;
        for (const auto& p : particles) s += p.weight;
        return s;
    }
};

/// Reset all weights to 1/r.
inline void uniform_weights(ParticleSet& set) {
    const double w = 1.0 / static_cast<double>(set.size());
    for (auto& p : set.particles) p.weight = w;
}

/**
 * Sparse initializer: every particle gets exactly l distinct, uniformly
 * chosen entries set to init_value, the rest zero; weights start uniform.
 *
 * With orthogonal_init the first min(n, r) particles are scaled unit
 * vectors e_1..e_n instead and only the remainder is sparse-random.
 */
inline ParticleSet sparse_init(const FilterConfig& config, Rng& rng) {
    config.validate();
    const int r = config.particle_count;
    const int n = config.state_dim;

    ParticleSet set;
    set.particles.resize(static_cast<std::size_t>(r));
    set.epoch = 0;

    std::vector<int> indices(static_cast<std::size_t>(n));
    int start = 0;
    if (config.orthogonal_init) {
        const int units = std::min(n, r);
        for (int i = 0; i < units; ++i) {
            auto& p = set.particles[static_cast<std::size_t>(i)];
            p.state.assign(static_cast<std::size_t>(n), 0.0);
            p.state[static_cast<std::size_t>(i)] = config.init_value;
        }
        start = units;
    }
    for (int i = start; i < r; ++i) {
        auto& p = set.particles[static_cast<std::size_t>(i)];
        p.state.assign(static_cast<std::size_t>(n), 0.0);
        std::iota(indices.begin(), indices.end(), 0);
        // partial Fisher-Yates: the first l slots end up a uniform draw
        // of l distinct indices
        for (int k = 0; k < config.sparse_init_count; ++k) {
            const auto j = k + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - k)));
            std::swap(indices[static_cast<std::size_t>(k)], indices[static_cast<std::size_t>(j)]);
            p.state[static_cast<std::size_t>(indices[static_cast<std::size_t>(k)])] = config.init_value;
        }
    }
    uniform_weights(set);
    return set;
}

/**
 * State transition: x <- clip(x - c + eps, 0, 1) with eps element-wise
 * i.i.d. N(0, sigma^2). Weights are untouched; the epoch advances.
 *
 * The noise draw happens even for sigma = 0 so the stream position does
 * not depend on the sigma value.
 */
inline void predict(ParticleSet& set, const FilterConfig& config, Rng& rng) {
    for (auto& p : set.particles) {
        for (int j = 0; j < static_cast<int>(p.state.size()); ++j) {
            double x = p.state[static_cast<std::size_t>(j)] - config.velocity_at(j) +
                       rng.normal(0.0, config.process_noise_sigma);
            p.state[static_cast<std::size_t>(j)] = std::clamp(x, 0.0, 1.0);
        }
    }
    ++set.epoch;
}

/// Unnormalized weight multiplier of the update rule: (tanh(delta-1)+1)^eta.
/// Maps delta = 1 to exactly 1, delta > 1 above it, delta < 1 below it;
/// range (0, 2^eta).
inline double weight_multiplier(double delta, double eta) {
    return std::pow(std::tanh(delta - 1.0) + 1.0, eta);
}

enum class UpdateStatus {
    ok,
    degenerate,  ///< every unnormalized weight was zero; weights left unchanged
};

/**
 * Measurement update: w_i <- multiplier(delta_i)^ * w_i, renormalized to
 * sum 1. A relative improvement of exactly 1 for every particle leaves
 * the weights bit-identical.
 *
 * Returns UpdateStatus::degenerate (weights untouched) when the
 * unnormalized sum vanishes, which needs every delta to be at the far
 * negative end of the tanh. The caller decides how to recover.
 */
inline UpdateStatus update_weights(ParticleSet& set, std::span<const double> deltas, double eta) {
    const int r = set.size();
    if (static_cast<int>(deltas.size()) != r)
        throw std::invalid_argument("update_weights: one delta per particle required");
    for (double d : deltas)
        if (!std::isfinite(d)) throw std::invalid_argument("update_weights: non-finite delta");

    std::vector<double> scaled(static_cast<std::size_t>(r));
    bool identity = true;
    double sum = 0.0;
    for (int i = 0; i < r; ++i) {
        const double m = weight_multiplier(deltas[static_cast<std::size_t>(i)], eta);
        identity = identity && m == 1.0;
        scaled[static_cast<std::size_t>(i)] = m * set.particles[static_cast<std::size_t>(i)].weight;
        sum += scaled[static_cast<std::size_t>(i)];
    }
    if (identity) return UpdateStatus::ok;  // normalizing an already normalized vector
    if (!(sum > 0.0) || !std::isfinite(sum)) return UpdateStatus::degenerate;

    for (int i = 0; i < r; ++i)
        set.particles[static_cast<std::size_t>(i)].weight = scaled[static_cast<std::size_t>(i)] / sum;
    return UpdateStatus::ok;
}

/// N_eff = 1 / sum w_i^2; in [1, r] for normalized weights, r iff uniform.
inline double effective_sample_size(const ParticleSet& set) {
    double s = 0.0;
    for (const auto& p : set.particles) s += p.weight * p.weight;
    return 1.0 / s;
}

/// The resampling condition: N_eff < r * alpha.
inline bool needs_resample(const ParticleSet& set, const FilterConfig& config) {
    return effective_sample_size(set) <
           static_cast<double>(set.size()) * config.resample_fraction;
}

/**
 * Systematic resampling: one uniform offset u in [0, 1/r), selection
 * points u + m/r, ancestors chosen by cumulative weight. O(r), low
 * variance, and a plain permutation under uniform weights. All output
 * weights become 1/r.
 *
 * Returns the ancestor index of each output particle.
 */
inline std::vector<int> resample(ParticleSet& set, Rng& rng) {
    const int r = set.size();
    const double u0 = rng.uniform() / static_cast<double>(r);

    std::vector<double> cumulative(static_cast<std::size_t>(r));
    double acc = 0.0;
    for (int i = 0; i < r; ++i) {
        acc += set.particles[static_cast<std::size_t>(i)].weight;
        cumulative[static_cast<std::size_t>(i)] = acc;
    }

    std::vector<int> ancestors(static_cast<std::size_t>(r));
    std::vector<Particle> next(static_cast<std::size_t>(r));
    int i = 0;
    for (int m = 0; m < r; ++m) {
        const double u = u0 + static_cast<double>(m) / static_cast<double>(r);
        while (i < r - 1 && cumulative[static_cast<std::size_t>(i)] <= u) ++i;
        ancestors[static_cast<std::size_t>(m)] = i;
        next[static_cast<std::size_t>(m)] = set.particles[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(m)].weight = 1.0 / static_cast<double>(r);
    }
    set.particles = std::move(next);
    return ancestors;
}

/// First moment of the filter distribution; logging/inspection only, the
/// training loop samples whole particles instead of aggregating.
inline std::vector<double> expected_state(const ParticleSet& set) {
    std::vector<double> mean(static_cast<std::size_t>(set.dim()), 0.0);
    for (const auto& p : set.particles)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += p.weight * p.state[j];
    return mean;
}

/// Categorical draw over particles with probabilities equal to weights.
inline int sample_policy_index(const ParticleSet& set, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    const int r = set.size();
    for (int i = 0; i < r; ++i) {
        acc += set.particles[static_cast<std::size_t>(i)].weight;
        if (u < acc) return i;
    }
    return r - 1;
}

/// CSV row format: epoch, particle_index, w, p_1..p_n.
inline void write_particles_csv(std::ostream& out, const ParticleSet& set,
                                bool header = true) {
    if (header) {
        out << "epoch,particle_index,w";
        for (int j = 1; j <= set.dim(); ++j) out << ",p_" << j;
        out << "\n";
    }
    const auto flags = out.flags();
    out << std::setprecision(17);
    for (int i = 0; i < set.size(); ++i) {
        const auto& p = set.particles[static_cast<std::size_t>(i)];
        out << set.epoch << ',' << i << ',' << p.weight;
        for (double v : p.state) out << ',' << v;
        out << "\n";
    }
    out.flags(flags);
}

}  // namespace pa
