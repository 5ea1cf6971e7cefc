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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "particleaugment/augment.hpp"
#include "particleaugment/checkpoint.hpp"
#include "particleaugment/dataset.hpp"
#include "particleaugment/errors.hpp"
#include "particleaugment/filter.hpp"
#include "particleaugment/nn.hpp"
#include "particleaugment/rng.hpp"

namespace pa {

/**
 * Full run description: the filter searches a policy schedule online while
 * the reference model trains. Epochs are 1-based; a filter step runs at
 * the end of epoch e whenever e > warmup_epochs and (e - warmup_epochs) is
 * a multiple of filter_interval.
 */
struct PipelineConfig {
    FilterConfig filter;
    OptimizerConfig optimizer;
    ModelConfig model;
    long total_epochs = 10;
    long filter_interval = 1;    ///< i_f, epochs between filter steps
    long warmup_epochs = 1;      ///< epochs before the first filter step
    int prediction_epochs = 1;   ///< e_p, disposable-copy training epochs
    double tp_fraction = 0.5;    ///< stratified fraction for the copy's training subset
    std::size_t vp_size = 512;   ///< measurement subset size
    int magnitude = 3;           ///< shared augmentation magnitude m
    OrderMode order_mode = OrderMode::fixed;
    bool baseline_mode = false;  ///< fixed policy, no filter
    std::vector<double> baseline_policy;  ///< empty means all zeros
    double d0_epsilon = 1e-6;    ///< guard on the clean loss difference
    bool tp_fixed_once = false;  ///< draw the training subset once instead of per step
    bool vp_disjoint = false;    ///< draw measurement samples outside the training subset
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output_dir;      ///< empty disables checkpoint and log files

    void validate() const {
        filter.validate();
        optimizer.validate();
        model.validate();
        if (total_epochs < 1) throw ConfigError("pipeline.epochs: must be >= 1");
        if (filter_interval < 1) throw ConfigError("pipeline.filter_interval: must be >= 1");
        if (warmup_epochs < 0) throw ConfigError("pipeline.warmup: must be >= 0");
        if (prediction_epochs < 1) throw ConfigError("pipeline.prediction_epochs: must be >= 1");
        if (!(tp_fraction > 0.0) || !(tp_fraction < 1.0))
            throw ConfigError("pipeline.tp_fraction: must be in (0, 1)");
        if (vp_size < 1) throw ConfigError("pipeline.vp_size: must be >= 1");
        if (magnitude < 0 || magnitude > 10)
            throw ConfigError("pipeline.magnitude: must be in [0, 10]");
        if (!(d0_epsilon > 0.0)) throw ConfigError("pipeline.d0_epsilon: must be > 0");
        if (threads < 1) throw ConfigError("pipeline.threads: must be >= 1");
        if (!baseline_policy.empty()) {
            if (static_cast<int>(baseline_policy.size()) != kOpCount)
                throw ConfigError("pipeline.baseline_policy: needs one probability per op");
            for (double p : baseline_policy)
                if (!(p >= 0.0) || !(p <= 1.0))
                    throw ConfigError("pipeline.baseline_policy: probabilities must be in [0, 1]");
        }
    }
};

inline bool filter_step_scheduled(const PipelineConfig& cfg, long epoch) {
    return !cfg.baseline_mode && epoch > cfg.warmup_epochs &&
           (epoch - cfg.warmup_epochs) % cfg.filter_interval == 0;
}

inline long planned_filter_steps(const PipelineConfig& cfg) {
    if (cfg.baseline_mode || cfg.total_epochs <= cfg.warmup_epochs) return 0;
    return (cfg.total_epochs - cfg.warmup_epochs) / cfg.filter_interval;
}

/// One trajectory log record: a particle's measurement and weight update
/// at one filter step. The policy columns hold the particle state that was
/// measured (post-prediction), w_after is the normalized weight before any
/// resampling, and resampled_flag marks steps that ended in a resample.
struct TrajectoryRow {
    long epoch = 0;
    int particle_index = 0;
    double d_i = 0.0;
    double d_0 = 0.0;
    double delta = 0.0;
    double w_before = 0.0;
    double w_after = 0.0;
    int resampled_flag = 0;
    std::vector<double> policy;
};

/// Bookkeeping for one filter step, used by tests and the CLI log.
struct StepStats {
    long epoch = 0;
    std::size_t loss_passes = 0;              ///< loss-evaluation passes over the subset
    std::vector<std::size_t> pass_sizes;      ///< samples per pass, clean pass first
    std::vector<std::size_t> tp_indices;      ///< copy-training subset, ascending
    std::vector<std::size_t> vp_indices;      ///< measurement subset, ascending
    double d0 = 0.0;
    bool skipped = false;                     ///< d_0 guard fired, weights carried over
    bool degenerate = false;                  ///< all-zero update, weights reset uniform
    bool resampled = false;
};

struct RunResult {
    std::unique_ptr<BuiltinClassifier> model;
    ParticleSet particles;
    std::vector<TrajectoryRow> trajectory;
    std::vector<StepStats> steps;
    std::vector<std::string> warnings;
};

inline std::vector<std::pair<std::string, std::string>> config_echo(const PipelineConfig& cfg) {
    auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    };
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("particles", std::to_string(cfg.filter.particle_count));
    echo.emplace_back("state_dim", std::to_string(cfg.filter.state_dim));
    echo.emplace_back("sigma", num(cfg.filter.process_noise_sigma));
    echo.emplace_back("eta", num(cfg.filter.update_rate));
    echo.emplace_back("alpha", num(cfg.filter.resample_fraction));
    echo.emplace_back("sparse_init_count", std::to_string(cfg.filter.sparse_init_count));
    echo.emplace_back("init_value", num(cfg.filter.init_value));
    if (!cfg.filter.velocity.empty()) {
        std::string joined;
        for (double v : cfg.filter.velocity) {
            if (!joined.empty()) joined += ';';
            joined += num(v);
        }
        echo.emplace_back("velocity", joined);
    }
    echo.emplace_back("epochs", std::to_string(cfg.total_epochs));
    echo.emplace_back("warmup", std::to_string(cfg.warmup_epochs));
    echo.emplace_back("filter_interval", std::to_string(cfg.filter_interval));
    echo.emplace_back("prediction_epochs", std::to_string(cfg.prediction_epochs));
    echo.emplace_back("tp_fraction", num(cfg.tp_fraction));
    echo.emplace_back("vp_size", std::to_string(cfg.vp_size));
    echo.emplace_back("magnitude", std::to_string(cfg.magnitude));
    echo.emplace_back("order", cfg.order_mode == OrderMode::fixed ? "fixed" : "random");
    echo.emplace_back("baseline", cfg.baseline_mode ? "true" : "false");
    echo.emplace_back("d0_epsilon", num(cfg.d0_epsilon));
    echo.emplace_back("tp_fixed_once", cfg.tp_fixed_once ? "true" : "false");
    echo.emplace_back("vp_disjoint", cfg.vp_disjoint ? "true" : "false");
    echo.emplace_back("seed", std::to_string(cfg.seed));
    echo.emplace_back("threads", std::to_string(cfg.threads));
    echo.emplace_back("lr", num(cfg.optimizer.learning_rate));
    echo.emplace_back("momentum", num(cfg.optimizer.momentum));
    echo.emplace_back("nesterov", cfg.optimizer.nesterov ? "true" : "false");
    echo.emplace_back("weight_decay", num(cfg.optimizer.weight_decay));
    echo.emplace_back("batch_size", std::to_string(cfg.optimizer.batch_size));
    echo.emplace_back("hidden_units", std::to_string(cfg.model.hidden_units));
    echo.emplace_back("use_conv", cfg.model.use_conv ? "true" : "false");
    return echo;
}

inline void write_trajectory_csv(
    std::ostream& out, const std::vector<TrajectoryRow>& rows, int state_dim,
    const std::vector<std::pair<std::string, std::string>>& header_echo = {}) {
    for (const auto& [key, value] : header_echo) out << "# " << key << " = " << value << "\n";
    out << "epoch,particle_index,d_i,d_0,delta,w_before,w_after,resampled_flag";
    for (int j = 1; j <= state_dim; ++j) out << ",p_" << j;
    out << "\n";
    out << std::setprecision(17);
    for (const auto& row : rows) {
        out << row.epoch << ',' << row.particle_index << ',' << row.d_i << ',' << row.d_0
            << ',' << row.delta << ',' << row.w_before << ',' << row.w_after << ','
            << row.resampled_flag;
        for (double p : row.policy) out << ',' << p;
        out << "\n";
    }
    if (!out) throw IoError("trajectory write failed");
}

inline std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
    std::vector<TrajectoryRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {  // column header row
            header_seen = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 8) throw IoError("malformed trajectory row: " + line);
        TrajectoryRow row;
        row.epoch = std::stol(fields[0]);
        row.particle_index = std::stoi(fields[1]);
        row.d_i = std::stod(fields[2]);
        row.d_0 = std::stod(fields[3]);
        row.delta = std::stod(fields[4]);
        row.w_before = std::stod(fields[5]);
        row.w_after = std::stod(fields[6]);
        row.resampled_flag = std::stoi(fields[7]);
        for (std::size_t i = 8; i < fields.size(); ++i)
            row.policy.push_back(std::stod(fields[i]));
        rows.push_back(std::move(row));
    }
    return rows;
}

/**
 * Recompute every logged weight update from (d_i, d_0, w_before) alone and
 * return the largest absolute deviation from the logged w_after. Steps the
 * d_0 guard skipped must carry their weights over; an all-zero update must
 * map to uniform weights.
 */
inline double replay_max_error(const std::vector<TrajectoryRow>& rows, double eta,
                               double d0_epsilon) {
    double worst = 0.0;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].epoch == rows[i].epoch) ++j;
        const double d0 = rows[i].d_0;
        if (std::abs(d0) < d0_epsilon || d0 < 0.0) {
            for (std::size_t k = i; k < j; ++k)
                worst = std::max(worst, std::abs(rows[k].w_after - rows[k].w_before));
        } else {
            double sum = 0.0;
            std::vector<double> updated(j - i);
            for (std::size_t k = i; k < j; ++k) {
                updated[k - i] =
                    weight_multiplier(rows[k].d_i / d0, eta) * rows[k].w_before;
                sum += updated[k - i];
            }
            for (std::size_t k = i; k < j; ++k) {
                const double expect =
                    sum > 0.0 ? updated[k - i] / sum : 1.0 / static_cast<double>(j - i);
                worst = std::max(worst, std::abs(rows[k].w_after - expect));
            }
        }
        i = j;
    }
    return worst;
}

namespace detail {

struct StepSnapshot {
    std::vector<double> w_before;
    std::vector<double> w_after;
    std::vector<std::vector<double>> states;
};

inline void append_rows(std::vector<TrajectoryRow>& trajectory, long epoch,
                        const StepSnapshot& snap, const std::vector<double>& d, double d0,
                        const std::vector<double>& deltas, bool resampled) {
    for (std::size_t i = 0; i < snap.w_before.size(); ++i) {
        TrajectoryRow row;
        row.epoch = epoch;
        row.particle_index = static_cast<int>(i);
        row.d_i = d[i];
        row.d_0 = d0;
        row.delta = deltas.empty() ? 0.0 : deltas[i];
        row.w_before = snap.w_before[i];
        row.w_after = snap.w_after[i];
        row.resampled_flag = resampled ? 1 : 0;
        row.policy = snap.states[i];
        trajectory.push_back(std::move(row));
    }
}

/// Run fn(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/**
 * One filter step at the end of training epoch `epoch`:
 *   (1) particle prediction, (2) clone the reference model, (3) train the
 *   copy prediction_epochs on a stratified training subset with weighted
 *   per-sample policy sampling, (4) draw the measurement subset, (5) loss
 *   differences clean and per particle, (6) weight update behind the d_0
 *   guard, (7) conditional systematic resampling.
 * The reference model is never touched. Appends one trajectory row per
 * particle.
 */
inline StepStats filter_step(ParticleSet& particles, const BuiltinClassifier& ref,
                             const Dataset& ds, const PipelineConfig& cfg,
                             std::uint64_t seed, long epoch,
                             std::vector<TrajectoryRow>& trajectory,
                             std::vector<std::string>& warnings) {
    StepStats stats;
    stats.epoch = epoch;
    const int r = particles.size();

    {
        Rng rng = Rng::stream(seed, Stream::predict, epoch);
        predict(particles, cfg.filter, rng);
    }

    OptimizerConfig opt = cfg.optimizer;
    opt.schedule_epochs = cfg.total_epochs;

    auto upd_handle = ref.clone();
    auto& upd = static_cast<BuiltinClassifier&>(*upd_handle);

    const long tp_epoch =
        cfg.tp_fixed_once ? cfg.warmup_epochs + cfg.filter_interval : epoch;
    Rng tp_rng = Rng::stream(seed, Stream::split_tp, static_cast<std::uint64_t>(tp_epoch));
    const SplitIndices tp = stratified_split(ds, cfg.tp_fraction, tp_rng);
    {
        const Dataset d_tp = take(ds, tp.subset);
        const PolicyApplicator applicator(cfg.magnitude, cfg.order_mode);
        Rng choice = Rng::stream(seed, Stream::policy_choice, epoch, 1);
        Rng aug_rng = Rng::stream(seed, Stream::upd_augment, epoch);
        const Augmenter aug = [&](const Image& img) {
            const int i = sample_policy_index(particles, choice);
            return applicator.apply(particles.particles[static_cast<std::size_t>(i)].state,
                                    img, aug_rng);
        };
        Rng shuffle = Rng::stream(seed, Stream::upd_shuffle, epoch);
        upd.train_epochs(d_tp, aug, cfg.prediction_epochs, opt, shuffle);
    }

    Rng vp_rng = Rng::stream(seed, Stream::split_vp, epoch);
    std::vector<std::size_t> vp_indices;
    if (cfg.vp_disjoint) {
        if (tp.remainder.empty())
            throw ConfigError("disjoint measurement subset needs a nonempty remainder");
        const Dataset pool = take(ds, tp.remainder);
        for (std::size_t rel : stratified_sample(pool, cfg.vp_size, vp_rng))
            vp_indices.push_back(tp.remainder[rel]);
    } else {
        vp_indices = stratified_sample(ds, cfg.vp_size, vp_rng);
    }
    std::sort(vp_indices.begin(), vp_indices.end());
    const std::vector<LabeledSample> vp = take(ds, vp_indices).samples;
    stats.tp_indices = tp.subset;
    stats.vp_indices = vp_indices;

    const double d0 = ref.loss_sum(vp) - upd.loss_sum(vp);
    stats.d0 = d0;
    stats.pass_sizes.push_back(vp.size());

    std::vector<double> d(static_cast<std::size_t>(r), 0.0);
    detail::parallel_for(r, cfg.threads, [&](int i) {
        Rng rng = Rng::stream(seed, Stream::measure, epoch, static_cast<std::uint64_t>(i));
        const PolicyApplicator applicator(cfg.magnitude, cfg.order_mode);
        const auto& policy = particles.particles[static_cast<std::size_t>(i)].state;
        std::vector<LabeledSample> augmented;
        augmented.reserve(vp.size());
        for (const auto& s : vp)
            augmented.push_back({applicator.apply(policy, s.image, rng), s.label});
        d[static_cast<std::size_t>(i)] = ref.loss_sum(augmented) - upd.loss_sum(augmented);
    });
    for (int i = 0; i < r; ++i) stats.pass_sizes.push_back(vp.size());
    stats.loss_passes = static_cast<std::size_t>(r) + 1;

    detail::StepSnapshot snap;
    for (const auto& p : particles.particles) {
        snap.w_before.push_back(p.weight);
        snap.states.push_back(p.state);
    }

    std::vector<double> deltas;
    if (std::abs(d0) < cfg.d0_epsilon || d0 < 0.0) {
        stats.skipped = true;
        std::ostringstream msg;
        msg << "epoch " << epoch << ": weight update skipped, clean loss difference "
            << std::setprecision(17) << d0 << " is below the guard";
        warnings.push_back(msg.str());
    } else {
        deltas.resize(static_cast<std::size_t>(r));
        for (int i = 0; i < r; ++i)
            deltas[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)] / d0;
        if (update_weights(particles, deltas, cfg.filter.update_rate) ==
            UpdateStatus::degenerate) {
            stats.degenerate = true;
            uniform_weights(particles);
            warnings.push_back("epoch " + std::to_string(epoch) +
                               ": all updated weights were zero, reset to uniform");
        }
    }
    for (const auto& p : particles.particles) snap.w_after.push_back(p.weight);

    if (needs_resample(particles, cfg.filter)) {
        Rng rng = Rng::stream(seed, Stream::resample, epoch);
        resample(particles, rng);
        stats.resampled = true;
    }

    detail::append_rows(trajectory, epoch, snap, d, d0, deltas, stats.resampled);
    return stats;
}

/// Called after every epoch; `stats` is null when no filter step ran.
using EpochCallback = std::function<void(long epoch, const StepStats* stats)>;

/**
 * Full run: the reference model trains total_epochs epochs with per-sample
 * policies sampled from the current particle set (or a fixed baseline
 * policy), interleaved with filter steps on the configured schedule.
 * Passing a checkpoint resumes the run at its recorded epoch with every
 * random stream re-derived, reproducing the uninterrupted run exactly.
 */
inline RunResult run_training(const PipelineConfig& cfg, const Dataset& ds,
                              const Checkpoint* resume = nullptr,
                              const EpochCallback& progress = {}) {
    cfg.validate();
    ds.validate();
    if (cfg.filter.state_dim != kOpCount)
        throw ConfigError("filter.state_dim must equal the augmentation op count");
    const auto& first = ds.samples.front().image;
    if (first.height != cfg.model.input_height || first.width != cfg.model.input_width)
        throw ConfigError("dataset images are " + std::to_string(first.height) + "x" +
                          std::to_string(first.width) + ", model expects " +
                          std::to_string(cfg.model.input_height) + "x" +
                          std::to_string(cfg.model.input_width));
    if (ds.class_count > cfg.model.class_count)
        throw ConfigError("dataset has more classes than the model");

    const std::uint64_t seed = resume ? resume->root_seed : cfg.seed;
    RunResult res;
    std::unique_ptr<BuiltinClassifier> ref;
    long start_epoch = 1;
    if (resume) {
        if (!(resume->model_config == cfg.model))
            throw ConfigError("checkpoint architecture differs from the configured model");
        ref = std::make_unique<BuiltinClassifier>(restore_model(*resume));
        res.particles = resume->particles;
        start_epoch = resume->next_epoch;
    } else {
        Rng init = Rng::stream(seed, Stream::model_init);
        ref = std::make_unique<BuiltinClassifier>(cfg.model, init);
        Rng filter_rng = Rng::stream(seed, Stream::filter_init);
        res.particles = sparse_init(cfg.filter, filter_rng);
    }

    OptimizerConfig opt = cfg.optimizer;
    opt.schedule_epochs = cfg.total_epochs;
    const PolicyApplicator applicator(cfg.magnitude, cfg.order_mode);
    const std::vector<double> base_policy = cfg.baseline_policy.empty()
                                                ? std::vector<double>(kOpCount, 0.0)
                                                : cfg.baseline_policy;

    namespace fs = std::filesystem;
    if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);
    auto save = [&](long next_epoch, const std::string& name) {
        if (cfg.output_dir.empty()) return;
        Checkpoint ckpt;
        capture_model(ckpt, *ref);
        ckpt.particles = res.particles;
        ckpt.root_seed = seed;
        ckpt.next_epoch = next_epoch;
        save_checkpoint((fs::path(cfg.output_dir) / name).string(), ckpt);
    };

    for (long epoch = start_epoch; epoch <= cfg.total_epochs; ++epoch) {
        Rng shuffle = Rng::stream(seed, Stream::ref_shuffle, static_cast<std::uint64_t>(epoch));
        Rng aug_rng = Rng::stream(seed, Stream::ref_augment, static_cast<std::uint64_t>(epoch));
        Rng choice = Rng::stream(seed, Stream::policy_choice,
                                 static_cast<std::uint64_t>(epoch), 0);
        const Augmenter aug =
            cfg.baseline_mode
                ? Augmenter([&](const Image& img) {
                      return applicator.apply(base_policy, img, aug_rng);
                  })
                : Augmenter([&](const Image& img) {
                      const int i = sample_policy_index(res.particles, choice);
                      return applicator.apply(
                          res.particles.particles[static_cast<std::size_t>(i)].state, img,
                          aug_rng);
                  });
        ref->train_epochs(ds, aug, 1, opt, shuffle);

        const StepStats* stats = nullptr;
        if (filter_step_scheduled(cfg, epoch)) {
            res.steps.push_back(filter_step(res.particles, *ref, ds, cfg, seed, epoch,
                                            res.trajectory, res.warnings));
            stats = &res.steps.back();
            save(epoch + 1, "checkpoint_epoch_" + std::to_string(epoch) + ".bin");
        }
        if (progress) progress(epoch, stats);
    }

    save(cfg.total_epochs + 1, "checkpoint_final.bin");
    if (!cfg.output_dir.empty()) {
        std::ofstream out(fs::path(cfg.output_dir) / "trajectory.csv");
        if (!out) throw IoError("cannot write trajectory log in " + cfg.output_dir);
        write_trajectory_csv(out, res.trajectory, cfg.filter.state_dim, config_echo(cfg));
    }

    res.model = std::move(ref);
    return res;
}

/// Maps a policy vector to a relative loss difference without any neural
/// training. delta(x) = 1 + gamma * (1 - |x - target|_1 / n).
using PolicyOracle = std::function<double(std::span<const double>)>;

inline PolicyOracle make_l1_policy_oracle(std::vector<double> target, double gamma = 0.5) {
    return [target = std::move(target), gamma](std::span<const double> x) {
        if (x.size() != target.size())
            throw std::invalid_argument("policy oracle: dimension mismatch");
        double l1 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) l1 += std::abs(x[j] - target[j]);
        return 1.0 + gamma * (1.0 - l1 / static_cast<double>(x.size()));
    };
}

struct SyntheticConfig {
    FilterConfig filter;
    long steps = 200;
    std::uint64_t seed = 1;
};

struct SyntheticResult {
    ParticleSet particles;
    std::vector<TrajectoryRow> trajectory;
    std::vector<std::vector<double>> expected_states;  ///< one per step, post-resample
    std::vector<StepStats> steps;
    std::vector<std::string> warnings;
};

/**
 * Filter verification loop: predict, score every particle with the
 * supplied oracle (logged with d_0 = 1), update, conditionally resample.
 * No model, dataset or augmentation is involved.
 */
inline SyntheticResult run_synthetic(const SyntheticConfig& cfg, const PolicyOracle& oracle) {
    cfg.filter.validate();
    if (cfg.steps < 0) throw ConfigError("synthetic.steps: must be >= 0");

    SyntheticResult res;
    {
        Rng rng = Rng::stream(cfg.seed, Stream::filter_init);
        res.particles = sparse_init(cfg.filter, rng);
    }
    const int r = res.particles.size();

    for (long t = 1; t <= cfg.steps; ++t) {
        StepStats stats;
        stats.epoch = t;
        {
            Rng rng = Rng::stream(cfg.seed, Stream::predict, static_cast<std::uint64_t>(t));
            predict(res.particles, cfg.filter, rng);
        }

        detail::StepSnapshot snap;
        std::vector<double> deltas(static_cast<std::size_t>(r));
        for (int i = 0; i < r; ++i) {
            const auto& p = res.particles.particles[static_cast<std::size_t>(i)];
            snap.w_before.push_back(p.weight);
            snap.states.push_back(p.state);
            deltas[static_cast<std::size_t>(i)] = oracle(p.state);
        }

        if (update_weights(res.particles, deltas, cfg.filter.update_rate) ==
            UpdateStatus::degenerate) {
            stats.degenerate = true;
            uniform_weights(res.particles);
            res.warnings.push_back("step " + std::to_string(t) +
                                   ": all updated weights were zero, reset to uniform");
        }
        for (const auto& p : res.particles.particles) snap.w_after.push_back(p.weight);

        if (needs_resample(res.particles, cfg.filter)) {
            Rng rng = Rng::stream(cfg.seed, Stream::resample, static_cast<std::uint64_t>(t));
            resample(res.particles, rng);
            stats.resampled = true;
        }

        detail::append_rows(res.trajectory, t, snap, deltas, 1.0, deltas, stats.resampled);
        res.expected_states.push_back(expected_state(res.particles));
        res.steps.push_back(stats);
    }
    return res;
}

inline void write_expected_state_csv(std::ostream& out,
                                     const std::vector<std::vector<double>>& states,
                                     int state_dim = -1) {
    const std::size_t dim = states.empty()
                                ? (state_dim < 0 ? 0 : static_cast<std::size_t>(state_dim))
                                : states.front().size();
    out << "step";
    for (std::size_t j = 1; j <= dim; ++j) out << ",x_" << j;
    out << "\n";
    out << std::setprecision(17);
    for (std::size_t t = 0; t < states.size(); ++t) {
        out << (t + 1);
        for (double v : states[t]) out << ',' << v;
        out << "\n";
    }
}

}  // namespace pa
