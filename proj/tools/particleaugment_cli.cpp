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

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "particleaugment/config.hpp"
#include "particleaugment/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

/// PA_LOG_LEVEL: quiet/0, info/1 (default), debug/2.
int log_level() {
    static const int level = [] {
        const char* env = std::getenv("PA_LOG_LEVEL");
        if (env == nullptr) return 1;
        const std::string v(env);
        if (v == "quiet" || v == "0") return 0;
        if (v == "debug" || v == "2") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << msg << "\n";
}

pa::OrderMode parse_order(const std::string& value) {
    if (value == "fixed") return pa::OrderMode::fixed;
    if (value == "random") return pa::OrderMode::randomized;
    throw pa::ConfigError("order: must be fixed or random, got '" + value + "'");
}

std::vector<double> parse_policy(const std::string& csv) {
    std::vector<double> policy;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            policy.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw pa::ConfigError("policy: expected a number, got '" + item + "'");
        }
    }
    if (static_cast<int>(policy.size()) != pa::kOpCount)
        throw pa::ConfigError("policy: needs " + std::to_string(pa::kOpCount) +
                              " comma-separated probabilities, got " +
                              std::to_string(policy.size()));
    for (double p : policy)
        if (!(p >= 0.0) || !(p <= 1.0))
            throw pa::ConfigError("policy: probabilities must be in [0, 1]");
    return policy;
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

/// Shared flag plumbing: config file first, then flag overrides.
struct CommonFlags {
    std::string config;
    std::string output;
    std::string order;
    std::string resume;
    std::uint64_t seed = 0;
    int threads = 1;
    long epochs = 0;
    bool baseline = false;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* output_opt = nullptr;
    CLI::Option* order_opt = nullptr;

    void attach(CLI::App& cmd, bool with_training_flags) {
        cmd.add_option("--config", config, "config file ([filter]/[optimizer]/[pipeline]/[data])");
        seed_opt = cmd.add_option("--seed", seed, "root seed for every random stream");
        output_opt = cmd.add_option("--output", output, "output directory");
        if (with_training_flags) {
            threads_opt = cmd.add_option("--threads", threads, "measurement threads");
            epochs_opt = cmd.add_option("--epochs", epochs, "total training epochs");
            order_opt = cmd.add_option("--order", order, "op application order")
                            ->check(CLI::IsMember({"fixed", "random"}));
            cmd.add_option("--resume", resume, "checkpoint to resume from");
            cmd.add_flag("--baseline", baseline, "fixed-policy mode, no filter steps");
        }
    }

    pa::RunManifest resolve() const {
        pa::RunManifest m;
        if (!config.empty()) m = pa::load_config_file(config);
        if (seed_opt != nullptr && seed_opt->count() > 0) m.pipeline.seed = seed;
        if (threads_opt != nullptr && threads_opt->count() > 0) m.pipeline.threads = threads;
        if (epochs_opt != nullptr && epochs_opt->count() > 0) m.pipeline.total_epochs = epochs;
        if (output_opt != nullptr && output_opt->count() > 0) m.pipeline.output_dir = output;
        if (order_opt != nullptr && order_opt->count() > 0)
            m.pipeline.order_mode = parse_order(order);
        if (baseline) m.pipeline.baseline_mode = true;
        if (m.pipeline.output_dir.empty()) m.pipeline.output_dir = "out";
        return m;
    }
};

pa::Dataset load_eval_dataset(const pa::RunManifest& m) {
    if (!m.data.val_path.empty()) {
        if (m.data.kind == "cifar") return pa::load_cifar_binary(m.data.val_path);
        return pa::load_png_manifest(m.data.val_path);
    }
    if (m.data.kind == "toy") {
        const std::size_t count =
            std::max<std::size_t>(static_cast<std::size_t>(m.data.toy_classes),
                                  m.data.toy_count / 5);
        return pa::make_toy_dataset(count, m.data.image_height, m.data.image_width,
                                    m.data.toy_classes, m.data.toy_seed + 1);
    }
    return {};
}

int cmd_train(const CommonFlags& flags) {
    pa::RunManifest m = flags.resolve();
    const auto t0 = std::chrono::steady_clock::now();
    const pa::Dataset ds = pa::load_dataset(m);

    for (const auto& [key, value] : pa::manifest_echo(m))
        log_info("# " + key + " = " + value);

    pa::Checkpoint ckpt;
    const pa::Checkpoint* resume = nullptr;
    if (!flags.resume.empty()) {
        ckpt = pa::load_checkpoint(flags.resume);
        resume = &ckpt;
        log_info("resuming at epoch " + std::to_string(ckpt.next_epoch) + " from " +
                 flags.resume);
    }

    const pa::EpochCallback progress = [&](long epoch, const pa::StepStats* stats) {
        std::ostringstream msg;
        msg << "epoch " << epoch << "/" << m.pipeline.total_epochs;
        if (stats != nullptr) {
            msg << "  filter step: d0 = " << format_double(stats->d0);
            if (stats->skipped) msg << " (update skipped)";
            if (stats->degenerate) msg << " (weights reset)";
            if (stats->resampled) msg << ", resampled";
        }
        log_debug(msg.str());
    };

    const pa::RunResult res = pa::run_training(m.pipeline, ds, resume, progress);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (const auto& warning : res.warnings) log_info("warning: " + warning);

    std::cout << "epochs: " << res.model->epochs_trained() << "\n";
    std::cout << "filter steps: " << res.steps.size() << "\n";
    if (!res.particles.particles.empty() && !m.pipeline.baseline_mode) {
        std::cout << "expected policy:";
        for (double v : pa::expected_state(res.particles))
            std::cout << ' ' << format_double(v);
        std::cout << "\n";
    }
    std::cout << "train accuracy: " << format_double(pa::accuracy(*res.model, ds)) << "\n";
    const pa::Dataset val = load_eval_dataset(m);
    if (!val.samples.empty())
        std::cout << "val accuracy: " << format_double(pa::accuracy(*res.model, val)) << "\n";
    std::cout << "wall time: " << format_double(wall) << " s\n";
    std::cout << "outputs: " << m.pipeline.output_dir << "\n";
    return 0;
}

int cmd_filter_sim(const CommonFlags& flags, long steps, const CLI::Option* steps_opt,
                   const std::string& target_csv, double gamma) {
    pa::RunManifest m = flags.resolve();
    pa::SyntheticConfig cfg;
    cfg.filter = m.pipeline.filter;
    cfg.seed = m.pipeline.seed;
    if (steps_opt->count() > 0) cfg.steps = steps;

    std::vector<double> target(static_cast<std::size_t>(cfg.filter.state_dim), 0.5);
    if (!target_csv.empty()) {
        target.clear();
        std::stringstream ss(target_csv);
        std::string item;
        while (std::getline(ss, item, ',')) target.push_back(std::stod(item));
        if (target.size() != static_cast<std::size_t>(cfg.filter.state_dim))
            throw pa::ConfigError("target: needs one value per state dimension");
    }

    const pa::SyntheticResult res =
        pa::run_synthetic(cfg, pa::make_l1_policy_oracle(target, gamma));
    for (const auto& warning : res.warnings) log_info("warning: " + warning);

    fs::create_directories(m.pipeline.output_dir);
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("particles", std::to_string(cfg.filter.particle_count));
    echo.emplace_back("state_dim", std::to_string(cfg.filter.state_dim));
    echo.emplace_back("sigma", format_double(cfg.filter.process_noise_sigma));
    echo.emplace_back("eta", format_double(cfg.filter.update_rate));
    echo.emplace_back("alpha", format_double(cfg.filter.resample_fraction));
    echo.emplace_back("steps", std::to_string(cfg.steps));
    echo.emplace_back("seed", std::to_string(cfg.seed));
    echo.emplace_back("gamma", format_double(gamma));

    {
        std::ofstream out(fs::path(m.pipeline.output_dir) / "expected_state.csv");
        if (!out) throw pa::IoError("cannot write in " + m.pipeline.output_dir);
        for (const auto& [key, value] : echo) out << "# " << key << " = " << value << "\n";
        pa::write_expected_state_csv(out, res.expected_states, cfg.filter.state_dim);
    }
    {
        std::ofstream out(fs::path(m.pipeline.output_dir) / "trajectory.csv");
        if (!out) throw pa::IoError("cannot write in " + m.pipeline.output_dir);
        pa::write_trajectory_csv(out, res.trajectory, cfg.filter.state_dim, echo);
    }

    std::cout << "steps: " << res.expected_states.size() << "\n";
    if (!res.expected_states.empty()) {
        double l1 = 0.0;
        for (std::size_t j = 0; j < target.size(); ++j)
            l1 += std::abs(res.expected_states.back()[j] - target[j]);
        std::cout << "final target distance: " << format_double(l1) << "\n";
    }
    std::size_t resampled = 0;
    for (const auto& s : res.steps) resampled += s.resampled ? 1u : 0u;
    std::cout << "resampled steps: " << resampled << "\n";
    std::cout << "outputs: " << m.pipeline.output_dir << "\n";
    return 0;
}

int cmd_augment(const std::string& manifest, const std::string& output,
                const std::string& policy_csv, int magnitude, const std::string& order,
                std::uint64_t seed) {
    const std::vector<double> policy = policy_csv.empty()
                                           ? std::vector<double>(pa::kOpCount, 0.0)
                                           : parse_policy(policy_csv);
    const pa::PolicyApplicator applicator(magnitude, parse_order(order));
    const auto rows = pa::read_manifest_rows(manifest);
    const fs::path base = fs::path(manifest).parent_path();
    fs::create_directories(output);

    pa::Rng rng = pa::Rng::stream(seed, pa::Stream::ref_augment);
    std::ofstream out_manifest(fs::path(output) / "manifest.csv");
    if (!out_manifest) throw pa::IoError("cannot write in " + output);
    out_manifest << "path,label\n";
    for (const auto& row : rows) {
        const fs::path src = base / row.path;
        const pa::Image img = pa::read_png(src.string());
        const pa::Image augmented = applicator.apply(policy, img, rng);
        const std::string name = src.filename().string();
        pa::write_png((fs::path(output) / name).string(), augmented);
        out_manifest << name << "," << row.label << "\n";
    }
    std::cout << "augmented " << rows.size() << " images into " << output << "\n";
    return 0;
}

int cmd_split(const std::string& manifest, double fraction, std::uint64_t seed,
              const std::string& output) {
    const auto rows = pa::read_manifest_rows(manifest);
    const pa::Dataset ds = pa::load_png_manifest(manifest);
    pa::Rng rng = pa::Rng::stream(seed, pa::Stream::split_tp);
    const pa::SplitIndices split = pa::stratified_split(ds, fraction, rng);

    fs::create_directories(output);
    const fs::path base = fs::path(manifest).parent_path();
    auto write_list = [&](const std::string& name, const std::vector<std::size_t>& indices) {
        std::ofstream out(fs::path(output) / name);
        if (!out) throw pa::IoError("cannot write in " + output);
        out << "path,label\n";
        for (std::size_t i : indices)
            out << fs::absolute(base / rows[i].path).lexically_normal().string() << ","
                << rows[i].label << "\n";
    };
    write_list("subset.csv", split.subset);
    write_list("remainder.csv", split.remainder);
    std::cout << "subset: " << split.subset.size() << " samples\n";
    std::cout << "remainder: " << split.remainder.size() << " samples\n";
    std::cout << "outputs: " << output << "\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    const pa::Checkpoint ckpt = pa::load_checkpoint(path);
    std::cout << "# checkpoint = " << path << "\n";
    std::cout << "# seed = " << ckpt.root_seed << "\n";
    std::cout << "# next_epoch = " << ckpt.next_epoch << "\n";
    std::cout << "# epochs_trained = " << ckpt.epochs_trained << "\n";
    std::cout << "# parameters = " << ckpt.parameters.size() << "\n";
    std::cout << "# model = " << ckpt.model_config.input_height << "x"
              << ckpt.model_config.input_width << ", " << ckpt.model_config.class_count
              << " classes, hidden " << ckpt.model_config.hidden_units;
    if (ckpt.model_config.use_conv)
        std::cout << ", conv " << ckpt.model_config.conv_channels;
    std::cout << "\n";
    pa::write_particles_csv(std::cout, ckpt.particles);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online augmentation-policy search driven by a particle filter"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    auto* train = app.add_subcommand("train", "train a classifier with online policy search");
    train_flags.attach(*train, true);

    CommonFlags sim_flags;
    auto* sim = app.add_subcommand("filter-sim",
                                   "run the filter against a synthetic policy oracle");
    sim_flags.attach(*sim, false);
    long sim_steps = 200;
    auto* sim_steps_opt = sim->add_option("--steps", sim_steps, "filter steps to run");
    std::string sim_target;
    sim->add_option("--target", sim_target, "oracle target policy, comma-separated");
    double sim_gamma = 0.5;
    sim->add_option("--gamma", sim_gamma, "oracle gain");

    auto* augment = app.add_subcommand("augment", "apply a policy to a manifest of images");
    std::string aug_manifest, aug_output, aug_policy;
    std::string aug_order = "fixed";
    int aug_magnitude = 3;
    std::uint64_t aug_seed = 1;
    augment->add_option("--manifest", aug_manifest, "path,label manifest")->required();
    augment->add_option("--output", aug_output, "output directory")->required();
    augment->add_option("--policy", aug_policy, "per-op probabilities, comma-separated");
    augment->add_option("--magnitude", aug_magnitude, "magnitude level 0-10");
    augment->add_option("--order", aug_order, "op application order")
        ->check(CLI::IsMember({"fixed", "random"}));
    augment->add_option("--seed", aug_seed, "root seed");

    auto* split = app.add_subcommand("split", "stratified manifest split");
    std::string split_manifest, split_output = "out";
    double split_fraction = 0.0;
    std::uint64_t split_seed = 1;
    split->add_option("--manifest", split_manifest, "path,label manifest")->required();
    split->add_option("--fraction", split_fraction, "subset fraction in (0, 1)")->required();
    split->add_option("--seed", split_seed, "root seed");
    split->add_option("--output", split_output, "output directory");

    auto* inspect = app.add_subcommand("inspect", "print a checkpoint's particle table");
    std::string inspect_path;
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(train_flags);
        if (sim->parsed())
            return cmd_filter_sim(sim_flags, sim_steps, sim_steps_opt, sim_target, sim_gamma);
        if (augment->parsed())
            return cmd_augment(aug_manifest, aug_output, aug_policy, aug_magnitude, aug_order,
                               aug_seed);
        if (split->parsed())
            return cmd_split(split_manifest, split_fraction, split_seed, split_output);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
    } catch (const pa::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const pa::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pa::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
