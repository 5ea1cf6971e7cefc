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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "particleaugment/checkpoint.hpp"
#include "particleaugment/config.hpp"
#include "particleaugment/pipeline.hpp"

using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pa_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "cli_stdout.txt";
    const fs::path err = dir / "cli_stderr.txt";
    const std::string cmd = std::string(PA_CLI_BIN) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

/// Renders toy samples to PNG files plus a path,label manifest.
fs::path write_toy_pngs(const fs::path& dir, std::size_t count, int classes) {
    const pa::Dataset ds = pa::make_toy_dataset(count, 16, 16, classes, 1234);
    std::ofstream mf(dir / "list.csv");
    mf << "path,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03zu.png", i);
        pa::write_png((dir / name).string(), ds.samples[i].image);
        mf << name << "," << ds.samples[i].label << "\n";
    }
    return dir / "list.csv";
}

fs::path write_tiny_config(const fs::path& dir) {
    const fs::path path = dir / "tiny.toml";
    std::ofstream cfg(path);
    cfg << "[filter]\nparticles = 6\n\n"
        << "[pipeline]\nepochs = 3\nvp_size = 24\nhidden_units = 12\n\n"
        << "[data]\nkind = \"toy\"\ntoy_count = 80\ntoy_classes = 4\n";
    return path;
}

}  // namespace

TEST_CASE("train runs with the same seed write identical trajectories") {
    const fs::path dir = fresh_dir("train_determinism");
    const fs::path cfg = write_tiny_config(dir);

    const auto a = run_cli("train --config " + cfg.string() + " --seed 7 --output " +
                               (dir / "a").string(),
                           dir);
    REQUIRE(a.code == 0);
    REQUIRE_THAT(a.out, ContainsSubstring("train accuracy:"));
    REQUIRE_THAT(a.out, ContainsSubstring("filter steps: 2"));

    const auto b = run_cli("train --config " + cfg.string() + " --seed 7 --output " +
                               (dir / "b").string(),
                           dir);
    REQUIRE(b.code == 0);
    REQUIRE(slurp(dir / "a" / "trajectory.csv") == slurp(dir / "b" / "trajectory.csv"));
    REQUIRE_FALSE(slurp(dir / "a" / "trajectory.csv").empty());

    const auto c = run_cli("train --config " + cfg.string() + " --seed 8 --output " +
                               (dir / "c").string(),
                           dir);
    REQUIRE(c.code == 0);
    REQUIRE(slurp(dir / "a" / "trajectory.csv") != slurp(dir / "c" / "trajectory.csv"));
}

TEST_CASE("missing dataset paths exit nonzero naming the path") {
    const fs::path dir = fresh_dir("train_missing_data");
    std::ofstream cfg(dir / "bad.toml");
    cfg << "[data]\nkind = \"png\"\npath = \"/nonexistent/images.csv\"\n";
    cfg.close();

    const auto r = run_cli("train --config " + (dir / "bad.toml").string(), dir);
    REQUIRE(r.code == 2);
    REQUIRE_THAT(r.err, ContainsSubstring("/nonexistent/images.csv"));
}

TEST_CASE("zero epochs is a validation error") {
    const fs::path dir = fresh_dir("train_zero_epochs");
    const fs::path cfg = write_tiny_config(dir);
    const auto r = run_cli(
        "train --config " + cfg.string() + " --epochs 0 --output " + (dir / "o").string(),
        dir);
    REQUIRE(r.code == 1);
    REQUIRE_THAT(r.err, ContainsSubstring("pipeline.epochs"));
}

TEST_CASE("augment with the zero policy round-trips image bytes") {
    const fs::path dir = fresh_dir("augment_zero");
    const fs::path manifest = write_toy_pngs(dir, 4, 2);

    const auto r = run_cli("augment --manifest " + manifest.string() + " --output " +
                               (dir / "aug").string() + " --seed 3",
                           dir);
    REQUIRE(r.code == 0);

    for (const auto& row : pa::read_manifest_rows(manifest.string())) {
        const pa::Image reference = pa::read_png((dir / row.path).string());
        const fs::path normalized = dir / ("norm_" + row.path);
        pa::write_png(normalized.string(), reference);
        REQUIRE(slurp(dir / "aug" / row.path) == slurp(normalized));
        REQUIRE_FALSE(slurp(dir / "aug" / row.path).empty());
    }

    const auto out_rows = pa::read_manifest_rows((dir / "aug" / "manifest.csv").string());
    REQUIRE(out_rows.size() == 4u);
}

TEST_CASE("augment rejects malformed policies") {
    const fs::path dir = fresh_dir("augment_bad_policy");
    const fs::path manifest = write_toy_pngs(dir, 1, 2);
    const auto r = run_cli("augment --manifest " + manifest.string() + " --output " +
                               (dir / "aug").string() + " --policy 0.5,0.5",
                           dir);
    REQUIRE(r.code == 1);
    REQUIRE_THAT(r.err, ContainsSubstring("policy"));
}

TEST_CASE("split writes stratified manifests that reload") {
    const fs::path dir = fresh_dir("split_even");
    const fs::path manifest = write_toy_pngs(dir, 100, 2);

    const auto r = run_cli("split --manifest " + manifest.string() +
                               " --fraction 0.5 --seed 2 --output " + (dir / "sp").string(),
                           dir);
    REQUIRE(r.code == 0);

    for (const std::string name : {"subset.csv", "remainder.csv"}) {
        const pa::Dataset part = pa::load_png_manifest((dir / "sp" / name).string());
        REQUIRE(part.size() == 50u);
        std::size_t per_class[2] = {0, 0};
        for (const auto& s : part.samples) ++per_class[s.label];
        REQUIRE(per_class[0] == 25u);
        REQUIRE(per_class[1] == 25u);
    }
}

TEST_CASE("inspect prints one row per particle with uniform weights") {
    const fs::path dir = fresh_dir("inspect_fresh");
    pa::FilterConfig fcfg;
    fcfg.particle_count = 12;
    pa::Rng rng = pa::Rng::stream(3, pa::Stream::filter_init);
    pa::Checkpoint ckpt;
    pa::ModelConfig mcfg;
    mcfg.hidden_units = 4;
    pa::Rng model_rng = pa::Rng::stream(3, pa::Stream::model_init);
    pa::BuiltinClassifier model(mcfg, model_rng);
    pa::capture_model(ckpt, model);
    ckpt.particles = pa::sparse_init(fcfg, rng);
    ckpt.root_seed = 3;
    ckpt.next_epoch = 1;
    pa::save_checkpoint((dir / "fresh.bin").string(), ckpt);

    const auto r = run_cli("inspect " + (dir / "fresh.bin").string(), dir);
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("# seed = 3"));
    REQUIRE_THAT(r.out, ContainsSubstring("epoch,particle_index,w,p_1"));

    std::istringstream lines(r.out);
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line.front() == '#' || line.rfind("epoch,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');  // epoch
        std::getline(ss, field, ',');  // particle index
        REQUIRE(std::stoi(field) == rows);
        std::getline(ss, field, ',');  // weight
        REQUIRE_THAT(std::stod(field), Catch::Matchers::WithinAbs(1.0 / 12.0, 1e-15));
        ++rows;
    }
    REQUIRE(rows == 12);

    const auto missing = run_cli("inspect /nonexistent/ckpt.bin", dir);
    REQUIRE(missing.code == 2);
}

TEST_CASE("filter-sim reproduces the committed golden csv and passes replay") {
    const fs::path dir = fresh_dir("filter_sim_golden");
    const auto r = run_cli(
        "filter-sim --steps 40 --seed 17 --output " + (dir / "sim").string(), dir);
    REQUIRE(r.code == 0);

    const std::string golden =
        slurp(fs::path(PA_SOURCE_DIR) / "tests" / "data" / "filter_sim_golden.csv");
    REQUIRE_FALSE(golden.empty());
    REQUIRE(slurp(dir / "sim" / "expected_state.csv") == golden);

    std::ifstream log(dir / "sim" / "trajectory.csv");
    const auto rows = pa::read_trajectory_csv(log);
    REQUIRE(rows.size() == 40u * 50u);
    REQUIRE(pa::replay_max_error(rows, 1.0, 1e-6) <= 1e-9);
}

TEST_CASE("filter-sim with zero steps writes a header-only csv") {
    const fs::path dir = fresh_dir("filter_sim_zero");
    const auto r = run_cli(
        "filter-sim --steps 0 --seed 1 --output " + (dir / "sim").string(), dir);
    REQUIRE(r.code == 0);

    std::istringstream csv(slurp(dir / "sim" / "expected_state.csv"));
    std::string line;
    std::vector<std::string> content;
    while (std::getline(csv, line))
        if (!line.empty() && line.front() != '#') content.push_back(line);
    REQUIRE(content.size() == 1u);
    REQUIRE(content[0].rfind("step,x_1,", 0) == 0);
    REQUIRE_THAT(content[0], ContainsSubstring("x_15"));
}

TEST_CASE("bad invocations exit with the validation code") {
    const fs::path dir = fresh_dir("bad_invocations");
    REQUIRE(run_cli("train --nonsense 2", dir).code == 1);
    REQUIRE(run_cli("", dir).code == 1);
    REQUIRE(run_cli("train --order diagonal", dir).code == 1);
    REQUIRE(run_cli("--help", dir).code == 0);
}
