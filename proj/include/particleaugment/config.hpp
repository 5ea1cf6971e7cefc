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

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "particleaugment/errors.hpp"
#include "particleaugment/pipeline.hpp"
#include "particleaugment/png_io.hpp"

namespace pa {

/// Where the training data comes from. `toy` generates the built-in
/// striped-palette set, `png` reads a path,label manifest, `cifar` reads
/// binary batches from a directory.
struct DataConfig {
    std::string kind = "toy";
    std::string path;
    std::string val_path;
    std::size_t toy_count = 2000;
    int toy_classes = 4;
    int image_height = 16;
    int image_width = 16;
    std::uint64_t toy_seed = 1;

    void validate() const {
        if (kind != "toy" && kind != "png" && kind != "cifar")
            throw ConfigError("data.kind: must be toy, png or cifar");
        if (kind != "toy" && path.empty())
            throw ConfigError("data.path: required for kind = " + kind);
        if (kind == "toy") {
            if (toy_count < 1) throw ConfigError("data.toy_count: must be >= 1");
            if (toy_classes < 2) throw ConfigError("data.toy_classes: must be >= 2");
            if (image_height < 1 || image_width < 1)
                throw ConfigError("data.image size: must be positive");
        }
    }
};

/// A fully resolved run description: config file plus flag overrides.
struct RunManifest {
    std::string config_path;
    PipelineConfig pipeline;
    DataConfig data;
    bool explicit_input_size = false;  ///< input_height/width set by the user
    bool explicit_classes = false;     ///< classes set by the user
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Strips a trailing comment that starts outside of double quotes.
inline std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

struct KeyContext {
    std::string origin;
    int line = 0;
    std::string key;  ///< section.key

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + key + ": " + what);
    }
};

inline long parse_int(const std::string& value, const KeyContext& ctx) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) ctx.fail("expected an integer, got '" + value + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        ctx.fail("expected an integer, got '" + value + "'");
    }
}

inline double parse_float(const std::string& value, const KeyContext& ctx) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) ctx.fail("expected a number, got '" + value + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        ctx.fail("expected a number, got '" + value + "'");
    }
}

inline bool parse_bool(const std::string& value, const KeyContext& ctx) {
    if (value == "true") return true;
    if (value == "false") return false;
    ctx.fail("expected true or false, got '" + value + "'");
}

inline std::string parse_string(const std::string& value, const KeyContext& ctx) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        return value.substr(1, value.size() - 2);
    if (!value.empty() && (value.front() == '"' || value.back() == '"'))
        ctx.fail("unterminated string");
    return value;
}

inline std::vector<double> parse_float_array(const std::string& value, const KeyContext& ctx) {
    if (value.size() < 2 || value.front() != '[' || value.back() != ']')
        ctx.fail("expected an array like [0.1, 0.2], got '" + value + "'");
    std::vector<double> out;
    std::stringstream ss(value.substr(1, value.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) ctx.fail("empty array element");
        out.push_back(parse_float(item, ctx));
    }
    return out;
}

template <class T>
T int_in_range(const std::string& value, const KeyContext& ctx, long lo, long hi) {
    const long v = parse_int(value, ctx);
    if (v < lo || v > hi) ctx.fail("value " + value + " is out of range");
    return static_cast<T>(v);
}

}  // namespace detail

/**
 * Parses structured config text into a run manifest. Sections [filter],
 * [optimizer], [pipeline] and [data] with key = value lines; # comments;
 * numbers, booleans, quoted or bare strings and float arrays. Every error
 * names the origin, line and offending key. `origin` is used in messages
 * only.
 */
inline void load_config_text(std::istream& in, const std::string& origin, RunManifest& m) {
    std::string raw;
    std::string section;
    int line_no = 0;
    bool velocity_scalar_set = false;
    double velocity_scalar = 0.0;

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "filter" && section != "optimizer" && section != "pipeline" &&
                section != "data")
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                              "' appears before any [section]");

        const detail::KeyContext ctx{origin, line_no, section + "." + key};
        PipelineConfig& p = m.pipeline;

        if (section == "filter") {
            if (key == "particles")
                p.filter.particle_count = detail::int_in_range<int>(value, ctx, 1, 1000000);
            else if (key == "state_dim")
                p.filter.state_dim = detail::int_in_range<int>(value, ctx, 1, 1000000);
            else if (key == "sigma")
                p.filter.process_noise_sigma = detail::parse_float(value, ctx);
            else if (key == "eta")
                p.filter.update_rate = detail::parse_float(value, ctx);
            else if (key == "alpha")
                p.filter.resample_fraction = detail::parse_float(value, ctx);
            else if (key == "sparse_init_count")
                p.filter.sparse_init_count = detail::int_in_range<int>(value, ctx, 0, 1000000);
            else if (key == "init_value")
                p.filter.init_value = detail::parse_float(value, ctx);
            else if (key == "orthogonal_init")
                p.filter.orthogonal_init = detail::parse_bool(value, ctx);
            else if (key == "velocity") {
                if (!value.empty() && value.front() == '[') {
                    p.filter.velocity = detail::parse_float_array(value, ctx);
                } else {
                    velocity_scalar = detail::parse_float(value, ctx);
                    velocity_scalar_set = true;
                }
            } else
                ctx.fail("unknown key");
        } else if (section == "optimizer") {
            if (key == "lr")
                p.optimizer.learning_rate = detail::parse_float(value, ctx);
            else if (key == "momentum")
                p.optimizer.momentum = detail::parse_float(value, ctx);
            else if (key == "nesterov")
                p.optimizer.nesterov = detail::parse_bool(value, ctx);
            else if (key == "weight_decay")
                p.optimizer.weight_decay = detail::parse_float(value, ctx);
            else if (key == "batch_size")
                p.optimizer.batch_size = detail::int_in_range<int>(value, ctx, 1, 1000000);
            else
                ctx.fail("unknown key");
        } else if (section == "pipeline") {
            if (key == "epochs")
                p.total_epochs = detail::parse_int(value, ctx);
            else if (key == "warmup")
                p.warmup_epochs = detail::parse_int(value, ctx);
            else if (key == "filter_interval")
                p.filter_interval = detail::parse_int(value, ctx);
            else if (key == "prediction_epochs")
                p.prediction_epochs = detail::int_in_range<int>(value, ctx, 1, 1000000);
            else if (key == "tp_fraction")
                p.tp_fraction = detail::parse_float(value, ctx);
            else if (key == "vp_size")
                p.vp_size = detail::int_in_range<std::size_t>(value, ctx, 1, 100000000);
            else if (key == "magnitude")
                p.magnitude = detail::int_in_range<int>(value, ctx, 0, 10);
            else if (key == "order") {
                const std::string v = detail::parse_string(value, ctx);
                if (v == "fixed")
                    p.order_mode = OrderMode::fixed;
                else if (v == "random")
                    p.order_mode = OrderMode::randomized;
                else
                    ctx.fail("must be fixed or random, got '" + v + "'");
            } else if (key == "baseline")
                p.baseline_mode = detail::parse_bool(value, ctx);
            else if (key == "baseline_policy")
                p.baseline_policy = detail::parse_float_array(value, ctx);
            else if (key == "d0_epsilon")
                p.d0_epsilon = detail::parse_float(value, ctx);
            else if (key == "tp_fixed_once")
                p.tp_fixed_once = detail::parse_bool(value, ctx);
            else if (key == "vp_disjoint")
                p.vp_disjoint = detail::parse_bool(value, ctx);
            else if (key == "seed")
                p.seed = static_cast<std::uint64_t>(detail::parse_int(value, ctx));
            else if (key == "threads")
                p.threads = detail::int_in_range<int>(value, ctx, 1, 4096);
            else if (key == "output")
                p.output_dir = detail::parse_string(value, ctx);
            else if (key == "hidden_units")
                p.model.hidden_units = detail::int_in_range<int>(value, ctx, 1, 1000000);
            else if (key == "use_conv")
                p.model.use_conv = detail::parse_bool(value, ctx);
            else if (key == "conv_channels")
                p.model.conv_channels = detail::int_in_range<int>(value, ctx, 1, 1024);
            else if (key == "input_height") {
                p.model.input_height = detail::int_in_range<int>(value, ctx, 1, 65536);
                m.explicit_input_size = true;
            } else if (key == "input_width") {
                p.model.input_width = detail::int_in_range<int>(value, ctx, 1, 65536);
                m.explicit_input_size = true;
            } else if (key == "classes") {
                p.model.class_count = detail::int_in_range<int>(value, ctx, 2, 65536);
                m.explicit_classes = true;
            } else
                ctx.fail("unknown key");
        } else {  // data
            if (key == "kind")
                m.data.kind = detail::parse_string(value, ctx);
            else if (key == "path")
                m.data.path = detail::parse_string(value, ctx);
            else if (key == "val_path")
                m.data.val_path = detail::parse_string(value, ctx);
            else if (key == "toy_count")
                m.data.toy_count = detail::int_in_range<std::size_t>(value, ctx, 1, 100000000);
            else if (key == "toy_classes")
                m.data.toy_classes = detail::int_in_range<int>(value, ctx, 2, 65536);
            else if (key == "toy_seed")
                m.data.toy_seed = static_cast<std::uint64_t>(detail::parse_int(value, ctx));
            else if (key == "image_height")
                m.data.image_height = detail::int_in_range<int>(value, ctx, 1, 65536);
            else if (key == "image_width")
                m.data.image_width = detail::int_in_range<int>(value, ctx, 1, 65536);
            else
                ctx.fail("unknown key");
        }
    }

    if (velocity_scalar_set && m.pipeline.filter.velocity.empty())
        m.pipeline.filter.velocity.assign(
            static_cast<std::size_t>(m.pipeline.filter.state_dim), velocity_scalar);
}

inline RunManifest load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RunManifest m;
    m.config_path = path;
    load_config_text(in, path, m);
    return m;
}

/// Key/value pairs describing the resolved run, config keys first.
inline std::vector<std::pair<std::string, std::string>> manifest_echo(const RunManifest& m) {
    auto echo = config_echo(m.pipeline);
    echo.emplace_back("data_kind", m.data.kind);
    if (!m.data.path.empty()) echo.emplace_back("data_path", m.data.path);
    if (!m.data.val_path.empty()) echo.emplace_back("data_val_path", m.data.val_path);
    if (m.data.kind == "toy") {
        echo.emplace_back("toy_count", std::to_string(m.data.toy_count));
        echo.emplace_back("toy_classes", std::to_string(m.data.toy_classes));
        echo.emplace_back("toy_seed", std::to_string(m.data.toy_seed));
        echo.emplace_back("image_size", std::to_string(m.data.image_height) + "x" +
                                            std::to_string(m.data.image_width));
    }
    return echo;
}

/// Loads the dataset a manifest describes and fills in the model's input
/// size and class count from the data unless the user pinned them.
inline Dataset load_dataset(RunManifest& m) {
    m.data.validate();
    Dataset ds;
    if (m.data.kind == "toy") {
        ds = make_toy_dataset(m.data.toy_count, m.data.image_height, m.data.image_width,
                              m.data.toy_classes, m.data.toy_seed);
    } else if (m.data.kind == "png") {
        ds = load_png_manifest(m.data.path);
    } else {
        ds = load_cifar_binary(m.data.path);
    }
    if (!m.explicit_input_size) {
        m.pipeline.model.input_height = ds.samples.front().image.height;
        m.pipeline.model.input_width = ds.samples.front().image.width;
    }
    if (!m.explicit_classes) m.pipeline.model.class_count = ds.class_count;
    return ds;
}

}  // namespace pa
