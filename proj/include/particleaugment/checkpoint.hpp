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

// Binary run checkpoint. Layout (all integers and floats little-endian):
//   8 bytes  magic "PAUGCKPT"
//   u32      version (currently 1)
//   model:   i32 input_height, i32 input_width, i32 class_count,
//            i32 hidden_units, u8 use_conv, i32 conv_channels,
//            i64 epochs_trained, u64 param_count,
//            f64[param_count] parameters, f64[param_count] momentum
//   filter:  u64 particle_count, u64 state_dim, i64 filter_epoch,
//            per particle: f64 weight, f64[state_dim] state
//   rng:     u64 root_seed, i64 next_epoch
// Streams are re-derived from (root_seed, purpose, epoch), so the seed and
// the resume epoch fully determine every random draw after a resume.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "particleaugment/errors.hpp"
#include "particleaugment/filter.hpp"
#include "particleaugment/nn.hpp"

namespace pa {

struct Checkpoint {
    ModelConfig model_config;
    long epochs_trained = 0;
    std::vector<double> parameters;
    std::vector<double> momentum;
    ParticleSet particles;
    std::uint64_t root_seed = 0;
    long next_epoch = 1;  ///< 1-based training epoch to execute next
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'P', 'A', 'U', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) { uint_le(v, 4); }
    void u64(std::uint64_t v) { uint_le(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const char* data, std::size_t count) {
        out_.write(data, static_cast<std::streamsize>(count));
    }

private:
    void uint_le(std::uint64_t v, int count) {
        for (int i = 0; i < count; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::ostream& out_;
};

class ByteReader {
public:
    ByteReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

    std::uint8_t u8() {
        char c;
        if (!in_.get(c)) fail();
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
    std::uint64_t u64() { return uint_le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void bytes(char* data, std::size_t count) {
        if (!in_.read(data, static_cast<std::streamsize>(count))) fail();
    }

private:
    [[noreturn]] void fail() const { throw IoError("truncated checkpoint: " + path_); }
    std::uint64_t uint_le(int count) {
        std::uint64_t v = 0;
        for (int i = 0; i < count; ++i) {
            char c;
            if (!in_.get(c)) fail();
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(c)) << (8 * i);
        }
        return v;
    }
    std::istream& in_;
    const std::string& path_;
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    if (ckpt.parameters.size() != ckpt.momentum.size())
        throw std::invalid_argument("checkpoint: parameter and momentum sizes differ");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");

    detail::ByteWriter w(out);
    w.bytes(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    w.u32(detail::kCheckpointVersion);

    const auto& mc = ckpt.model_config;
    w.i32(mc.input_height);
    w.i32(mc.input_width);
    w.i32(mc.class_count);
    w.i32(mc.hidden_units);
    w.u8(mc.use_conv ? 1 : 0);
    w.i32(mc.conv_channels);
    w.i64(ckpt.epochs_trained);
    w.u64(ckpt.parameters.size());
    for (double v : ckpt.parameters) w.f64(v);
    for (double v : ckpt.momentum) w.f64(v);

    w.u64(static_cast<std::uint64_t>(ckpt.particles.size()));
    w.u64(static_cast<std::uint64_t>(ckpt.particles.dim()));
    w.i64(ckpt.particles.epoch);
    for (const auto& p : ckpt.particles.particles) {
        w.f64(p.weight);
        for (double x : p.state) w.f64(x);
    }

    w.u64(ckpt.root_seed);
    w.i64(ckpt.next_epoch);
    if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    detail::ByteReader r(in, path);

    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
        throw IoError(path + " is not a checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != detail::kCheckpointVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.model_config.input_height = r.i32();
    ckpt.model_config.input_width = r.i32();
    ckpt.model_config.class_count = r.i32();
    ckpt.model_config.hidden_units = r.i32();
    ckpt.model_config.use_conv = r.u8() != 0;
    ckpt.model_config.conv_channels = r.i32();
    ckpt.epochs_trained = static_cast<long>(r.i64());
    const auto param_count = r.u64();
    ckpt.parameters.resize(param_count);
    for (auto& v : ckpt.parameters) v = r.f64();
    ckpt.momentum.resize(param_count);
    for (auto& v : ckpt.momentum) v = r.f64();

    const auto r_count = r.u64();
    const auto dim = r.u64();
    ckpt.particles.epoch = static_cast<long>(r.i64());
    ckpt.particles.particles.resize(r_count);
    for (auto& p : ckpt.particles.particles) {
        p.weight = r.f64();
        p.state.resize(dim);
        for (auto& x : p.state) x = r.f64();
    }

    ckpt.root_seed = r.u64();
    ckpt.next_epoch = static_cast<long>(r.i64());
    return ckpt;
}

/// Snapshot a classifier into checkpoint form.
inline void capture_model(Checkpoint& ckpt, const BuiltinClassifier& model) {
    ckpt.model_config = model.config();
    ckpt.epochs_trained = model.epochs_trained();
    ckpt.parameters = model.parameters();
    ckpt.momentum = model.momentum_buffer();
}

/// Rebuild the classifier stored in a checkpoint.
inline BuiltinClassifier restore_model(const Checkpoint& ckpt) {
    Rng scratch(0);
    BuiltinClassifier model(ckpt.model_config, scratch);
    if (model.parameters().size() != ckpt.parameters.size())
        throw IoError("checkpoint parameter count does not match its architecture");
    model.parameters() = ckpt.parameters;
    model.momentum_buffer() = ckpt.momentum;
    model.set_epochs_trained(ckpt.epochs_trained);
    return model;
}

}  // namespace pa
