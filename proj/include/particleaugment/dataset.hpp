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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "particleaugment/errors.hpp"
#include "particleaugment/image.hpp"
#include "particleaugment/rng.hpp"

namespace pa {

struct LabeledSample {
    Image image;
    int label = 0;

    /// One-hot label view: exactly one entry is 1.
    std::vector<double> one_hot(int class_count) const {
        if (label < 0 || label >= class_count)
            throw ConfigError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(class_count) + ")");
        std::vector<double> y(static_cast<std::size_t>(class_count), 0.0);
        y[static_cast<std::size_t>(label)] = 1.0;
        return y;
    }
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int class_count = 0;

    std::size_t size() const { return samples.size(); }

    void validate() const {
        if (samples.empty()) throw ConfigError("dataset is empty");
        if (class_count < 1) throw ConfigError("dataset class count must be positive");
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].label < 0 || samples[i].label >= class_count)
                throw ConfigError("sample " + std::to_string(i) + " has label " +
                                  std::to_string(samples[i].label) + " outside [0, " +
                                  std::to_string(class_count) + ")");
    }
};

/// Materialize a subset in index order.
inline Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.class_count = ds.class_count;
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) out.samples.push_back(ds.samples.at(i));
    return out;
}

namespace detail {

/// Per-class quotas proportional to class frequency, rounded half up
/// exactly (integer arithmetic), then corrected to the requested total by
/// walking the largest classes.
inline std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& class_sizes,
                                                  std::size_t total, std::size_t target) {
    const std::size_t c_count = class_sizes.size();
    std::vector<std::size_t> quota(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        const std::uint64_t num = 2ull * class_sizes[c] * target + total;
        quota[c] = std::min<std::size_t>(class_sizes[c],
                                         static_cast<std::size_t>(num / (2ull * total)));
    }

    std::vector<std::size_t> by_size(c_count);
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
        return class_sizes[a] > class_sizes[b];
    });

    auto assigned = std::accumulate(quota.begin(), quota.end(), std::size_t{0});
    while (assigned != target) {
        bool moved = false;
        for (std::size_t c : by_size) {
            if (assigned < target && quota[c] < class_sizes[c]) {
                ++quota[c];
                ++assigned;
                moved = true;
            } else if (assigned > target && quota[c] > 0) {
                --quota[c];
                --assigned;
                moved = true;
            }
            if (assigned == target) break;
        }
        if (!moved) throw ConfigError("stratified split target is infeasible");
    }
    return quota;
}

}  // namespace detail

/**
 * Draw a label-stratified subset of exactly `count` samples: per-class
 * counts are proportional to class frequency within one sample, membership
 * is uniformly random within each class, and the returned indices are
 * ascending. Deterministic for a fixed rng state.
 */
inline std::vector<std::size_t> stratified_sample(const Dataset& ds, std::size_t count,
                                                  Rng& rng) {
    ds.validate();
    const std::size_t n = ds.size();
    if (count < 1 || count > n)
        throw ConfigError("stratified sample count must be in [1, " + std::to_string(n) + "]");

    std::vector<std::vector<std::size_t>> buckets(
        static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < n; ++i)
        buckets[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    std::vector<std::size_t> class_sizes(buckets.size());
    for (std::size_t c = 0; c < buckets.size(); ++c) {
        class_sizes[c] = buckets[c].size();
        if (class_sizes[c] == 0)
            throw ConfigError("class " + std::to_string(c) + " has no samples");
    }

    const auto quota = detail::stratified_quotas(class_sizes, n, count);

    std::vector<std::size_t> picked;
    picked.reserve(count);
    for (std::size_t c = 0; c < buckets.size(); ++c) {
        auto& bucket = buckets[c];
        rng.shuffle(bucket.begin(), bucket.end());
        picked.insert(picked.end(), bucket.begin(),
                      bucket.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

struct SplitIndices {
    std::vector<std::size_t> subset;
    std::vector<std::size_t> remainder;
};

/**
 * Stratified shuffle split: the subset holds round(fraction * n) samples
 * with the parent label distribution preserved within one sample per
 * class; subset and remainder partition the dataset.
 */
inline SplitIndices stratified_split(const Dataset& ds, double fraction, Rng& rng) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("split fraction must be in (0, 1)");
    const std::size_t n = ds.size();
    const auto target =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
    if (target == 0) throw ConfigError("split fraction yields an empty subset");

    SplitIndices out;
    out.subset = stratified_sample(ds, target, rng);
    out.remainder.reserve(n - target);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next < out.subset.size() && out.subset[next] == i)
            ++next;
        else
            out.remainder.push_back(i);
    }
    return out;
}

struct ManifestRow {
    std::string path;
    int label = 0;
    int line = 0;  ///< 1-based line number in the manifest, for error messages
};

/**
 * Parse a CSV manifest of (relative_path, integer_label) rows. A first
 * line whose label field is not an integer is treated as a header. No
 * image is decoded here.
 */
inline std::vector<ManifestRow> read_manifest_rows(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);

    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };

    std::vector<ManifestRow> rows;
    std::string line;
    int line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        const auto comma = line.find_last_of(',');
        const std::string where = manifest_path + " row " + std::to_string(line_no);
        if (comma == std::string::npos)
            throw IoError(where + ": expected path,label");
        const std::string path = trim(line.substr(0, comma));
        const std::string label_text = trim(line.substr(comma + 1));

        std::size_t used = 0;
        long label = 0;
        bool numeric = !label_text.empty();
        if (numeric) {
            try {
                label = std::stol(label_text, &used);
            } catch (const std::exception&) {
                numeric = false;
            }
            numeric = numeric && used == label_text.size();
        }
        if (!numeric) {
            if (first_data_line) {  // header line
                first_data_line = false;
                continue;
            }
            throw IoError(where + ": invalid label '" + label_text + "'");
        }
        first_data_line = false;
        if (label < 0) throw IoError(where + ": negative label");
        if (path.empty()) throw IoError(where + ": empty path");
        rows.push_back({path, static_cast<int>(label), line_no});
    }
    if (rows.empty()) throw IoError("manifest contains no samples: " + manifest_path);
    return rows;
}

inline void write_manifest(const std::string& manifest_path,
                           const std::vector<ManifestRow>& rows) {
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot open " + manifest_path + " for writing");
    out << "path,label\n";
    for (const auto& row : rows) out << row.path << ',' << row.label << '\n';
    if (!out) throw IoError("write failed: " + manifest_path);
}

/**
 * Load CIFAR-10-format binary batches: every record is one label byte
 * followed by 3072 channel-planar pixel bytes of a 32x32 RGB image. All
 * `.bin` files in the directory are read in name order.
 */
inline Dataset load_cifar_binary(const std::string& dir_path) {
    namespace fs = std::filesystem;
    std::vector<fs::path> batches;
    {
        std::error_code ec;
        fs::directory_iterator it(dir_path, ec);
        if (ec) throw IoError("cannot read directory " + dir_path);
        for (const auto& entry : fs::directory_iterator(dir_path))
            if (entry.is_regular_file() && entry.path().extension() == ".bin")
                batches.push_back(entry.path());
    }
    if (batches.empty()) throw IoError("no .bin batches in " + dir_path);
    std::sort(batches.begin(), batches.end());

    constexpr std::size_t kRecord = 1 + 3 * 1024;
    Dataset ds;
    ds.class_count = 10;
    for (const auto& path : batches) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        if (bytes.size() % kRecord != 0)
            throw IoError(path.string() + ": truncated record at byte offset " +
                          std::to_string(bytes.size() - bytes.size() % kRecord));
        for (std::size_t r = 0; r < bytes.size() / kRecord; ++r) {
            const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data()) + r * kRecord;
            LabeledSample sample;
            sample.label = rec[0];
            if (sample.label > 9)
                throw IoError(path.string() + " record " + std::to_string(r) +
                              ": label out of range");
            sample.image = Image(32, 32);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 32; ++y)
                    for (int x = 0; x < 32; ++x)
                        sample.image.at(y, x, c) = rec[1 + 1024 * c + 32 * y + x];
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

/**
 * Deterministic synthetic classification set for desk-scale runs: each
 * class pairs a palette color with a stripe pattern (orientation and
 * period vary by class), plus per-pixel noise. Labels are dealt
 * round-robin so classes stay balanced.
 */
inline Dataset make_toy_dataset(std::size_t count, int height, int width, int class_count,
                                std::uint64_t seed) {
    if (count == 0) throw ConfigError("toy dataset sample count must be positive");
    if (class_count < 2) throw ConfigError("toy dataset needs at least two classes");

    static constexpr std::array<std::array<int, 3>, 8> kPalette = {{{220, 60, 60},
                                                                    {60, 200, 80},
                                                                    {70, 90, 220},
                                                                    {230, 200, 60},
                                                                    {200, 70, 200},
                                                                    {60, 200, 200},
                                                                    {240, 140, 50},
                                                                    {150, 150, 150}}};

    Dataset ds;
    ds.class_count = class_count;
    ds.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(class_count));
        Rng rng = Rng::stream(seed, Stream::data_gen, i);
        const auto& base = kPalette[static_cast<std::size_t>(label % 8)];
        const int period = 2 + label % 4;
        const bool horizontal = label % 2 == 0;

        LabeledSample sample;
        sample.label = label;
        sample.image = Image(height, width);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const int phase = (horizontal ? y : x) / period;
                const double scale = phase % 2 == 0 ? 1.0 : 0.45;
                for (int c = 0; c < 3; ++c) {
                    const int noise = static_cast<int>(rng.uniform_below(49)) - 24;
                    const int v = static_cast<int>(base[static_cast<std::size_t>(c)] * scale) + noise;
                    sample.image.at(y, x, c) =
                        static_cast<std::uint8_t>(std::clamp(v, 0, 255));
                }
            }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

}  // namespace pa
