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
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "particleaugment/errors.hpp"
#include "particleaugment/image.hpp"
#include "particleaugment/rng.hpp"

namespace pa {

/// The 15 base operations, in their canonical application order.
enum class OpKind : int {
    identity = 0,
    auto_contrast,
    equalize,
    rotate,
    solarize,
    solarize_add,
    color,
    contrast,
    brightness,
    sharpness,
    shear_x,
    shear_y,
    translate_x,
    translate_y,
    posterize,
};

inline constexpr int kOpCount = 15;

inline std::string_view op_name(OpKind kind) {
    static constexpr std::array<std::string_view, kOpCount> names = {
        "identity",    "autocontrast", "equalize",    "rotate",      "solarize",
        "solarize_add", "color",        "contrast",    "brightness",  "sharpness",
        "shear_x",     "shear_y",      "translate_x", "translate_y", "posterize"};
    return names[static_cast<std::size_t>(kind)];
}

/// Ops whose magnitude parameter carries a random sign per application.
inline bool op_is_signed(OpKind kind) {
    switch (kind) {
        case OpKind::rotate:
        case OpKind::shear_x:
        case OpKind::shear_y:
        case OpKind::translate_x:
        case OpKind::translate_y:
        case OpKind::color:
        case OpKind::contrast:
        case OpKind::brightness:
        case OpKind::sharpness:
            return true;
        default:
            return false;
    }
}

/// One operation with the shared global magnitude m in [0, 10].
struct AugmentationOp {
    OpKind kind = OpKind::identity;
    int magnitude = 0;

    void validate() const {
        if (magnitude < 0 || magnitude > 10)
            throw ConfigError("augment magnitude must be in [0, 10]");
    }
};

namespace detail {

inline constexpr std::uint8_t kFillValue = 128;  // gray fill for exposed pixels

inline std::uint8_t clamp_u8(long v) {
    return static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
}

inline std::uint8_t blend_u8(double base, double value, double factor) {
    // interpolation toward `value`: base + factor * (value - base)
    return clamp_u8(std::lround(base + factor * (value - base)));
}

/// Integer luma, PIL-style: (299 R + 587 G + 114 B) / 1000, truncated.
inline int luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return (299 * r + 587 * g + 114 * b) / 1000;
}

/// Geometric ops share one sampling convention: the output pixel center
/// (x+0.5, y+0.5) is inverse-mapped into the source, and the source pixel
/// containing that point (floor of the coordinates) is taken unchanged;
/// points outside the canvas read the constant gray fill. Magnitude zero
/// makes every inverse map the identity on pixel centers.
template <typename InverseMap>
Image geometric(const Image& img, InverseMap&& inverse) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto [sx, sy] = inverse(x + 0.5, y + 0.5);
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) =
                    (ix >= 0 && ix < img.width && iy >= 0 && iy < img.height)
                        ? img.at(iy, ix, c)
                        : kFillValue;
            }
        }
    }
    return out;
}

inline Image auto_contrast(const Image& img) {
    Image out = img;
    for (int c = 0; c < 3; ++c) {
        std::uint8_t lo = 255, hi = 0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                lo = std::min(lo, img.at(y, x, c));
                hi = std::max(hi, img.at(y, x, c));
            }
        if (hi <= lo) continue;
        const double scale = 255.0 / (hi - lo);
        std::array<std::uint8_t, 256> lut{};
        for (int i = 0; i < 256; ++i)
            lut[static_cast<std::size_t>(i)] = clamp_u8(std::lround((i - lo) * scale));
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, c) = lut[img.at(y, x, c)];
    }
    return out;
}

/// Cumulative-histogram equalization with the conventional integer step
/// (total - last nonzero bin) / 255; lut[i] = (step/2 + sum of bins below i)
/// / step, clamped to 255. A step of zero or a near-constant channel is a
/// no-op.
inline Image equalize(const Image& img) {
    Image out = img;
    for (int c = 0; c < 3; ++c) {
        std::array<long, 256> hist{};
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) ++hist[img.at(y, x, c)];

        long total = static_cast<long>(img.height) * img.width;
        long last_nonzero = 0;
        int nonzero_bins = 0;
        for (int i = 0; i < 256; ++i)
            if (hist[static_cast<std::size_t>(i)] > 0) {
                last_nonzero = hist[static_cast<std::size_t>(i)];
                ++nonzero_bins;
            }
        if (nonzero_bins <= 1) continue;
        const long step = (total - last_nonzero) / 255;
        if (step == 0) continue;

        std::array<std::uint8_t, 256> lut{};
        long n = step / 2;
        for (int i = 0; i < 256; ++i) {
            lut[static_cast<std::size_t>(i)] = clamp_u8(n / step);
            n += hist[static_cast<std::size_t>(i)];
        }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, c) = lut[img.at(y, x, c)];
    }
    return out;
}

inline Image solarize(const Image& img, double threshold) {
    Image out = img;
    for (auto& v : out.pixels)
        if (static_cast<double>(v) >= threshold) v = static_cast<std::uint8_t>(255 - v);
    return out;
}

inline Image solarize_add(const Image& img, int addend) {
    Image out = img;
    for (auto& v : out.pixels)
        if (v < 128) v = clamp_u8(static_cast<long>(v) + addend);
    return out;
}

inline Image posterize(const Image& img, int bits_kept) {
    const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits_kept));
    Image out = img;
    for (auto& v : out.pixels) v = static_cast<std::uint8_t>(v & mask);
    return out;
}

inline Image color(const Image& img, double factor) {
    Image out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int g = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = blend_u8(g, img.at(y, x, c), factor);
        }
    return out;
}

inline Image contrast(const Image& img, double factor) {
    long sum = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            sum += luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
    const long count = static_cast<long>(img.height) * img.width;
    const double mean = std::floor(static_cast<double>(sum) / static_cast<double>(count) + 0.5);
    Image out = img;
    for (auto i = std::size_t{0}; i < out.pixels.size(); ++i)
        out.pixels[i] = blend_u8(mean, img.pixels[i], factor);
    return out;
}

inline Image brightness(const Image& img, double factor) {
    Image out = img;
    for (auto& v : out.pixels) v = blend_u8(0.0, v, factor);
    return out;
}

/// 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on the interior,
/// border rows/columns kept from the source, then blended by the factor.
inline Image sharpness(const Image& img, double factor) {
    Image smooth = img;
    for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                long acc = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const long k = (dy == 0 && dx == 0) ? 5 : 1;
                        acc += k * img.at(y + dy, x + dx, c);
                    }
                smooth.at(y, x, c) =
                    clamp_u8(std::lround(static_cast<double>(acc) / 13.0));
            }
    Image out = img;
    for (auto i = std::size_t{0}; i < out.pixels.size(); ++i)
        out.pixels[i] = blend_u8(smooth.pixels[i], img.pixels[i], factor);
    return out;
}

}  // namespace detail

/**
 * Apply one operation with an explicit sign for the signed ops
 * (+1 or -1; ignored by the unsigned ones). The input image is never
 * modified; the result always has the same dimensions.
 *
 * Magnitude-to-parameter maps, m in [0, 10]:
 *   rotate        +- m/10 * 30 degrees
 *   shear x/y     +- m/10 * 0.3
 *   translate x/y +- m/10 * 0.3 * (width | height) pixels
 *   solarize      threshold 256 - m/10 * 256
 *   solarize_add  addend m/10 * 110 below value 128
 *   posterize     keep 8 - round(m/10 * 4) bits
 *   color/contrast/brightness/sharpness  factor 1 +- m/10 * 0.9
 *   identity/autocontrast/equalize       magnitude ignored
 */
inline Image apply_op(const AugmentationOp& op, const Image& img, int sign = 1) {
    op.validate();
    const double level = op.magnitude / 10.0;
    const double s = sign < 0 ? -1.0 : 1.0;
    switch (op.kind) {
        case OpKind::identity:
            return img;
        case OpKind::auto_contrast:
            return detail::auto_contrast(img);
        case OpKind::equalize:
            return detail::equalize(img);
        case OpKind::rotate: {
            const double theta = s * level * 30.0 * std::numbers::pi / 180.0;
            const double cx = img.width / 2.0, cy = img.height / 2.0;
            const double ct = std::cos(theta), st = std::sin(theta);
            return detail::geometric(img, [&](double x, double y) {
                const double ox = x - cx, oy = y - cy;
                return std::pair{cx + ct * ox + st * oy, cy - st * ox + ct * oy};
            });
        }
        case OpKind::solarize:
            return detail::solarize(img, 256.0 - level * 256.0);
        case OpKind::solarize_add:
            return detail::solarize_add(img, static_cast<int>(std::lround(level * 110.0)));
        case OpKind::color:
            return detail::color(img, 1.0 + s * level * 0.9);
        case OpKind::contrast:
            return detail::contrast(img, 1.0 + s * level * 0.9);
        case OpKind::brightness:
            return detail::brightness(img, 1.0 + s * level * 0.9);
        case OpKind::sharpness:
            return detail::sharpness(img, 1.0 + s * level * 0.9);
        case OpKind::shear_x: {
            const double shear = s * level * 0.3;
            return detail::geometric(img, [&](double x, double y) {
                return std::pair{x + shear * y, y};
            });
        }
        case OpKind::shear_y: {
            const double shear = s * level * 0.3;
            return detail::geometric(img, [&](double x, double y) {
                return std::pair{x, y + shear * x};
            });
        }
        case OpKind::translate_x: {
            const double t = s * level * 0.3 * img.width;
            return detail::geometric(img, [&](double x, double y) {
                return std::pair{x - t, y};
            });
        }
        case OpKind::translate_y: {
            const double t = s * level * 0.3 * img.height;
            return detail::geometric(img, [&](double x, double y) {
                return std::pair{x, y - t};
            });
        }
        case OpKind::posterize:
            return detail::posterize(img, 8 - static_cast<int>(std::lround(level * 4.0)));
    }
    throw ConfigError("unknown augmentation op");
}

/// Apply one operation, drawing the sign from the stream when the op is
/// signed.
inline Image apply_op(const AugmentationOp& op, const Image& img, Rng& rng) {
    const int sign = op_is_signed(op.kind) ? rng.sign() : 1;
    return apply_op(op, img, sign);
}

enum class OrderMode { fixed, randomized };

/**
 * Applies a 15-element policy to an image: every operation is sampled
 * independently with its policy probability and applied in sequence.
 * Fixed mode walks the canonical order; randomized mode draws a fresh
 * permutation per image. One Bernoulli uniform is consumed per operation
 * regardless of the probability value.
 */
class PolicyApplicator {
public:
    explicit PolicyApplicator(int magnitude, OrderMode order = OrderMode::fixed)
        : order_(order) {
        for (int i = 0; i < kOpCount; ++i) {
            ops_[static_cast<std::size_t>(i)] = {static_cast<OpKind>(i), magnitude};
            ops_[static_cast<std::size_t>(i)].validate();
        }
    }

    Image apply(const std::vector<double>& policy, const Image& img, Rng& rng) const {
        if (static_cast<int>(policy.size()) != kOpCount)
            throw ConfigError("policy must have one probability per operation");
        std::array<int, kOpCount> order{};
        for (int i = 0; i < kOpCount; ++i) order[static_cast<std::size_t>(i)] = i;
        if (order_ == OrderMode::randomized) rng.shuffle(order.begin(), order.end());

        Image out = img;
        for (int idx : order) {
            const double p = policy[static_cast<std::size_t>(idx)];
            if (rng.bernoulli(p))
                out = apply_op(ops_[static_cast<std::size_t>(idx)], out, rng);
        }
        return out;
    }

    OrderMode order_mode() const { return order_; }
    int magnitude() const { return ops_[0].magnitude; }

private:
    std::array<AugmentationOp, kOpCount> ops_;
    OrderMode order_;
};

/**
 * Dataset-level default augmentations (pad-and-crop, horizontal flip,
 * cutout), applied before the policy when enabled. Off by default.
 */
struct DefaultAugmentations {
    bool enabled = false;
    int pad = 4;
    bool horizontal_flip = true;
    int cutout = 0;  ///< square side in pixels, 0 disables

    Image apply(const Image& img, Rng& rng) const {
        if (!enabled) return img;
        Image out = img;
        if (pad > 0) {
            const int dy = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(2 * pad + 1))) - pad;
            const int dx = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(2 * pad + 1))) - pad;
            Image shifted(img.height, img.width);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) {
                    const int sy = y + dy, sx = x + dx;
                    for (int c = 0; c < 3; ++c)
                        shifted.at(y, x, c) =
                            (sy >= 0 && sy < img.height && sx >= 0 && sx < img.width)
                                ? out.at(sy, sx, c)
                                : 0;
                }
            out = std::move(shifted);
        }
        if (horizontal_flip && rng.bernoulli(0.5)) {
            for (int y = 0; y < out.height; ++y)
                for (int x = 0; x < out.width / 2; ++x)
                    for (int c = 0; c < 3; ++c)
                        std::swap(out.at(y, x, c), out.at(y, out.width - 1 - x, c));
        }
        if (cutout > 0) {
            const int cy = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(out.height)));
            const int cx = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(out.width)));
            const int half = cutout / 2;
            for (int y = std::max(0, cy - half); y < std::min(out.height, cy + half + 1); ++y)
                for (int x = std::max(0, cx - half); x < std::min(out.width, cx + half + 1); ++x)
                    for (int c = 0; c < 3; ++c) out.at(y, x, c) = detail::kFillValue;
        }
        return out;
    }
};

}  // namespace pa
