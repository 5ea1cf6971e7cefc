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
#include <vector>

#include "particleaugment/errors.hpp"

namespace pa {

/// 8-bit RGB image, row-major H x W x 3.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, 0) {
        if (h < 1 || w < 1) throw ConfigError("image dimensions must be positive");
    }

    static Image filled(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        Image img(h, w);
        for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
            img.pixels[i] = r;
            img.pixels[i + 1] = g;
            img.pixels[i + 2] = b;
        }
        return img;
    }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
    }
    std::uint8_t at(int y, int x, int c) const { return pixels[index(y, x, c)]; }
    std::uint8_t& at(int y, int x, int c) { return pixels[index(y, x, c)]; }

    bool operator==(const Image& other) const = default;
};

}  // namespace pa
