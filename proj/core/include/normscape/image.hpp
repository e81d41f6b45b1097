#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normscape/tensor.hpp"

namespace normscape {

// Decoded 8-bit image, interleaved rows, channels = 1 (gray) or 3 (RGB).
struct ImageU8 {
    int64_t height = 0;
    int64_t width = 0;
    int64_t channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int64_t y, int64_t x, int64_t c) const {
        return pixels[static_cast<size_t>((y * width + x) * channels + c)];
    }
};

// Decodes a PNG (8-bit gray/RGB; palette expanded, alpha stripped) or an
// uncompressed 24-bit BMP. Throws DataError on unreadable, truncated or
// unsupported files.
ImageU8 load_image_u8(const std::string& path);

// ITU-R BT.601 studio-swing luminance of 8-bit sRGB, rescaled to [0,1]:
// Y8 = 16 + 65.481 R + 128.553 G + 24.966 B with R,G,B in [0,1]; result
// Y8/255. Gray pixels use R = G = B.
template <std::floating_point T>
Tensor<T> luminance_from_u8(const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw DataError("luminance: expected 1 or 3 channels, got " +
                        std::to_string(img.channels));
    }
    Tensor<T> out({1, img.height, img.width});
    const uint8_t* px = img.pixels.data();
    const int64_t n = img.height * img.width;
    if (img.channels == 1) {
        for (int64_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(px[i]) / 255.0;
            out[i] = static_cast<T>((16.0 + 219.0 * g) / 255.0);
        }
    } else {
        for (int64_t i = 0; i < n; ++i) {
            const double r = static_cast<double>(px[3 * i + 0]) / 255.0;
            const double g = static_cast<double>(px[3 * i + 1]) / 255.0;
            const double b = static_cast<double>(px[3 * i + 2]) / 255.0;
            const double y8 = 16.0 + 65.481 * r + 128.553 * g + 24.966 * b;
            out[i] = static_cast<T>(y8 / 255.0);
        }
    }
    return out;
}

template <std::floating_point T>
Tensor<T> load_image_luminance(const std::string& path) {
    return luminance_from_u8<T>(load_image_u8(path));
}

}  // namespace normscape
