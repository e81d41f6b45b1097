#include "normscape/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "normscape/errors.hpp"

namespace normscape {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

ImageU8 load_png(const std::string& path, FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("PNG reader initialization failed: " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("PNG reader initialization failed: " + path);
    }

    // Declared before setjmp; filled only after the decode settles.
    ImageU8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt or truncated PNG: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG bit depth 16 (expected 8-bit): " + path);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG channel layout (" + std::to_string(channels) +
                        " channels after normalization): " + path);
    }

    img.height = static_cast<int64_t>(height);
    img.width = static_cast<int64_t>(width);
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(img.height * img.width * img.channels));
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * width * static_cast<size_t>(channels);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

uint32_t read_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8));
}

// Uncompressed 24-bit BMP (BITMAPINFOHEADER or later), bottom-up or
// top-down.
ImageU8 load_bmp(const std::string& path, FILE* fp) {
    std::vector<uint8_t> bytes;
    {
        std::fseek(fp, 0, SEEK_END);
        const long size = std::ftell(fp);
        if (size < 54) throw DataError("truncated BMP: " + path);
        std::rewind(fp);
        bytes.resize(static_cast<size_t>(size));
        if (std::fread(bytes.data(), 1, bytes.size(), fp) != bytes.size()) {
            throw DataError("unreadable BMP: " + path);
        }
    }
    if (bytes[0] != 'B' || bytes[1] != 'M') throw DataError("not a BMP file: " + path);
    const uint32_t data_offset = read_u32le(&bytes[10]);
    const uint32_t header_size = read_u32le(&bytes[14]);
    if (header_size < 40) throw DataError("unsupported BMP header: " + path);
    const int32_t width = static_cast<int32_t>(read_u32le(&bytes[18]));
    const int32_t height_raw = static_cast<int32_t>(read_u32le(&bytes[22]));
    const uint16_t bpp = read_u16le(&bytes[28]);
    const uint32_t compression = read_u32le(&bytes[30]);
    if (bpp != 24 || compression != 0) {
        throw DataError("unsupported BMP variant (need uncompressed 24-bit): " + path);
    }
    if (width <= 0 || height_raw == 0) throw DataError("degenerate BMP dimensions: " + path);

    const bool top_down = height_raw < 0;
    const int64_t h = top_down ? -static_cast<int64_t>(height_raw) : static_cast<int64_t>(height_raw);
    const int64_t w = width;
    const int64_t row_stride = ((w * 3 + 3) / 4) * 4;
    if (static_cast<int64_t>(data_offset) + row_stride * h > static_cast<int64_t>(bytes.size())) {
        throw DataError("truncated BMP pixel data: " + path);
    }

    ImageU8 img;
    img.height = h;
    img.width = w;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(h * w * 3));
    for (int64_t y = 0; y < h; ++y) {
        const int64_t src_row = top_down ? y : (h - 1 - y);
        const uint8_t* src = bytes.data() + data_offset + src_row * row_stride;
        uint8_t* dst = img.pixels.data() + static_cast<size_t>(y * w * 3);
        for (int64_t x = 0; x < w; ++x) {
            dst[3 * x + 0] = src[3 * x + 2];  // BMP stores BGR
            dst[3 * x + 1] = src[3 * x + 1];
            dst[3 * x + 2] = src[3 * x + 0];
        }
    }
    return img;
}

}  // namespace

ImageU8 load_image_u8(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open image file: " + path);
    uint8_t sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8) throw DataError("file too short: " + path);
    std::rewind(fp.get());
    if (png_sig_cmp(sig, 0, 8) == 0) return load_png(path, fp.get());
    if (sig[0] == 'B' && sig[1] == 'M') return load_bmp(path, fp.get());
    throw DataError("unsupported image format (expected PNG or BMP): " + path);
}

}  // namespace normscape
