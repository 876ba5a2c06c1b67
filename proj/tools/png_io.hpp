#pragma once

// 8-bit gray / RGB PNG encoding and decoding through libpng.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>

#include "radpose/io.hpp"
#include "radpose/render.hpp"

namespace radpose {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw Error("write_png: need 1 or 3 channels");
    detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw IoError(path.string() + ": cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError(path.string() + ": libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path.string() + ": PNG encoding failed");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + y * img.width * img.channels));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image read_png(const std::filesystem::path& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.string().c_str()))
        throw FormatError(path.string() + ": " + im.message);
    const bool gray = (im.format & PNG_FORMAT_FLAG_COLOR) == 0;
    im.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image img(im.width, im.height, gray ? 1 : 3);
    if (!png_image_finish_read(&im, nullptr, img.pixels.data(), 0, nullptr)) {
        png_image_free(&im);
        throw FormatError(path.string() + ": " + im.message);
    }
    return img;
}

}  // namespace radpose
