#include "ganad/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>
#include <memory>
#include <string>

#include "ganad/errors.hpp"

namespace ganad {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_fail(png_structp png, png_const_charp msg)
{
    auto* message = static_cast<std::string*>(png_get_error_ptr(png));
    if (message)
        *message = msg;
    png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

}  // namespace

RawImage read_png(const std::filesystem::path& path)
{
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file)
        throw MissingInputError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError(path.string() + ": not a PNG file");

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng initialisation failed");
    }
    RawImage out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": " + message);
    }
    {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        const int color = png_get_color_type(png, info);
        const int bits = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && bits < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (bits == 16)
            png_set_strip_16(png);
        if (color & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(png);
        png_read_update_info(png, info);

        out.width = static_cast<int>(png_get_image_width(png, info));
        out.height = static_cast<int>(png_get_image_height(png, info));
        out.channels = png_get_channels(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        out.pixels.resize(stride * static_cast<std::size_t>(out.height));
        rows.resize(static_cast<std::size_t>(out.height));
        for (int y = 0; y < out.height; ++y)
            rows[static_cast<std::size_t>(y)] = out.pixels.data() + static_cast<std::size_t>(y) * stride;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (out.channels != 1 && out.channels != 3)
        throw FormatError(path.string() + ": unsupported channel count " + std::to_string(out.channels));
    return out;
}

void write_png(const std::filesystem::path& path, const RawImage& image)
{
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("write_png: channels must be 1 or 3");
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
        throw std::invalid_argument("write_png: pixel buffer size mismatch");
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file)
        throw Error("cannot write " + path.string());
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(path.string() + ": " + message);
    }
    {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                     image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y)
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * stride));
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
}

}  // namespace ganad
