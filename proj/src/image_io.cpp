#include "semsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_read(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::MissingFile, path.string());
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(ErrorKind::IoError, "cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        fail(ErrorKind::IoError, path.string() + " is not a PNG file");
    }
    return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    auto* where = static_cast<std::string*>(png_get_error_ptr(png));
    *where = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// Reads all rows after the caller-supplied transform setup. Returns row bytes.
template <typename Setup>
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int& width, int& height, int& channels,
                                   Setup setup) {
    FilePtr f = open_for_read(path);
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::IoError, path.string() + ": " + message);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    setup(png, info);
    png_read_update_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               const std::vector<std::uint8_t>& pixels, int channels, const Palette* palette) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(ErrorKind::IoError, "cannot write " + path.string());
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    std::vector<png_color> pal;
    std::vector<png_const_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::IoError, path.string() + ": " + message);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (palette) {
        pal.resize(256);
        for (std::size_t i = 0; i < 256; ++i) {
            const auto c = i < palette->size() ? (*palette)[i] : std::array<std::uint8_t, 3>{0, 0, 0};
            pal[i] = {c[0], c[1], c[2]};
        }
        png_set_PLTE(png, info, pal.data(), 256);
    }
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
    png_write_rows(png, const_cast<png_bytepp>(rows.data()), height);
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

} // namespace

Image read_png_rgb(const std::filesystem::path& path) {
    int w = 0, h = 0, ch = 0;
    const auto px = read_png(path, w, h, ch, [](png_structp png, png_infop info) {
        const auto type = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    });
    if (ch != 3) fail(ErrorKind::IoError, path.string() + ": unsupported channel layout");
    Image img(h, w, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = px[i] / 255.0;
    return img;
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3) fail(ErrorKind::ShapeMismatch, "write_png_rgb expects 3 channels");
    std::vector<std::uint8_t> px(image.data.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
    }
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, px, 3, nullptr);
}

LabelMap read_png_labels(const std::filesystem::path& path) {
    int w = 0, h = 0, ch = 0;
    bool ok = true;
    const auto px = read_png(path, w, h, ch, [&](png_structp png, png_infop info) {
        const auto type = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);
        if (type == PNG_COLOR_TYPE_PALETTE) {
            if (depth < 8) png_set_packing(png);
        } else if (type == PNG_COLOR_TYPE_GRAY) {
            if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
            if (depth == 16) ok = false;
        } else {
            ok = false;
        }
    });
    if (!ok || ch != 1) fail(ErrorKind::IoError, path.string() + ": label maps must be 8-bit gray or indexed PNG");
    LabelMap m(h, w, 1);
    std::copy(px.begin(), px.end(), m.data.begin());
    return m;
}

void write_png_indexed(const std::filesystem::path& path, const LabelMap& labels, const Palette& palette) {
    if (labels.channels != 1) fail(ErrorKind::ShapeMismatch, "write_png_indexed expects one channel");
    write_png(path, labels.width, labels.height, PNG_COLOR_TYPE_PALETTE, labels.data, 1, &palette);
}

const Palette& class_palette() {
    static const Palette palette = [] {
        Palette p(256);
        const std::array<std::array<std::uint8_t, 3>, 8> base = {{{0, 0, 0},
                                                                  {230, 25, 75},
                                                                  {60, 180, 75},
                                                                  {0, 130, 200},
                                                                  {255, 225, 25},
                                                                  {145, 30, 180},
                                                                  {70, 240, 240},
                                                                  {245, 130, 48}}};
        for (int i = 0; i < 256; ++i) {
            if (i < 8) {
                p[i] = base[i];
            } else {
                p[i] = {static_cast<std::uint8_t>((i * 67) % 256), static_cast<std::uint8_t>((i * 151) % 256),
                        static_cast<std::uint8_t>((i * 29) % 256)};
            }
        }
        p[255] = {255, 255, 255};
        return p;
    }();
    return palette;
}

} // namespace semsplat
