#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <png.h>

#include "patchstyle/image.hpp"

namespace patchstyle {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// next whitespace-delimited token, skipping '#' comments
int next_pnm_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed PGM header: " + path);
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1 << 30) throw IoError("PGM header value out of range: " + path);
        c = in.get();
    }
    if (c != EOF) in.unget();
    return v;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
    const int w = next_pnm_int(in, path);
    const int h = next_pnm_int(in, path);
    const int maxval = next_pnm_int(in, path);
    if (w < 1 || h < 1) throw IoError("bad PGM dimensions in " + path);
    if (maxval < 1 || maxval > 255) throw IoError("unsupported PGM maxval in " + path);
    in.get();  // single whitespace byte before raster
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError("truncated PGM raster in " + path);
    }
    GrayImage img(w, h);
    auto& px = img.pixels();
    for (std::size_t i = 0; i < raw.size(); ++i) px[i] = static_cast<float>(raw[i]) / maxval;
    return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.pixel_count()));
    const auto& px = img.pixels();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float v = std::clamp(px[i], 0.0f, 1.0f);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("failed writing " + path);
}

GrayImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raw;
    int w = 0, h = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("expected 8-bit grayscale PNG: " + path);
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    raw.assign(static_cast<std::size_t>(w) * h, 0);
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage img(w, h);
    auto& px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

void save_png(const GrayImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png init failed");
    }
    const int w = img.width(), h = img.height();
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    const auto& px = img.pixels();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(px[i], 0.0f, 1.0f) * 255.0f));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + static_cast<std::size_t>(y) * w;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage load_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return load_png(path);
    if (ext == "pgm") return load_pgm(path);
    throw IoError("unsupported image extension: " + path);
}

void save_image(const GrayImage& img, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") {
        save_png(img, path);
    } else if (ext == "pgm") {
        save_pgm(img, path);
    } else {
        throw IoError("unsupported image extension: " + path);
    }
}

}  // namespace patchstyle
