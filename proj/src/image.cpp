#include "patchstyle/image.hpp"

#include <algorithm>
#include <cmath>

namespace patchstyle {

GrayImage::GrayImage(int width, int height, float fill) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        throw DimensionError("image dims must be positive, got " + std::to_string(width) + "x" +
                             std::to_string(height));
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

namespace {

GrayImage rotate_quarter(const GrayImage& img, int quarter) {
    const int W = img.width(), H = img.height();
    switch (quarter) {
        case 0:
            return img;
        case 1: {
            GrayImage out(H, W);
            for (int y = 0; y < W; ++y)
                for (int x = 0; x < H; ++x) out.at(x, y) = img.at(y, H - 1 - x);
            return out;
        }
        case 2: {
            GrayImage out(W, H);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) out.at(x, y) = img.at(W - 1 - x, H - 1 - y);
            return out;
        }
        default: {
            GrayImage out(H, W);
            for (int y = 0; y < W; ++y)
                for (int x = 0; x < H; ++x) out.at(x, y) = img.at(W - 1 - y, x);
            return out;
        }
    }
}

float sample_bilinear(const GrayImage& img, double sx, double sy, float fill) {
    const int W = img.width(), H = img.height();
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    auto tap = [&](int x, int y) -> double {
        return (x < 0 || x >= W || y < 0 || y >= H) ? fill : img.at(x, y);
    };
    const double top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1, y0) * fx;
    const double bot = tap(x0, y0 + 1) * (1.0 - fx) + tap(x0 + 1, y0 + 1) * fx;
    const double v = top * (1.0 - fy) + bot * fy;
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

}  // namespace

GrayImage rotate(const GrayImage& img, double degrees, float fill) {
    double deg = std::fmod(degrees, 360.0);
    if (deg < 0) deg += 360.0;
    const double q = deg / 90.0;
    if (q == std::floor(q)) return rotate_quarter(img, static_cast<int>(q));

    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const int W = img.width(), H = img.height();
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;

    // extent of the rotated corner points fixes the canvas
    double minx = 0, maxx = 0, miny = 0, maxy = 0;
    const double corners[4][2] = {{0, 0},
                                  {static_cast<double>(W - 1), 0},
                                  {0, static_cast<double>(H - 1)},
                                  {static_cast<double>(W - 1), static_cast<double>(H - 1)}};
    for (int i = 0; i < 4; ++i) {
        const double dx = corners[i][0] - cx, dy = corners[i][1] - cy;
        const double rx = c * dx - s * dy, ry = s * dx + c * dy;
        minx = std::min(minx, rx);
        maxx = std::max(maxx, rx);
        miny = std::min(miny, ry);
        maxy = std::max(maxy, ry);
    }
    const int newW = static_cast<int>(std::lround(maxx - minx)) + 1;
    const int newH = static_cast<int>(std::lround(maxy - miny)) + 1;
    const double ox = (newW - 1) / 2.0, oy = (newH - 1) / 2.0;

    GrayImage out(newW, newH, fill);
    for (int y = 0; y < newH; ++y) {
        for (int x = 0; x < newW; ++x) {
            const double dx = x - ox, dy = y - oy;
            // inverse rotation back into source coordinates
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            if (sx < -1.0 || sx > W || sy < -1.0 || sy > H) continue;
            out.at(x, y) = sample_bilinear(img, sx, sy, fill);
        }
    }
    return out;
}

GrayImage crop(const GrayImage& img, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > img.width() || y + h > img.height()) {
        throw DimensionError("crop rect out of bounds");
    }
    GrayImage out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int cix = 0; cix < w; ++cix) out.at(cix, r) = img.at(x + cix, y + r);
    }
    return out;
}

void paste(GrayImage& dst, const GrayImage& src, int x, int y) {
    if (x < 0 || y < 0 || x + src.width() > dst.width() || y + src.height() > dst.height()) {
        throw DimensionError("paste rect out of bounds");
    }
    for (int r = 0; r < src.height(); ++r) {
        for (int cix = 0; cix < src.width(); ++cix) dst.at(x + cix, y + r) = src.at(cix, r);
    }
}

namespace {

GrayImage morph_ink(const GrayImage& img, int radius, bool erode) {
    if (radius < 0) throw DimensionError("morphology radius must be >= 0");
    const int W = img.width(), H = img.height();
    GrayImage out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            // erode: ink survives only when the whole window is ink
            // dilate: ink appears when any window pixel is ink
            bool ink = erode;
            for (int dy = -radius; dy <= radius && ink == erode; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int sx = x + dx, sy = y + dy;
                    const bool in = sx >= 0 && sx < W && sy >= 0 && sy < H;
                    const bool pix_ink = in && img.ink_at(sx, sy);
                    if (erode && !pix_ink) {
                        ink = false;
                        break;
                    }
                    if (!erode && pix_ink) {
                        ink = true;
                        break;
                    }
                }
            }
            out.at(x, y) = ink ? 0.0f : 1.0f;
        }
    }
    return out;
}

}  // namespace

GrayImage erode_ink(const GrayImage& img, int radius) { return morph_ink(img, radius, true); }
GrayImage dilate_ink(const GrayImage& img, int radius) { return morph_ink(img, radius, false); }

std::vector<float> gaussian_kernel1d(int size, double sigma) {
    if (size < 1) throw DimensionError("gaussian kernel size must be >= 1");
    if (!(sigma > 0)) throw DimensionError("gaussian sigma must be positive");
    std::vector<double> w(static_cast<std::size_t>(size));
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - size / 2;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    std::vector<float> out(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<float>(w[static_cast<std::size_t>(i)] / sum);
    }
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, int size, double sigma) {
    const std::vector<float> taps = gaussian_kernel1d(size, sigma);
    const int W = img.width(), H = img.height();
    const int lo = size / 2;
    auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };

    GrayImage tmp(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double acc = 0;
            for (int i = 0; i < size; ++i) acc += taps[static_cast<std::size_t>(i)] * img.at(clampi(x + i - lo, W), y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    }
    GrayImage out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double acc = 0;
            for (int i = 0; i < size; ++i) acc += taps[static_cast<std::size_t>(i)] * tmp.at(x, clampi(y + i - lo, H));
            out.at(x, y) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    }
    return out;
}

float background_value(const GrayImage& img) {
    const int W = img.width(), H = img.height();
    std::int64_t border = 0, ink = 0;
    auto visit = [&](int x, int y) {
        ++border;
        if (img.ink_at(x, y)) ++ink;
    };
    for (int x = 0; x < W; ++x) {
        visit(x, 0);
        if (H > 1) visit(x, H - 1);
    }
    for (int y = 1; y + 1 < H; ++y) {
        visit(0, y);
        if (W > 1) visit(W - 1, y);
    }
    return 2 * ink > border ? 0.0f : 1.0f;
}

bool is_blank(const GrayImage& img, float background) {
    const bool bg_ink = is_ink(background);
    for (float v : img.pixels()) {
        if (is_ink(v) != bg_ink) return false;
    }
    return true;
}

std::int64_t ink_count(const GrayImage& img) {
    std::int64_t n = 0;
    for (float v : img.pixels()) n += is_ink(v) ? 1 : 0;
    return n;
}

}  // namespace patchstyle
