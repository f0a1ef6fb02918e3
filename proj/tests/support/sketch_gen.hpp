#pragma once

#include <cmath>

#include "patchstyle/image.hpp"
#include "patchstyle/rng.hpp"

// Procedural sketches for tests: black strokes on white paper.
namespace sketchgen {

inline void stamp_disk(patchstyle::GrayImage& img, double cx, double cy, double r) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(x, y) = 0.0f;
}

inline void draw_line(patchstyle::GrayImage& img, double x0, double y0, double x1, double y1,
                      double half_width) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        stamp_disk(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), half_width);
    }
}

inline void draw_circle(patchstyle::GrayImage& img, double cx, double cy, double radius,
                        double half_width) {
    const int steps = std::max(8, static_cast<int>(std::ceil(radius * 8)));
    for (int i = 0; i < steps; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * i / steps;
        stamp_disk(img, cx + radius * std::cos(a), cy + radius * std::sin(a), half_width);
    }
}

// A sketch with strokes spread widely enough that most patch windows see ink.
inline patchstyle::GrayImage scribble(int w, int h, std::uint64_t seed, int strokes = 6,
                                      double half_width = 2.0) {
    patchstyle::GrayImage img(w, h, 1.0f);
    patchstyle::Rng rng(seed);
    auto px = [&](int lim) { return 4 + static_cast<double>(rng.uniform_u32(static_cast<std::uint32_t>(lim - 8))); };
    for (int i = 0; i < strokes; ++i) {
        if (rng.uniform() < 0.3) {
            draw_circle(img, px(w), px(h), 5 + rng.uniform() * (std::min(w, h) / 4.0), half_width);
        } else {
            draw_line(img, px(w), px(h), px(w), px(h), half_width);
        }
    }
    return img;
}

}  // namespace sketchgen
