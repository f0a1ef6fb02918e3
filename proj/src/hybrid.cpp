#include "patchstyle/hybrid.hpp"

#include <algorithm>

namespace patchstyle {

HybridMask sample_mask(int p, int delta, Rng& rng) {
    if (delta < 0) throw ParamError("sample_mask: delta must be >= 0");
    const int max_band = p / 2 - delta;
    if (max_band < 1) throw ParamError("sample_mask: need delta < p/2");
    auto draw = [&]() -> int {
        if (rng.uniform() < 0.5) return 0;
        return 1 + static_cast<int>(rng.uniform_u32(static_cast<std::uint32_t>(max_band)));
    };
    HybridMask m;
    m.t = draw();
    m.b = draw();
    m.l = draw();
    m.r = draw();
    return m;
}

GrayImage compose(const GrayImage& plain, const GrayImage& styled, const HybridMask& mask) {
    if (!plain.same_size(styled)) throw DimensionError("compose: patch sizes differ");
    const int w = plain.width(), h = plain.height();
    if (mask.t < 0 || mask.b < 0 || mask.l < 0 || mask.r < 0 || mask.t > h || mask.b > h ||
        mask.l > w || mask.r > w) {
        throw DimensionError("compose: mask extents out of range");
    }
    GrayImage out = plain;
    for (int y = 0; y < h; ++y) {
        const bool band_row = y < mask.t || y >= h - mask.b;
        for (int x = 0; x < w; ++x) {
            if (band_row || x < mask.l || x >= w - mask.r) out.at(x, y) = styled.at(x, y);
        }
    }
    return out;
}

HybridMask mask_from_committed(const std::vector<std::uint8_t>& committed, int p) {
    if (p < 1 || committed.size() != static_cast<std::size_t>(p) * p) {
        throw DimensionError("mask_from_committed: coverage grid is not p*p");
    }
    auto row_full = [&](int y) {
        for (int x = 0; x < p; ++x)
            if (!committed[static_cast<std::size_t>(y) * p + x]) return false;
        return true;
    };
    auto col_full = [&](int x) {
        for (int y = 0; y < p; ++y)
            if (!committed[static_cast<std::size_t>(y) * p + x]) return false;
        return true;
    };
    HybridMask m;
    while (m.t < p && row_full(m.t)) ++m.t;
    while (m.b < p - m.t && row_full(p - 1 - m.b)) ++m.b;
    while (m.l < p && col_full(m.l)) ++m.l;
    while (m.r < p - m.l && col_full(p - 1 - m.r)) ++m.r;
    return m;
}

}  // namespace patchstyle
