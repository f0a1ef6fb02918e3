#pragma once

#include <cstdint>
#include <vector>

#include "patchstyle/image.hpp"
#include "patchstyle/rng.hpp"

namespace patchstyle {

// Border-band extents (in pixels) that come from the styled patch.
struct HybridMask {
    int t = 0, b = 0, l = 0, r = 0;

    bool operator==(const HybridMask&) const = default;
};

// Each extent independently: 0 with probability 0.5, otherwise uniform over
// {1, ..., p/2 - delta}. Draw order is t, b, l, r.
HybridMask sample_mask(int p, int delta, Rng& rng);

// Starts from plain and overwrites the four border bands with styled pixels.
// Corners covered by two bands copy the same styled source, so application
// order does not matter. Band extents may reach p (inference full-masks).
GrayImage compose(const GrayImage& plain, const GrayImage& styled, const HybridMask& mask);

// Maximal fully-committed border bands of a p-by-p coverage grid (row-major,
// nonzero = committed). Opposing extents are clamped so t+b <= p and l+r <= p.
HybridMask mask_from_committed(const std::vector<std::uint8_t>& committed, int p);

}  // namespace patchstyle
