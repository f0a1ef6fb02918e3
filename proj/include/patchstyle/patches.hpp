#pragma once

#include <string>
#include <vector>

#include "patchstyle/image.hpp"

namespace patchstyle {

// Aligned (plain, styled) patch pair cut from the same exemplar location.
struct PatchPair {
    GrayImage plain;
    GrayImage styled;
    int exemplar_id = 0;
    int origin_x = 0;  // in the rotated exemplar
    int origin_y = 0;
    int rotation = 0;  // degrees
};

struct DatasetManifest {
    int patch_size = 64;
    int rotation_step = 8;
    int stride = 8;
    float ink_threshold = kInkThreshold;
    int pair_count = 0;
    std::vector<std::string> exemplars;
};

enum class StyleKind { Stripes, Dashes, Dots };

struct StyleSpec {
    StyleKind kind = StyleKind::Stripes;
    int period = 6;
    int phase = 0;
    int thickness = 3;
};

StyleKind parse_style_kind(const std::string& name);
std::string style_kind_name(StyleKind kind);

// True iff the patch holds no ink at all (no pixel below tau).
bool is_empty(const GrayImage& patch, float tau = kInkThreshold);

// Deterministic per-pixel styling restricted to the ink set: a kept ink pixel
// keeps its value, a dropped one becomes background; non-ink pixels pass
// through unchanged.
GrayImage synth_style(const GrayImage& plain, const StyleSpec& spec);

// Rotates both exemplars through k*d degrees (k = 0 .. 360/d - 1), slides a
// patch_size window on a stride grid over each rotated copy, and keeps every
// pair whose plain patch holds ink. Output order is fixed by (rotation, y, x).
std::vector<PatchPair> mine(const GrayImage& plain_exemplar, const GrayImage& styled_exemplar,
                            int patch_size, int rotation_step, int stride, int exemplar_id = 0);

// Dataset directory layout: pairs/NNNNNN.plain.pgm + pairs/NNNNNN.styled.pgm
// plus manifest.txt with key=value lines.
void save_dataset(const std::string& dir, const std::vector<PatchPair>& pairs,
                  DatasetManifest manifest);
DatasetManifest load_manifest(const std::string& dir);
std::vector<PatchPair> load_dataset(const std::string& dir, DatasetManifest* manifest = nullptr);

}  // namespace patchstyle
