#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "patchstyle/image.hpp"
#include "patchstyle/nets.hpp"

namespace patchstyle {

// Overlapping window layout over a sketch plus the background-padded copy
// the translation reads from. Window (i, j) starts at ((p-o)*j, (p-o)*i).
struct PatchGrid {
    int patch = 0;
    int overlap = 0;
    int rows = 0;
    int cols = 0;
    int width = 0;  // original sketch dims
    int height = 0;
    float background = 1.0f;
    GrayImage padded;

    int step() const { return patch - overlap; }
    int origin_x(int col) const { return step() * col; }
    int origin_y(int row) const { return step() * row; }
    int padded_width() const { return step() * (cols - 1) + patch; }
    int padded_height() const { return step() * (rows - 1) + patch; }
};

PatchGrid build_grid(const GrayImage& sketch, int patch, int overlap);

enum class RootPolicy { Raster, Random };
enum class TraversalOrder { Bfs, Raster };

// Non-empty grid cells, 4-neighbor edges whose shared overlap band contains
// ink, and a per-component BFS traversal.
struct PatchGraph {
    struct Node {
        int row = 0;
        int col = 0;
    };
    std::vector<Node> nodes;            // raster order
    std::vector<std::vector<int>> adj;  // neighbor node indices, up/left/right/down
    std::vector<int> order;             // node indices in traversal order
    std::vector<int> component;         // component id per node
    std::vector<int> roots;             // one node index per component
};

PatchGraph build_graph(const PatchGrid& grid, float tau_ink = kInkThreshold,
                       RootPolicy policy = RootPolicy::Raster, std::uint64_t seed = 0);

// Maps one p-by-p hybrid window to its styled translation.
using PatchTranslator = std::function<GrayImage(const GrayImage&)>;

// Optional orientation seed: an exemplar sub-rectangle pasted into an empty
// region of the first root's hybrid, excluded from the committed output.
struct SeedRegion {
    int x = 0, y = 0, w = 0, h = 0;
    bool enabled() const { return w > 0 && h > 0; }
};

struct StylizeOptions {
    int patch_size = 64;
    int overlap = 16;
    float tau_ink = kInkThreshold;
    RootPolicy root_policy = RootPolicy::Raster;
    TraversalOrder order = TraversalOrder::Bfs;
    std::uint64_t seed = 0;
    const GrayImage* seed_exemplar = nullptr;
    SeedRegion seed_region;
    // Called after each translation with the evolving padded canvas.
    std::function<void(int row, int col, const GrayImage& canvas,
                       const std::vector<std::uint8_t>& committed)>
        observer;
};

GrayImage stylize(const GrayImage& sketch, const PatchTranslator& translate,
                  const StylizeOptions& options = {});
GrayImage stylize(const GrayImage& sketch, const GeneratorSpec& gen,
                  const ModelParams<float>& params, const StylizeOptions& options = {});

// Interior window-edge lines of the grid layout, deduplicated and clipped to
// the image: candidate seam locations.
struct SeamLines {
    std::vector<int> xs, ys;
};
SeamLines seam_lines(int width, int height, int patch, int overlap);

// Mean absolute difference across each seam line (one-pixel band per side),
// averaged over the lines that touch ink.
double seam_metric(const GrayImage& image, int patch, int overlap,
                   float tau_ink = kInkThreshold);

}  // namespace patchstyle
