#include "patchstyle/stylize.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "patchstyle/errors.hpp"
#include "patchstyle/rng.hpp"
#include "patchstyle/tensor.hpp"

namespace patchstyle {

namespace {

bool window_has_ink(const GrayImage& img, int x0, int y0, int x1, int y1, float tau) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (img.at(x, y) < tau) return true;
    return false;
}

}  // namespace

PatchGrid build_grid(const GrayImage& sketch, int patch, int overlap) {
    if (patch < 1) throw ParamError("build_grid: patch size must be positive");
    if (overlap < 0 || overlap >= patch)
        throw ParamError("build_grid: overlap must satisfy 0 <= o < p");

    PatchGrid grid;
    grid.patch = patch;
    grid.overlap = overlap;
    grid.width = sketch.width();
    grid.height = sketch.height();
    grid.background = background_value(sketch);
    const int step = patch - overlap;
    grid.rows = (sketch.height() + step - 1) / step;
    grid.cols = (sketch.width() + step - 1) / step;
    grid.padded = GrayImage(grid.padded_width(), grid.padded_height(), grid.background);
    paste(grid.padded, sketch, 0, 0);
    return grid;
}

PatchGraph build_graph(const PatchGrid& grid, float tau_ink, RootPolicy policy,
                       std::uint64_t seed) {
    const int p = grid.patch;
    PatchGraph graph;
    std::vector<int> cell_node(static_cast<std::size_t>(grid.rows) * grid.cols, -1);
    auto cell = [&](int r, int c) -> int& {
        return cell_node[static_cast<std::size_t>(r) * grid.cols + c];
    };

    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const int ox = grid.origin_x(c), oy = grid.origin_y(r);
            if (window_has_ink(grid.padded, ox, oy, ox + p, oy + p, tau_ink)) {
                cell(r, c) = static_cast<int>(graph.nodes.size());
                graph.nodes.push_back({r, c});
            }
        }
    if (graph.nodes.empty()) throw ParamError("build_graph: sketch contains no ink");

    // Edge iff 4-neighbors and the shared o-wide band contains ink.
    auto band_inked = [&](int r, int c, int dr, int dc) {
        if (dc != 0) {  // horizontal neighbors share o columns
            const int cr = std::max(c, c + dc);
            const int x0 = grid.origin_x(cr);
            return window_has_ink(grid.padded, x0, grid.origin_y(r), x0 + grid.overlap,
                                  grid.origin_y(r) + p, tau_ink);
        }
        const int rb = std::max(r, r + dr);
        const int y0 = grid.origin_y(rb);
        return window_has_ink(grid.padded, grid.origin_x(c), y0, grid.origin_x(c) + p,
                              y0 + grid.overlap, tau_ink);
    };

    graph.adj.resize(graph.nodes.size());
    constexpr int kDirs[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};  // up, left, right, down
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto [r, c] = graph.nodes[i];
        for (const auto& d : kDirs) {
            const int nr = r + d[0], nc = c + d[1];
            if (nr < 0 || nr >= grid.rows || nc < 0 || nc >= grid.cols) continue;
            const int j = cell(nr, nc);
            if (j >= 0 && band_inked(r, c, d[0], d[1])) graph.adj[i].push_back(j);
        }
    }

    graph.component.assign(graph.nodes.size(), -1);
    Rng rng(seed);
    std::vector<std::uint8_t> queued(graph.nodes.size(), 0);
    int comp = 0;
    while (true) {
        std::vector<int> unvisited;
        for (std::size_t i = 0; i < graph.nodes.size(); ++i)
            if (!queued[i]) unvisited.push_back(static_cast<int>(i));
        if (unvisited.empty()) break;
        const int root = policy == RootPolicy::Raster
                             ? unvisited.front()
                             : unvisited[rng.uniform_u32(
                                   static_cast<std::uint32_t>(unvisited.size()))];
        graph.roots.push_back(root);
        std::deque<int> queue{root};
        queued[root] = 1;
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            graph.order.push_back(i);
            graph.component[i] = comp;
            for (int j : graph.adj[i])
                if (!queued[j]) {
                    queued[j] = 1;
                    queue.push_back(j);
                }
        }
        ++comp;
    }
    return graph;
}

namespace {

void validate_seed_region(const StylizeOptions& opt) {
    const SeedRegion& s = opt.seed_region;
    if (!opt.seed_exemplar)
        throw ParamError("stylize: orientation seed requires an exemplar image");
    if (s.x < 0 || s.y < 0 || s.w < 1 || s.h < 1 || s.x + s.w > opt.patch_size ||
        s.y + s.h > opt.patch_size)
        throw ParamError("stylize: seed region outside the patch window");
    if (s.x + s.w > opt.seed_exemplar->width() || s.y + s.h > opt.seed_exemplar->height())
        throw ParamError("stylize: seed region outside the exemplar");
}

}  // namespace

GrayImage stylize(const GrayImage& sketch, const PatchTranslator& translate,
                  const StylizeOptions& opt) {
    PatchGrid grid = build_grid(sketch, opt.patch_size, opt.overlap);
    PatchGraph graph = build_graph(grid, opt.tau_ink, opt.root_policy, opt.seed);
    if (opt.seed_region.enabled()) validate_seed_region(opt);

    const int p = grid.patch;
    const int pw = grid.padded_width(), ph = grid.padded_height();
    GrayImage canvas(pw, ph, grid.background);
    std::vector<std::uint8_t> committed(static_cast<std::size_t>(pw) * ph, 0);
    auto flat = [&](int x, int y) { return static_cast<std::size_t>(y) * pw + x; };

    std::vector<int> traversal;
    if (opt.order == TraversalOrder::Bfs) {
        traversal = graph.order;
    } else {
        traversal.resize(graph.nodes.size());  // nodes are already raster-ordered
        for (std::size_t i = 0; i < traversal.size(); ++i) traversal[i] = static_cast<int>(i);
    }

    bool first = true;
    for (int node : traversal) {
        const auto [row, col] = graph.nodes[static_cast<std::size_t>(node)];
        const int ox = grid.origin_x(col), oy = grid.origin_y(row);
        const bool seeding = first && opt.seed_region.enabled();
        const SeedRegion& sr = opt.seed_region;

        GrayImage hybrid(p, p);
        for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
                hybrid.at(x, y) = committed[flat(ox + x, oy + y)] ? canvas.at(ox + x, oy + y)
                                                                  : grid.padded.at(ox + x, oy + y);
        if (seeding) {
            for (int y = sr.y; y < sr.y + sr.h; ++y)
                for (int x = sr.x; x < sr.x + sr.w; ++x)
                    if (hybrid.at(x, y) < opt.tau_ink)
                        throw ParamError("stylize: seed region overlaps ink");
            for (int y = 0; y < sr.h; ++y)
                for (int x = 0; x < sr.w; ++x)
                    hybrid.at(sr.x + x, sr.y + y) = opt.seed_exemplar->at(sr.x + x, sr.y + y);
        }

        GrayImage out = translate(hybrid);
        if (out.width() != p || out.height() != p)
            throw DimensionError("stylize: translator returned a wrong-size patch");

        for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x) {
                if (seeding && x >= sr.x && x < sr.x + sr.w && y >= sr.y && y < sr.y + sr.h)
                    continue;  // pasted content is removed, pixels stay open
                const std::size_t i = flat(ox + x, oy + y);
                if (!committed[i]) {
                    canvas.at(ox + x, oy + y) = out.at(x, y);
                    committed[i] = 1;
                }
            }
        if (opt.observer) opt.observer(row, col, canvas, committed);
        first = false;
    }
    return crop(canvas, 0, 0, grid.width, grid.height);
}

GrayImage stylize(const GrayImage& sketch, const GeneratorSpec& gen,
                  const ModelParams<float>& params, const StylizeOptions& options) {
    PatchTranslator translate = [&](const GrayImage& hybrid) {
        Tape<float> tape;
        BoundParams<float> bound(tape, params);
        Tensor<float> y = generator_forward(gen, bound, image_to_tensor(tape, hybrid));
        return tensor_to_image(y);
    };
    return stylize(sketch, translate, options);
}

SeamLines seam_lines(int width, int height, int patch, int overlap) {
    if (patch < 1 || overlap < 0 || overlap >= patch)
        throw ParamError("seam_lines: bad patch/overlap");
    const int step = patch - overlap;
    SeamLines lines;
    auto collect = [&](int dim, std::vector<int>& out) {
        std::set<int> at;
        for (int j = 1; j * step < dim; ++j) at.insert(j * step);
        for (int j = 0; j * step < dim; ++j) at.insert(j * step + patch);
        for (int v : at)
            if (v > 0 && v < dim) out.push_back(v);
    };
    collect(width, lines.xs);
    collect(height, lines.ys);
    return lines;
}

double seam_metric(const GrayImage& image, int patch, int overlap, float tau_ink) {
    const SeamLines lines = seam_lines(image.width(), image.height(), patch, overlap);
    double total = 0.0;
    int inked_lines = 0;
    auto add_line = [&](auto&& pixel_pair, int span) {
        double diff = 0.0;
        bool ink = false;
        for (int t = 0; t < span; ++t) {
            const auto [a, b] = pixel_pair(t);
            diff += std::abs(a - b);
            ink = ink || a < tau_ink || b < tau_ink;
        }
        if (ink) {
            total += diff / span;
            ++inked_lines;
        }
    };
    for (int x : lines.xs)
        add_line(
            [&](int y) { return std::pair(image.at(x - 1, y), image.at(x, y)); },
            image.height());
    for (int y : lines.ys)
        add_line(
            [&](int x) { return std::pair(image.at(x, y - 1), image.at(x, y)); },
            image.width());
    return inked_lines == 0 ? 0.0 : total / inked_lines;
}

}  // namespace patchstyle
