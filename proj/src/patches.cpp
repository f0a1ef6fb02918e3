#include "patchstyle/patches.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace patchstyle {

StyleKind parse_style_kind(const std::string& name) {
    if (name == "stripes") return StyleKind::Stripes;
    if (name == "dashes") return StyleKind::Dashes;
    if (name == "dots") return StyleKind::Dots;
    throw ParamError("unknown style kind: " + name);
}

std::string style_kind_name(StyleKind kind) {
    switch (kind) {
        case StyleKind::Stripes: return "stripes";
        case StyleKind::Dashes: return "dashes";
        default: return "dots";
    }
}

bool is_empty(const GrayImage& patch, float tau) {
    for (float v : patch.pixels()) {
        if (v < tau) return false;
    }
    return true;
}

namespace {

int positive_mod(int v, int m) { return ((v % m) + m) % m; }

}  // namespace

GrayImage synth_style(const GrayImage& plain, const StyleSpec& spec) {
    if (spec.period < 1) throw ParamError("style period must be >= 1");
    if (spec.thickness < 0) throw ParamError("style thickness must be >= 0");
    GrayImage out = plain;
    for (int y = 0; y < plain.height(); ++y) {
        for (int x = 0; x < plain.width(); ++x) {
            if (!plain.ink_at(x, y)) continue;
            bool keep = true;
            switch (spec.kind) {
                case StyleKind::Stripes:
                    keep = positive_mod(x + y + spec.phase, spec.period) < spec.thickness;
                    break;
                case StyleKind::Dashes:
                    keep = positive_mod(x + spec.phase, spec.period) < spec.thickness;
                    break;
                case StyleKind::Dots:
                    keep = positive_mod(x + spec.phase, spec.period) < spec.thickness &&
                           positive_mod(y + spec.phase, spec.period) < spec.thickness;
                    break;
            }
            if (!keep) out.at(x, y) = 1.0f;
        }
    }
    return out;
}

std::vector<PatchPair> mine(const GrayImage& plain_exemplar, const GrayImage& styled_exemplar,
                            int patch_size, int rotation_step, int stride, int exemplar_id) {
    if (!plain_exemplar.same_size(styled_exemplar)) {
        throw DimensionError("mine: exemplar pair is not aligned (sizes differ)");
    }
    if (patch_size < 1 ||
        patch_size > std::min(plain_exemplar.width(), plain_exemplar.height())) {
        throw ParamError("mine: patch_size must fit inside the exemplar");
    }
    if (stride < 1) throw ParamError("mine: stride must be >= 1");
    if (rotation_step < 1 || rotation_step > 360) {
        throw ParamError("mine: rotation step must be in [1, 360]");
    }

    const float plain_bg = background_value(plain_exemplar);
    const float styled_bg = background_value(styled_exemplar);
    std::vector<PatchPair> out;
    const int rotations = 360 / rotation_step;
    for (int k = 0; k < rotations; ++k) {
        const int angle = k * rotation_step;
        const GrayImage rp = rotate(plain_exemplar, angle, plain_bg);
        const GrayImage rs = rotate(styled_exemplar, angle, styled_bg);
        for (int y = 0; y + patch_size <= rp.height(); y += stride) {
            for (int x = 0; x + patch_size <= rp.width(); x += stride) {
                GrayImage plain_patch = crop(rp, x, y, patch_size, patch_size);
                if (is_empty(plain_patch)) continue;
                out.push_back({std::move(plain_patch), crop(rs, x, y, patch_size, patch_size),
                               exemplar_id, x, y, angle});
            }
        }
    }
    if (out.empty()) throw ParamError("mine: no non-empty patches found (empty dataset)");
    return out;
}

namespace {

std::string pair_name(int index, const char* role) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.%s.pgm", index, role);
    return buf;
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<PatchPair>& pairs,
                  DatasetManifest manifest) {
    if (pairs.empty()) throw ParamError("save_dataset: nothing to save");
    manifest.pair_count = static_cast<int>(pairs.size());
    fs::create_directories(fs::path(dir) / "pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const fs::path base = fs::path(dir) / "pairs";
        save_pgm(pairs[i].plain, (base / pair_name(static_cast<int>(i), "plain")).string());
        save_pgm(pairs[i].styled, (base / pair_name(static_cast<int>(i), "styled")).string());
    }
    std::ofstream out(fs::path(dir) / "manifest.txt");
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << "patch_size=" << manifest.patch_size << "\n";
    out << "rotation_step=" << manifest.rotation_step << "\n";
    out << "stride=" << manifest.stride << "\n";
    out << "ink_threshold=" << manifest.ink_threshold << "\n";
    out << "pair_count=" << manifest.pair_count << "\n";
    for (const std::string& e : manifest.exemplars) out << "exemplar=" << e << "\n";
    if (!out) throw IoError("failed writing manifest in " + dir);
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.txt");
    if (!in) throw IoError("cannot open manifest in " + dir);
    DatasetManifest m;
    m.exemplars.clear();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed manifest line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "patch_size") m.patch_size = std::stoi(val);
            else if (key == "rotation_step") m.rotation_step = std::stoi(val);
            else if (key == "stride") m.stride = std::stoi(val);
            else if (key == "ink_threshold") m.ink_threshold = std::stof(val);
            else if (key == "pair_count") m.pair_count = std::stoi(val);
            else if (key == "exemplar") m.exemplars.push_back(val);
            else throw IoError("unknown manifest key: " + key);
        } catch (const std::invalid_argument&) {
            throw IoError("malformed manifest value: " + line);
        }
    }
    return m;
}

std::vector<PatchPair> load_dataset(const std::string& dir, DatasetManifest* manifest) {
    const DatasetManifest m = load_manifest(dir);
    if (manifest) *manifest = m;
    if (m.pair_count < 1) throw IoError("manifest in " + dir + " lists no pairs");
    std::vector<PatchPair> pairs;
    pairs.reserve(static_cast<std::size_t>(m.pair_count));
    const fs::path base = fs::path(dir) / "pairs";
    for (int i = 0; i < m.pair_count; ++i) {
        PatchPair pp;
        pp.plain = load_pgm((base / pair_name(i, "plain")).string());
        pp.styled = load_pgm((base / pair_name(i, "styled")).string());
        if (pp.plain.width() != m.patch_size || pp.plain.height() != m.patch_size ||
            !pp.plain.same_size(pp.styled)) {
            throw IoError("dataset pair " + std::to_string(i) + " does not match manifest size");
        }
        pairs.push_back(std::move(pp));
    }
    return pairs;
}

}  // namespace patchstyle
