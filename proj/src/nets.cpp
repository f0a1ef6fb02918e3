#include "patchstyle/nets.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace patchstyle {

std::vector<std::pair<std::string, Shape>> generator_slots(const GeneratorSpec& spec) {
    if (spec.base_width < 1 || spec.down_levels < 0 || spec.res_blocks < 0) {
        throw ParamError("generator spec fields must be positive");
    }
    std::vector<std::pair<std::string, Shape>> out;
    auto conv = [&](const std::string& name, int cout, int cin, int k) {
        out.emplace_back(name + ".w", Shape{cout, cin, k, k});
        out.emplace_back(name + ".b", Shape{cout});
    };
    int w = spec.base_width;
    conv("g.in", w, 1, 7);
    for (int l = 0; l < spec.down_levels; ++l) {
        conv("g.down" + std::to_string(l), w * 2, w, 3);
        w *= 2;
    }
    for (int r = 0; r < spec.res_blocks; ++r) {
        conv("g.res" + std::to_string(r) + ".c1", w, w, 3);
        conv("g.res" + std::to_string(r) + ".c2", w, w, 3);
    }
    for (int l = spec.down_levels - 1; l >= 0; --l) {
        // transposed conv kernels are [C_in, C_out, kh, kw]
        out.emplace_back("g.up" + std::to_string(l) + ".w", Shape{w, w / 2, 4, 4});
        out.emplace_back("g.up" + std::to_string(l) + ".b", Shape{w / 2});
        w /= 2;
    }
    conv("g.out", 1, w, 7);
    return out;
}

std::vector<std::pair<std::string, Shape>> discriminator_slots(const DiscriminatorSpec& spec) {
    if (spec.widths.empty()) throw ParamError("discriminator needs at least one layer width");
    for (int w : spec.widths) {
        if (w < 1) throw ParamError("discriminator widths must be positive");
    }
    std::vector<std::pair<std::string, Shape>> out;
    int cin = 1;
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        const int cout = spec.widths[i];
        out.emplace_back("d.l" + std::to_string(i) + ".w", Shape{cout, cin, 4, 4});
        out.emplace_back("d.l" + std::to_string(i) + ".b", Shape{cout});
        cin = cout;
    }
    out.emplace_back("d.out.w", Shape{1, cin, 4, 4});
    out.emplace_back("d.out.b", Shape{1});
    return out;
}

int receptive_field(const DiscriminatorSpec& spec) {
    int rf = 1;
    rf = (rf - 1) + 4;  // final score conv, stride 1
    for (std::size_t i = spec.widths.size(); i-- > 0;) {
        const int stride = i + 1 < spec.widths.size() ? 2 : 1;
        rf = (rf - 1) * stride + 4;
    }
    return rf;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

constexpr std::uint32_t kMagic = 0x50535459;  // "PSTY"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const GeneratorSpec& gen, const DiscriminatorSpec& disc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    put(out, kMagic);
    put(out, kVersion);
    put(out, params.seed);
    put(out, static_cast<std::int32_t>(gen.base_width));
    put(out, static_cast<std::int32_t>(gen.down_levels));
    put(out, static_cast<std::int32_t>(gen.res_blocks));
    put(out, static_cast<std::uint32_t>(disc.widths.size()));
    for (int w : disc.widths) put(out, static_cast<std::int32_t>(w));
    put(out, disc.leaky_slope);
    put(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& slot : params.slots()) {
        put(out, static_cast<std::uint32_t>(slot.name.size()));
        out.write(slot.name.data(), static_cast<std::streamsize>(slot.name.size()));
        put(out, static_cast<std::uint32_t>(slot.shape.size()));
        for (int d : slot.shape) put(out, static_cast<std::int32_t>(d));
        out.write(reinterpret_cast<const char*>(slot.values.data()),
                  static_cast<std::streamsize>(slot.values.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    if (get<std::uint32_t>(in, path) != kMagic) throw IoError("not a checkpoint file: " + path);
    if (get<std::uint32_t>(in, path) != kVersion) {
        throw IoError("unsupported checkpoint version: " + path);
    }
    Checkpoint ck;
    ck.params.seed = get<std::uint64_t>(in, path);
    ck.gen.base_width = get<std::int32_t>(in, path);
    ck.gen.down_levels = get<std::int32_t>(in, path);
    ck.gen.res_blocks = get<std::int32_t>(in, path);
    const auto nw = get<std::uint32_t>(in, path);
    if (nw > 64) throw IoError("implausible discriminator depth: " + path);
    ck.disc.widths.clear();
    for (std::uint32_t i = 0; i < nw; ++i) ck.disc.widths.push_back(get<std::int32_t>(in, path));
    ck.disc.leaky_slope = get<float>(in, path);
    const auto nslots = get<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < nslots; ++i) {
        const auto name_len = get<std::uint32_t>(in, path);
        if (name_len > 4096) throw IoError("implausible slot name length: " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = get<std::uint32_t>(in, path);
        if (rank < 1 || rank > 8) throw IoError("implausible slot rank: " + path);
        Shape shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::int32_t>(in, path));
        const std::int64_t n = numel(shape);
        if (n < 1 || n > (std::int64_t{1} << 30)) throw IoError("implausible slot size: " + path);
        std::vector<float> values(static_cast<std::size_t>(n));
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(float)));
        if (!in) throw IoError("truncated checkpoint: " + path);
        ck.params.add(std::move(name), std::move(shape), std::move(values));
    }
    return ck;
}

}  // namespace patchstyle
