#include <doctest.h>

#include <filesystem>
#include <set>

#include "patchstyle/patches.hpp"
#include "patchstyle/rng.hpp"
#include "support/sketch_gen.hpp"

using namespace patchstyle;
namespace fs = std::filesystem;

TEST_CASE("stripes follow the modular rule on a full-ink row") {
    GrayImage row(12, 1, 0.0f);
    const GrayImage s = synth_style(row, {StyleKind::Stripes, 6, 0, 3});
    for (int x = 0; x < 12; ++x) {
        const bool keep = x % 6 < 3;
        CHECK(s.at(x, 0) == (keep ? 0.0f : 1.0f));
    }
}

TEST_CASE("thickness equal to period styles nothing away") {
    const GrayImage sk = sketchgen::scribble(48, 48, 1);
    const GrayImage s = synth_style(sk, {StyleKind::Stripes, 6, 2, 6});
    CHECK(s.pixels() == sk.pixels());

    const GrayImage blank(32, 32, 1.0f);
    CHECK(synth_style(blank, {StyleKind::Dots, 4, 0, 2}).pixels() == blank.pixels());
}

TEST_CASE("dashes and dots apply their axis rules only on ink") {
    GrayImage sk(10, 10, 1.0f);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            if ((x + y) % 3 == 0) sk.at(x, y) = 0.2f;  // gray-ish ink keeps its value when kept

    const StyleSpec dash{StyleKind::Dashes, 4, 1, 2};
    const GrayImage sd = synth_style(sk, dash);
    const StyleSpec dots{StyleKind::Dots, 4, 1, 2};
    const GrayImage so = synth_style(sk, dots);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            if (!sk.ink_at(x, y)) {
                CHECK(sd.at(x, y) == sk.at(x, y));
                CHECK(so.at(x, y) == sk.at(x, y));
                continue;
            }
            const bool keep_dash = (x + 1) % 4 < 2;
            const bool keep_dots = keep_dash && (y + 1) % 4 < 2;
            CHECK(sd.at(x, y) == (keep_dash ? 0.2f : 1.0f));
            CHECK(so.at(x, y) == (keep_dots ? 0.2f : 1.0f));
        }
    }
}

TEST_CASE("phase wraps modulo the period, including negatives") {
    const GrayImage sk = sketchgen::scribble(40, 40, 2);
    const auto a = synth_style(sk, {StyleKind::Stripes, 5, 7, 2});
    const auto b = synth_style(sk, {StyleKind::Stripes, 5, 2, 2});
    const auto c = synth_style(sk, {StyleKind::Stripes, 5, -3, 2});
    CHECK(a.pixels() == b.pixels());
    CHECK(c.pixels() == b.pixels());
    CHECK_THROWS_AS(synth_style(sk, StyleSpec{StyleKind::Stripes, 0, 0, 1}), ParamError);
    CHECK_THROWS_AS(synth_style(sk, StyleSpec{StyleKind::Stripes, 4, 0, -1}), ParamError);
}

TEST_CASE("style kind names parse both ways") {
    for (StyleKind k : {StyleKind::Stripes, StyleKind::Dashes, StyleKind::Dots}) {
        CHECK(parse_style_kind(style_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(parse_style_kind("plaid"), ParamError);
}

TEST_CASE("emptiness is decided strictly below the ink threshold") {
    GrayImage ones(8, 8, 1.0f);
    CHECK(is_empty(ones));
    ones.at(3, 3) = 0.0f;
    CHECK_FALSE(is_empty(ones));
    const GrayImage nearly(8, 8, 0.49f);
    CHECK_FALSE(is_empty(nearly, 0.5f));  // 0.49 < 0.5 counts as ink
    const GrayImage at(8, 8, 0.5f);
    CHECK(is_empty(at, 0.5f));
}

TEST_CASE("a patch-sized exemplar with one rotation yields exactly one pair") {
    GrayImage plain(64, 64, 1.0f);
    sketchgen::draw_line(plain, 10, 10, 50, 50, 2.0);
    const GrayImage styled = synth_style(plain, {StyleKind::Stripes, 6, 0, 3});
    const auto pairs = mine(plain, styled, 64, 360, 8);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].origin_x == 0);
    CHECK(pairs[0].origin_y == 0);
    CHECK(pairs[0].rotation == 0);
    CHECK(pairs[0].plain.pixels() == plain.pixels());
    CHECK(pairs[0].styled.pixels() == styled.pixels());
}

TEST_CASE("rotation step 8 visits 45 rotated copies") {
    const GrayImage plain(16, 16, 0.0f);  // solid ink so every window survives
    const auto pairs = mine(plain, plain, 8, 8, 8);
    std::set<int> rotations;
    for (const auto& pp : pairs) rotations.insert(pp.rotation);
    CHECK(rotations.size() == 45);
    CHECK(*rotations.begin() == 0);
    CHECK(*rotations.rbegin() == 352);
}

TEST_CASE("mining is deterministic and ordered by rotation, y, x") {
    const GrayImage plain = sketchgen::scribble(96, 80, 3);
    const GrayImage styled = synth_style(plain, {StyleKind::Dashes, 8, 0, 4});
    const auto a = mine(plain, styled, 32, 90, 16);
    const auto b = mine(plain, styled, 32, 90, 16);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].plain.pixels() == b[i].plain.pixels());
        CHECK(a[i].styled.pixels() == b[i].styled.pixels());
        CHECK(a[i].origin_x == b[i].origin_x);
        CHECK(a[i].origin_y == b[i].origin_y);
        CHECK(a[i].rotation == b[i].rotation);
    }
    for (std::size_t i = 1; i < a.size(); ++i) {
        const auto key = [](const PatchPair& p) {
            return std::make_tuple(p.rotation, p.origin_y, p.origin_x);
        };
        CHECK(key(a[i - 1]) < key(a[i]));
    }
    for (const auto& pp : a) CHECK_FALSE(is_empty(pp.plain));
}

TEST_CASE("mined pairs stay aligned for identity styles") {
    const GrayImage plain = sketchgen::scribble(80, 80, 4);
    const GrayImage styled = synth_style(plain, {StyleKind::Stripes, 6, 0, 6});
    for (const auto& pp : mine(plain, styled, 32, 120, 24)) {
        CHECK(pp.plain.pixels() == pp.styled.pixels());
    }
}

TEST_CASE("mining rejects misalignment, oversize patches, and blank exemplars") {
    const GrayImage plain = sketchgen::scribble(64, 64, 5);
    CHECK_THROWS_AS(mine(plain, GrayImage(65, 64, 1.0f), 32, 360, 8), DimensionError);
    CHECK_THROWS_AS(mine(plain, plain, 65, 360, 8), ParamError);
    CHECK_THROWS_AS(mine(plain, plain, 32, 0, 8), ParamError);
    CHECK_THROWS_AS(mine(plain, plain, 32, 360, 0), ParamError);
    const GrayImage blank(64, 64, 1.0f);
    CHECK_THROWS_AS(mine(blank, blank, 32, 360, 8), ParamError);
}

TEST_CASE("datasets round-trip through the directory format") {
    GrayImage plain(72, 72, 1.0f);
    sketchgen::draw_circle(plain, 36, 36, 20, 2.5);
    const GrayImage styled = synth_style(plain, {StyleKind::Stripes, 6, 0, 3});
    const auto pairs = mine(plain, styled, 32, 90, 20);  // quarter turns stay binary
    REQUIRE(!pairs.empty());

    const fs::path dir = fs::temp_directory_path() / "ps_dataset_test";
    fs::remove_all(dir);
    DatasetManifest meta;
    meta.patch_size = 32;
    meta.rotation_step = 90;
    meta.stride = 20;
    meta.exemplars = {"circle"};
    save_dataset(dir.string(), pairs, meta);

    CHECK(fs::exists(dir / "manifest.txt"));
    CHECK(fs::exists(dir / "pairs" / "000000.plain.pgm"));

    DatasetManifest loaded_meta;
    const auto loaded = load_dataset(dir.string(), &loaded_meta);
    CHECK(loaded_meta.patch_size == 32);
    CHECK(loaded_meta.rotation_step == 90);
    CHECK(loaded_meta.stride == 20);
    CHECK(loaded_meta.pair_count == static_cast<int>(pairs.size()));
    REQUIRE(loaded_meta.exemplars.size() == 1);
    CHECK(loaded_meta.exemplars[0] == "circle");
    REQUIRE(loaded.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(loaded[i].plain.pixels() == pairs[i].plain.pixels());
        CHECK(loaded[i].styled.pixels() == pairs[i].styled.pixels());
    }

    fs::remove(dir / "pairs" / "000000.styled.pgm");
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_manifest(dir.string()), IoError);
}
