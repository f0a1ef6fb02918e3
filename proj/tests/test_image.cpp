#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "patchstyle/image.hpp"
#include "patchstyle/rng.hpp"

using namespace patchstyle;

namespace {

GrayImage random_image(int w, int h, std::uint64_t seed) {
    GrayImage img(w, h);
    Rng rng(seed);
    for (float& v : img.pixels()) v = static_cast<float>(rng.uniform());
    return img;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("rotate by quarter turns permutes indices exactly") {
    const GrayImage img = random_image(7, 5, 42);
    const int W = img.width(), H = img.height();

    const GrayImage r90 = rotate(img, 90);
    REQUIRE(r90.width() == H);
    REQUIRE(r90.height() == W);
    for (int y = 0; y < r90.height(); ++y)
        for (int x = 0; x < r90.width(); ++x) CHECK(r90.at(x, y) == img.at(y, H - 1 - x));

    const GrayImage r180 = rotate(img, 180);
    REQUIRE(r180.width() == W);
    REQUIRE(r180.height() == H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) CHECK(r180.at(x, y) == img.at(W - 1 - x, H - 1 - y));

    const GrayImage r270 = rotate(img, 270);
    REQUIRE(r270.width() == H);
    for (int y = 0; y < r270.height(); ++y)
        for (int x = 0; x < r270.width(); ++x) CHECK(r270.at(x, y) == img.at(W - 1 - y, x));
}

TEST_CASE("rotate handles wraparound and negative angles") {
    const GrayImage img = random_image(6, 4, 7);
    const GrayImage a = rotate(img, -90);
    const GrayImage b = rotate(img, 270);
    REQUIRE(a.width() == b.width());
    CHECK(a.pixels() == b.pixels());
    const GrayImage c = rotate(img, 360);
    CHECK(c.pixels() == img.pixels());
}

TEST_CASE("four quarter turns compose to the identity") {
    const GrayImage img = random_image(9, 4, 3);
    GrayImage r = img;
    for (int i = 0; i < 4; ++i) r = rotate(r, 90);
    CHECK(r.pixels() == img.pixels());
}

TEST_CASE("oblique rotation grows the canvas and fills with background") {
    const GrayImage img(11, 11, 0.0f);  // all ink
    const GrayImage r = rotate(img, 45, 1.0f);
    const int expect = static_cast<int>(std::lround(10 * std::sqrt(2.0))) + 1;
    CHECK(r.width() == expect);
    CHECK(r.height() == expect);
    CHECK(r.at(0, 0) == 1.0f);                              // corner is fill
    CHECK(r.at(r.width() / 2, r.height() / 2) == 0.0f);     // center keeps content
    // content is preserved up to resampling: ink mass stays within the canvas
    CHECK(ink_count(r) > 11 * 11 / 2);
}

TEST_CASE("morphology matches its window definition") {
    const int r = 1;
    GrayImage img(9, 7, 1.0f);
    Rng rng(11);
    for (float& v : img.pixels()) v = rng.uniform() < 0.3 ? 0.0f : 1.0f;

    const GrayImage er = erode_ink(img, r);
    const GrayImage di = dilate_ink(img, r);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            bool all = true, any = false;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int sx = x + dx, sy = y + dy;
                    const bool ink = sx >= 0 && sx < img.width() && sy >= 0 && sy < img.height() &&
                                     img.ink_at(sx, sy);
                    all = all && ink;
                    any = any || ink;
                }
            }
            CHECK(er.at(x, y) == (all ? 0.0f : 1.0f));
            CHECK(di.at(x, y) == (any ? 0.0f : 1.0f));
        }
    }
}

TEST_CASE("dilate then erode restores an isolated square") {
    GrayImage img(9, 9, 1.0f);
    img.at(4, 4) = 0.0f;
    const GrayImage di = dilate_ink(img, 1);
    CHECK(ink_count(di) == 9);
    const GrayImage back = erode_ink(di, 1);
    CHECK(ink_count(back) == 1);
    CHECK(back.at(4, 4) == 0.0f);
}

TEST_CASE("even gaussian kernel anchors at offsets -size/2 .. size/2-1") {
    const auto k = gaussian_kernel1d(10, 10.0);
    REQUIRE(k.size() == 10);
    double sum = 0;
    for (float v : k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    // independent evaluation of the taps
    double w[10], tot = 0;
    for (int i = 0; i < 10; ++i) {
        const double d = i - 5;
        w[i] = std::exp(-d * d / 200.0);
        tot += w[i];
    }
    for (int i = 0; i < 10; ++i) CHECK(k[i] == doctest::Approx(w[i] / tot).epsilon(1e-6));
    CHECK(k[5] > k[4]);   // peak sits at offset 0
    CHECK(k[4] == doctest::Approx(k[6]).epsilon(1e-6));
}

TEST_CASE("gaussian blur of an interior impulse matches the separable product") {
    GrayImage img(21, 21, 0.0f);
    img.at(10, 10) = 1.0f;
    const int size = 5;
    const double sigma = 1.2;
    const GrayImage out = gaussian_blur(img, size, sigma);
    const auto k = gaussian_kernel1d(size, sigma);
    for (int y = 0; y < 21; ++y) {
        for (int x = 0; x < 21; ++x) {
            const int ox = 10 - x, oy = 10 - y;  // impulse offset as seen from (x, y)
            double expect = 0.0;
            if (ox >= -(size / 2) && ox <= size - 1 - size / 2 && oy >= -(size / 2) &&
                oy <= size - 1 - size / 2) {
                expect = static_cast<double>(k[static_cast<std::size_t>(ox + size / 2)]) *
                         k[static_cast<std::size_t>(oy + size / 2)];
            }
            CHECK(out.at(x, y) == doctest::Approx(expect).epsilon(1e-5));
        }
    }
}

TEST_CASE("gaussian blur preserves constant images including at edges") {
    const GrayImage img(8, 6, 0.7f);
    const GrayImage out = gaussian_blur(img, 10, 10.0);
    for (float v : out.pixels()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-5));
}

TEST_CASE("tensor blur agrees with image blur through the pixel mapping") {
    const GrayImage img = random_image(16, 12, 99);
    const GrayImage ref = gaussian_blur(img, 10, 10.0);
    Tape<float> tape;
    const Tensor<float> t = image_to_tensor(tape, img);
    const GrayImage got = tensor_to_image(gaussian_blur(t, 10, 10.0));
    REQUIRE(got.same_size(ref));
    for (std::size_t i = 0; i < got.pixels().size(); ++i) {
        CHECK(got.pixels()[i] == doctest::Approx(ref.pixels()[i]).epsilon(1e-4));
    }
}

TEST_CASE("background is the strict border majority, ties go to paper") {
    GrayImage white(10, 8, 1.0f);
    CHECK(background_value(white) == 1.0f);

    GrayImage black(10, 8, 0.0f);
    CHECK(background_value(black) == 0.0f);

    // interior pixels must not influence the vote
    GrayImage inked_center(10, 8, 1.0f);
    for (int y = 1; y < 7; ++y)
        for (int x = 1; x < 9; ++x) inked_center.at(x, y) = 0.0f;
    CHECK(background_value(inked_center) == 1.0f);

    // exactly half the border inked -> not a strict majority
    GrayImage half(4, 4, 1.0f);  // 12 border pixels
    int made = 0;
    for (int x = 0; x < 4 && made < 6; ++x)
        for (int y = 0; y < 4 && made < 6; ++y)
            if (x == 0 || x == 3 || y == 0 || y == 3) {
                half.at(x, y) = 0.0f;
                ++made;
            }
    CHECK(background_value(half) == 1.0f);
}

TEST_CASE("blank detection compares against the binarized background") {
    GrayImage img(5, 5, 0.9f);
    CHECK(is_blank(img, 1.0f));
    CHECK_FALSE(is_blank(img, 0.0f));
    img.at(2, 2) = 0.1f;
    CHECK_FALSE(is_blank(img, 1.0f));
}

TEST_CASE("crop and paste round-trip a sub-rectangle") {
    const GrayImage img = random_image(10, 9, 5);
    const GrayImage c = crop(img, 3, 2, 4, 5);
    REQUIRE(c.width() == 4);
    REQUIRE(c.height() == 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) CHECK(c.at(x, y) == img.at(3 + x, 2 + y));

    GrayImage dst(10, 9, 1.0f);
    paste(dst, c, 3, 2);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) CHECK(dst.at(3 + x, 2 + y) == img.at(3 + x, 2 + y));
    CHECK_THROWS_AS(crop(img, 8, 0, 4, 4), DimensionError);
    CHECK_THROWS_AS(paste(dst, c, 7, 7), DimensionError);
}

TEST_CASE("pgm round trip is exact at 8 bits") {
    const GrayImage img = random_image(17, 13, 21);
    const auto path = temp_file("ps_roundtrip.pgm");
    save_pgm(img, path.string());
    const GrayImage back = load_pgm(path.string());
    REQUIRE(back.same_size(img));
    for (std::size_t i = 0; i < img.pixels().size(); ++i) {
        CHECK(back.pixels()[i] == doctest::Approx(img.pixels()[i]).epsilon(0.51 / 255));
    }
    std::filesystem::remove(path);
}

TEST_CASE("pgm parser tolerates comments and rejects junk") {
    const auto path = temp_file("ps_manual.pgm");
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("P5\n# a comment\n2 2\n# another\n255\n", f);
        const unsigned char px[4] = {0, 85, 170, 255};
        std::fwrite(px, 1, 4, f);
        std::fclose(f);
    }
    const GrayImage img = load_pgm(path.string());
    REQUIRE(img.width() == 2);
    REQUIRE(img.height() == 2);
    CHECK(img.at(0, 0) == 0.0f);
    CHECK(img.at(1, 1) == 1.0f);
    CHECK(img.at(1, 0) == doctest::Approx(85.0 / 255).epsilon(1e-6));
    std::filesystem::remove(path);

    const auto bad = temp_file("ps_bad.pgm");
    {
        std::FILE* f = std::fopen(bad.string().c_str(), "wb");
        std::fputs("P5\n4 4\n255\nxx", f);  // truncated raster
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_pgm(bad.string()), IoError);
    std::filesystem::remove(bad);
    CHECK_THROWS_AS(load_pgm("/nonexistent/nope.pgm"), IoError);
}

TEST_CASE("png round trip is exact at 8 bits") {
    const GrayImage img = random_image(19, 11, 77);
    const auto path = temp_file("ps_roundtrip.png");
    save_png(img, path.string());
    const GrayImage back = load_png(path.string());
    REQUIRE(back.same_size(img));
    for (std::size_t i = 0; i < img.pixels().size(); ++i) {
        CHECK(back.pixels()[i] == doctest::Approx(img.pixels()[i]).epsilon(0.51 / 255));
    }
    std::filesystem::remove(path);
}

TEST_CASE("image loading dispatches on extension") {
    const GrayImage img = random_image(4, 4, 1);
    const auto png = temp_file("ps_dispatch.png");
    save_image(img, png.string());
    CHECK(load_image(png.string()).same_size(img));
    std::filesystem::remove(png);
    CHECK_THROWS_AS(load_image("file.bmp"), IoError);
    CHECK_THROWS_AS(save_image(img, "file.bmp"), IoError);
}

TEST_CASE("pixel mapping to activations is an involution with ink positive") {
    GrayImage img(3, 1, 1.0f);
    img.at(0, 0) = 0.0f;   // ink
    img.at(1, 0) = 0.25f;
    Tape<float> tape;
    const Tensor<float> t = image_to_tensor(tape, img);
    REQUIRE(t.shape() == Shape{1, 1, 1, 3});
    CHECK(t.values()[0] == 1.0f);    // ink maps to +1
    CHECK(t.values()[1] == 0.5f);
    CHECK(t.values()[2] == -1.0f);   // paper maps to -1
    const GrayImage back = tensor_to_image(t);
    for (int x = 0; x < 3; ++x) CHECK(back.at(x, 0) == img.at(x, 0));

    // out-of-range activations clamp on the way back
    const Tensor<float> wild = tape.constant({1, 1, 1, 2}, {3.0f, -4.0f});
    const GrayImage clamped = tensor_to_image(wild);
    CHECK(clamped.at(0, 0) == 0.0f);
    CHECK(clamped.at(1, 0) == 1.0f);
}

TEST_CASE("batched image conversion stacks along N") {
    std::vector<GrayImage> imgs = {random_image(4, 3, 2), random_image(4, 3, 9)};
    Tape<float> tape;
    const Tensor<float> t = images_to_tensor(tape, imgs);
    REQUIRE(t.shape() == Shape{2, 1, 3, 4});
    const GrayImage second = tensor_to_image(t, 1);
    for (std::size_t i = 0; i < second.pixels().size(); ++i) {
        CHECK(second.pixels()[i] == doctest::Approx(imgs[1].pixels()[i]).epsilon(1e-6));
    }
    imgs.push_back(random_image(5, 3, 1));
    CHECK_THROWS_AS(images_to_tensor(tape, imgs), DimensionError);
}
