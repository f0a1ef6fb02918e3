#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "patchstyle/cli.hpp"
#include "patchstyle/image.hpp"
#include "support/sketch_gen.hpp"

namespace fs = std::filesystem;
using namespace patchstyle;

namespace {

// Runs the CLI in-process with stdout/stderr captured.
int cli(const std::vector<std::string>& args, std::string* out = nullptr,
        std::string* err = nullptr) {
    std::vector<std::string> full;
    full.emplace_back("patchstyle");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(full.size());
    for (std::string& s : full) argv.push_back(s.data());

    std::ostringstream cap_out, cap_err;
    auto* old_out = std::cout.rdbuf(cap_out.rdbuf());
    auto* old_err = std::cerr.rdbuf(cap_err.rdbuf());
    int rc = -1;
    try {
        rc = run_cli(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    if (out) *out = cap_out.str();
    if (err) *err = cap_err.str();
    return rc;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// U shape whose arms connect only through the bottom cells (the component is
// raster-discontinuous, so bfs and raster traversals condition differently).
GrayImage u_shaped_sketch() {
    GrayImage img(160, 160, 1.0f);
    for (int y = 10; y <= 150; ++y) {
        img.at(20, y) = 0.0f;
        img.at(140, y) = 0.0f;
    }
    for (int x = 20; x <= 140; ++x) img.at(x, 150) = 0.0f;
    return img;
}

}  // namespace

TEST_CASE("identity stylize reproduces the sketch and prints its config") {
    const fs::path dir = fresh_dir("ps_cli_identity");
    GrayImage sketch = sketchgen::scribble(140, 120, 5, 6, 2.0);
    save_pgm(sketch, (dir / "in.pgm").string());

    std::string out;
    const int rc = cli({"stylize", "--input", (dir / "in.pgm").string(), "--output",
                        (dir / "out.pgm").string(), "--identity"},
                       &out);
    CHECK(rc == 0);
    CHECK(contains(out, "resolved config: stylize"));
    CHECK(contains(out, "translator=identity"));
    GrayImage round = load_pgm((dir / "out.pgm").string());
    CHECK(round.pixels() == load_pgm((dir / "in.pgm").string()).pixels());
    fs::remove_all(dir);
}

TEST_CASE("pre-processing flag matches the library morphology") {
    const fs::path dir = fresh_dir("ps_cli_pre");
    GrayImage sketch = sketchgen::scribble(100, 100, 8, 5, 2.0);
    save_pgm(sketch, (dir / "in.pgm").string());

    const int rc = cli({"stylize", "--input", (dir / "in.pgm").string(), "--output",
                        (dir / "out.pgm").string(), "--identity", "--pre", "dilate:1"});
    REQUIRE(rc == 0);
    GrayImage expect = dilate_ink(load_pgm((dir / "in.pgm").string()), 1);
    CHECK(load_pgm((dir / "out.pgm").string()).pixels() == expect.pixels());

    std::string err;
    CHECK(cli({"stylize", "--input", (dir / "in.pgm").string(), "--output",
               (dir / "x.pgm").string(), "--identity", "--pre", "smudge:1"},
              nullptr, &err) != 0);
    CHECK(contains(err, "--pre"));
    fs::remove_all(dir);
}

TEST_CASE("mine rejects mismatched exemplar sizes with a one-line diagnostic") {
    const fs::path dir = fresh_dir("ps_cli_mine");
    save_pgm(GrayImage(90, 90, 1.0f), (dir / "a.pgm").string());
    save_pgm(GrayImage(80, 90, 1.0f), (dir / "b.pgm").string());

    std::string err;
    const int rc = cli({"mine", "--plain", (dir / "a.pgm").string(), "--styled",
                        (dir / "b.pgm").string(), "--output", (dir / "ds").string()},
                       nullptr, &err);
    CHECK(rc != 0);
    CHECK(contains(err, "not aligned"));
    fs::remove_all(dir);
}

TEST_CASE("unknown flags are rejected") {
    std::string err;
    CHECK(cli({"gradcheck", "--frobnicate"}, nullptr, &err) != 0);
    CHECK(cli({"bogus-command"}, nullptr, &err) != 0);
}

TEST_CASE("config file fills unset options and flags override it") {
    const fs::path dir = fresh_dir("ps_cli_config");
    save_pgm(sketchgen::scribble(90, 90, 3, 4, 2.0), (dir / "in.pgm").string());
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "[synth-style]\nperiod=9\nthickness=2\n";
    }

    std::string out;
    REQUIRE(cli({"synth-style", "--input", (dir / "in.pgm").string(), "--output",
                 (dir / "s1.pgm").string(), "--config", (dir / "run.cfg").string()},
                &out) == 0);
    CHECK(contains(out, "period=9"));
    CHECK(contains(out, "thickness=2"));

    REQUIRE(cli({"synth-style", "--input", (dir / "in.pgm").string(), "--output",
                 (dir / "s2.pgm").string(), "--config", (dir / "run.cfg").string(),
                 "--thickness", "4"},
                &out) == 0);
    CHECK(contains(out, "period=9"));      // still from the file
    CHECK(contains(out, "thickness=4"));   // flag wins

    std::string err;
    CHECK(cli({"synth-style", "--input", (dir / "in.pgm").string(), "--output",
               (dir / "s3.pgm").string(), "--config", (dir / "missing.cfg").string()},
              nullptr, &err) != 0);
    fs::remove_all(dir);
}

TEST_CASE("gradcheck subcommand reports a passing max relative error") {
    std::string out;
    const int rc = cli({"gradcheck"}, &out);
    CHECK(rc == 0);
    const std::string key = "max relative error = ";
    auto pos = out.find(key);
    REQUIRE(pos != std::string::npos);
    const double max_rel = std::stod(out.substr(pos + key.size()));
    CHECK(max_rel < 1e-3);
}

TEST_CASE("the synthetic pipeline runs end to end and traversal order matters") {
    const fs::path dir = fresh_dir("ps_cli_pipeline");
    GrayImage exemplar = sketchgen::scribble(160, 160, 21, 10, 2.5);
    save_pgm(exemplar, (dir / "plain.pgm").string());
    save_pgm(u_shaped_sketch(), (dir / "sketch.pgm").string());

    REQUIRE(cli({"synth-style", "--input", (dir / "plain.pgm").string(), "--output",
                 (dir / "styled.pgm").string(), "--style", "stripes", "--period", "12",
                 "--thickness", "6"}) == 0);
    REQUIRE(cli({"mine", "--plain", (dir / "plain.pgm").string(), "--styled",
                 (dir / "styled.pgm").string(), "--output", (dir / "ds").string(),
                 "--rotation-step", "360", "--stride", "48"}) == 0);

    // Tiny model: enough training to give the translator a strong response.
    std::string out;
    REQUIRE(cli({"train", "--dataset", (dir / "ds").string(), "--output",
                 (dir / "run").string(), "--iterations", "4", "--batch-size", "2",
                 "--seed", "3", "--checkpoint-every", "0", "--base-width", "4",
                 "--down-levels", "1", "--res-blocks", "1"},
                &out) == 0);
    CHECK(contains(out, "resolved config: train"));
    REQUIRE(fs::exists(dir / "run" / "model.ckpt"));
    REQUIRE(fs::exists(dir / "run" / "loss.csv"));

    const std::string ckpt = (dir / "run" / "model.ckpt").string();
    REQUIRE(cli({"stylize", "--input", (dir / "sketch.pgm").string(), "--output",
                 (dir / "bfs.pgm").string(), "--checkpoint", ckpt, "--order", "bfs"}) == 0);
    REQUIRE(cli({"stylize", "--input", (dir / "sketch.pgm").string(), "--output",
                 (dir / "raster.pgm").string(), "--checkpoint", ckpt, "--order", "raster"}) == 0);
    CHECK(load_pgm((dir / "bfs.pgm").string()).pixels() !=
          load_pgm((dir / "raster.pgm").string()).pixels());

    // Same seed, same bytes; stylize is deterministic given the checkpoint.
    REQUIRE(cli({"stylize", "--input", (dir / "sketch.pgm").string(), "--output",
                 (dir / "bfs2.pgm").string(), "--checkpoint", ckpt, "--order", "bfs"}) == 0);
    CHECK(read_bytes(dir / "bfs.pgm") == read_bytes(dir / "bfs2.pgm"));

    std::string seam_out;
    REQUIRE(cli({"seam-report", "--input", (dir / "bfs.pgm").string()}, &seam_out) == 0);
    CHECK(contains(seam_out, "seam metric = "));
    fs::remove_all(dir);
}

TEST_CASE("train runs with identical seeds produce identical checkpoints") {
    const fs::path dir = fresh_dir("ps_cli_repro");
    GrayImage exemplar = sketchgen::scribble(120, 120, 33, 8, 2.5);
    save_pgm(exemplar, (dir / "plain.pgm").string());
    REQUIRE(cli({"synth-style", "--input", (dir / "plain.pgm").string(), "--output",
                 (dir / "styled.pgm").string()}) == 0);
    REQUIRE(cli({"mine", "--plain", (dir / "plain.pgm").string(), "--styled",
                 (dir / "styled.pgm").string(), "--output", (dir / "ds").string(),
                 "--patch-size", "32", "--rotation-step", "360", "--stride", "32"}) == 0);

    const std::vector<std::string> base = {
        "train",        "--dataset",    (dir / "ds").string(), "--iterations", "2",
        "--batch-size", "2",            "--delta",             "4",            "--seed",
        "11",           "--base-width", "4",                   "--down-levels", "1",
        "--res-blocks", "1",            "--checkpoint-every",  "0"};
    auto with_out = [&](const std::string& sub) {
        std::vector<std::string> args = base;
        args.insert(args.end(), {"--output", (dir / sub).string()});
        return args;
    };
    REQUIRE(cli(with_out("a")) == 0);
    REQUIRE(cli(with_out("b")) == 0);
    CHECK(read_bytes(dir / "a" / "model.ckpt") == read_bytes(dir / "b" / "model.ckpt"));
    CHECK(read_bytes(dir / "a" / "loss.csv") == read_bytes(dir / "b" / "loss.csv"));

    std::vector<std::string> other = with_out("c");
    for (std::size_t i = 0; i < other.size(); ++i) {
        if (other[i] == "--seed") other[i + 1] = "12";
    }
    REQUIRE(cli(other) == 0);
    CHECK(read_bytes(dir / "a" / "model.ckpt") != read_bytes(dir / "c" / "model.ckpt"));
    fs::remove_all(dir);
}

TEST_CASE("stylize argument validation") {
    const fs::path dir = fresh_dir("ps_cli_validation");
    save_pgm(sketchgen::scribble(80, 80, 9, 4, 2.0), (dir / "in.pgm").string());
    const std::string in = (dir / "in.pgm").string();
    const std::string out = (dir / "out.pgm").string();

    std::string err;
    CHECK(cli({"stylize", "--input", in, "--output", out}, nullptr, &err) != 0);
    CHECK(contains(err, "--checkpoint or --identity"));
    CHECK(cli({"stylize", "--input", in, "--output", out, "--identity", "--root", "sideways"},
              nullptr, &err) != 0);
    CHECK(contains(err, "--root"));
    CHECK(cli({"stylize", "--input", in, "--output", out, "--identity", "--order", "spiral"},
              nullptr, &err) != 0);
    CHECK(contains(err, "--order"));
    CHECK(cli({"stylize", "--input", in, "--output", out, "--identity", "--seed-orientation",
               "1,2,3"},
              nullptr, &err) != 0);
    CHECK(contains(err, "--seed-orientation"));
    fs::remove_all(dir);
}
