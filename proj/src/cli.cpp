#include "patchstyle/cli.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "patchstyle/errors.hpp"
#include "patchstyle/gradcheck.hpp"
#include "patchstyle/image.hpp"
#include "patchstyle/nets.hpp"
#include "patchstyle/patches.hpp"
#include "patchstyle/stylize.hpp"
#include "patchstyle/trainer.hpp"

namespace patchstyle {
namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

template <typename T>
std::string str(const T& v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

void print_config(const std::string& command, const KeyValues& kv) {
    std::cout << "resolved config: " << command;
    for (const auto& [k, v] : kv) std::cout << ' ' << k << '=' << v;
    std::cout << '\n';
}

RootPolicy parse_root(const std::string& s, std::uint64_t* seed) {
    if (s == "raster") return RootPolicy::Raster;
    if (s == "random") return RootPolicy::Random;
    if (s.rfind("random:", 0) == 0) {
        try {
            *seed = std::stoull(s.substr(7));
        } catch (const std::exception&) {
            throw ParamError("bad --root seed in '" + s + "'");
        }
        return RootPolicy::Random;
    }
    throw ParamError("bad --root '" + s + "' (want raster or random[:SEED])");
}

TraversalOrder parse_order(const std::string& s) {
    if (s == "bfs") return TraversalOrder::Bfs;
    if (s == "raster") return TraversalOrder::Raster;
    throw ParamError("bad --order '" + s + "' (want bfs or raster)");
}

GrayImage apply_pre(const GrayImage& img, const std::string& spec) {
    const auto colon = spec.find(':');
    int radius = 0;
    if (colon != std::string::npos) {
        try {
            radius = std::stoi(spec.substr(colon + 1));
        } catch (const std::exception&) {
            radius = -1;
        }
    }
    if (colon == std::string::npos || radius < 0) {
        throw ParamError("bad --pre '" + spec + "' (want erode:R or dilate:R)");
    }
    const std::string kind = spec.substr(0, colon);
    if (kind == "erode") return erode_ink(img, radius);
    if (kind == "dilate") return dilate_ink(img, radius);
    throw ParamError("bad --pre '" + spec + "' (want erode:R or dilate:R)");
}

SeedRegion parse_region(const std::string& s) {
    SeedRegion r;
    char extra = 0;
    if (std::sscanf(s.c_str(), "%d,%d,%d,%d%c", &r.x, &r.y, &r.w, &r.h, &extra) != 4) {
        throw ParamError("bad --seed-orientation '" + s + "' (want X,Y,W,H)");
    }
    return r;
}

struct SynthArgs {
    std::string input, output, style = "stripes";
    StyleSpec spec;
};

void run_synth(const SynthArgs& a) {
    StyleSpec spec = a.spec;
    spec.kind = parse_style_kind(a.style);
    print_config("synth-style", {{"input", a.input},
                                 {"output", a.output},
                                 {"style", style_kind_name(spec.kind)},
                                 {"period", str(spec.period)},
                                 {"phase", str(spec.phase)},
                                 {"thickness", str(spec.thickness)}});
    save_image(synth_style(load_image(a.input), spec), a.output);
    std::cout << "wrote " << a.output << '\n';
}

struct MineArgs {
    std::string plain, styled, output;
    int patch_size = 64;
    int rotation_step = 8;
    int stride = 8;
};

void run_mine(const MineArgs& a) {
    print_config("mine", {{"plain", a.plain},
                          {"styled", a.styled},
                          {"output", a.output},
                          {"patch_size", str(a.patch_size)},
                          {"rotation_step", str(a.rotation_step)},
                          {"stride", str(a.stride)}});
    std::vector<PatchPair> pairs =
        mine(load_image(a.plain), load_image(a.styled), a.patch_size, a.rotation_step, a.stride);
    DatasetManifest manifest;
    manifest.patch_size = a.patch_size;
    manifest.rotation_step = a.rotation_step;
    manifest.stride = a.stride;
    manifest.exemplars = {a.plain, a.styled};
    save_dataset(a.output, pairs, manifest);
    std::cout << "mined " << pairs.size() << " pairs\nwrote " << a.output << '\n';
}

struct TrainArgs {
    std::string dataset, output, resume;
    TrainConfig cfg;
    bool no_l1 = false, no_adv = false, no_shape = false;
    bool patch_size_set = false;
};

void run_train(const TrainArgs& a) {
    TrainConfig cfg = a.cfg;
    cfg.toggles = {!a.no_l1, !a.no_adv, !a.no_shape};

    DatasetManifest manifest;
    std::vector<PatchPair> pairs = load_dataset(a.dataset, &manifest);
    if (!a.patch_size_set) cfg.patch_size = manifest.patch_size;

    Checkpoint start;
    if (!a.resume.empty()) {
        start = load_checkpoint(a.resume);
        cfg.gen = start.gen;
        cfg.disc = start.disc;
    }

    const std::string losses = std::string(cfg.toggles.l1 ? "+l1" : "") +
                               (cfg.toggles.adv ? "+adv" : "") +
                               (cfg.toggles.shape ? "+shape" : "");
    print_config("train", {{"dataset", a.dataset},
                           {"output", a.output},
                           {"pairs", str(pairs.size())},
                           {"iterations", str(cfg.iterations)},
                           {"batch_size", str(cfg.batch_size)},
                           {"patch_size", str(cfg.patch_size)},
                           {"delta", str(cfg.delta)},
                           {"losses", losses.substr(1)},
                           {"lr", str(cfg.adam.lr)},
                           {"seed", str(cfg.seed)},
                           {"checkpoint_every", str(cfg.checkpoint_every)},
                           {"base_width", str(cfg.gen.base_width)},
                           {"down_levels", str(cfg.gen.down_levels)},
                           {"res_blocks", str(cfg.gen.res_blocks)},
                           {"resume", a.resume.empty() ? "-" : a.resume}});

    TrainResult result = a.resume.empty()
                             ? train(pairs, cfg, a.output)
                             : train_from(std::move(start.params), pairs, cfg, a.output);
    if (!result.trace.empty()) {
        const LossRow& last = result.trace.back();
        std::cout << "final losses: l1=" << last.l1 << " adv_g=" << last.adv_g
                  << " shape=" << last.shape << '\n';
    }
    std::cout << "wrote " << a.output << "/model.ckpt\n";
}

struct StylizeArgs {
    std::string input, output, checkpoint, exemplar, pre, region;
    std::string root = "raster", order = "bfs";
    bool identity = false;
    int patch_size = 64;
    int overlap = 16;
    std::uint64_t seed = 0;
};

void run_stylize(const StylizeArgs& a) {
    if (!a.identity && a.checkpoint.empty()) {
        throw ParamError("stylize: need --checkpoint or --identity");
    }
    StylizeOptions opt;
    opt.patch_size = a.patch_size;
    opt.overlap = a.overlap;
    opt.seed = a.seed;
    opt.root_policy = parse_root(a.root, &opt.seed);
    opt.order = parse_order(a.order);

    GrayImage sketch = load_image(a.input);
    if (!a.pre.empty()) sketch = apply_pre(sketch, a.pre);

    GrayImage exemplar;
    if (!a.region.empty()) {
        if (a.exemplar.empty()) throw ParamError("--seed-orientation requires --exemplar");
        opt.seed_region = parse_region(a.region);
        exemplar = load_image(a.exemplar);
        opt.seed_exemplar = &exemplar;
    }

    print_config("stylize",
                 {{"input", a.input},
                  {"output", a.output},
                  {"translator", a.identity ? "identity" : a.checkpoint},
                  {"patch_size", str(opt.patch_size)},
                  {"overlap", str(opt.overlap)},
                  {"root", opt.root_policy == RootPolicy::Raster ? "raster" : "random"},
                  {"order", opt.order == TraversalOrder::Bfs ? "bfs" : "raster"},
                  {"pre", a.pre.empty() ? "-" : a.pre},
                  {"seed_region", a.region.empty() ? "-" : a.region},
                  {"seed", str(opt.seed)}});

    GrayImage out;
    if (a.identity) {
        out = stylize(sketch, [](const GrayImage& h) { return h; }, opt);
    } else {
        Checkpoint ck = load_checkpoint(a.checkpoint);
        out = stylize(sketch, ck.gen, ck.params, opt);
    }
    save_image(out, a.output);
    std::cout << "wrote " << a.output << '\n';
}

int run_gradcheck_cmd(const GradCheckOptions& opt) {
    print_config("gradcheck",
                 {{"seed", str(opt.seed)}, {"step", str(opt.step)}, {"tol", str(opt.tol)}});
    GradCheckSummary summary = run_gradcheck(opt);
    for (const GradCheckReport& r : summary.reports) {
        std::cout << r.name << ": checked=" << r.checked << " skipped=" << r.skipped
                  << " max_rel=" << r.max_rel << '\n';
    }
    std::cout << "max relative error = " << summary.max_rel << '\n';
    if (!summary.pass) {
        std::cerr << "error: gradient check exceeded tolerance " << opt.tol << '\n';
        return 1;
    }
    return 0;
}

struct SeamArgs {
    std::string input;
    int patch_size = 64;
    int overlap = 16;
};

void run_seam_report(const SeamArgs& a) {
    print_config("seam-report", {{"input", a.input},
                                 {"patch_size", str(a.patch_size)},
                                 {"overlap", str(a.overlap)}});
    GrayImage img = load_image(a.input);
    SeamLines lines = seam_lines(img.width(), img.height(), a.patch_size, a.overlap);
    std::cout << "seam lines: " << lines.xs.size() << " vertical, " << lines.ys.size()
              << " horizontal\n";
    std::cout << "seam metric = " << seam_metric(img, a.patch_size, a.overlap) << '\n';
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"patch-level sketch stylization"};
    app.require_subcommand(1);
    // One config file for the whole run: keys live in [subcommand] sections
    // (or dotted subcommand.key=value); command-line flags take precedence.
    app.set_config("--config", "", "key=value config file ([subcommand] sections)");
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    int status = 0;

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth-style", "render a procedural styled exemplar");
    synth_cmd->add_option("--input", synth.input, "plain exemplar image")->required();
    synth_cmd->add_option("--output", synth.output, "styled exemplar path")->required();
    synth_cmd->add_option("--style", synth.style, "stripes|dashes|dots");
    synth_cmd->add_option("--period", synth.spec.period, "pattern period in pixels");
    synth_cmd->add_option("--phase", synth.spec.phase, "pattern phase offset");
    synth_cmd->add_option("--thickness", synth.spec.thickness, "kept band thickness");
    synth_cmd->callback([&] { run_synth(synth); });

    MineArgs mine_args;
    CLI::App* mine_cmd = app.add_subcommand("mine", "cut a paired patch dataset from exemplars");
    mine_cmd->add_option("--plain", mine_args.plain, "plain exemplar image")->required();
    mine_cmd->add_option("--styled", mine_args.styled, "styled exemplar image")->required();
    mine_cmd->add_option("--output", mine_args.output, "dataset directory")->required();
    mine_cmd->add_option("--patch-size", mine_args.patch_size, "square patch side");
    mine_cmd->add_option("--rotation-step", mine_args.rotation_step, "degrees per rotation");
    mine_cmd->add_option("--stride", mine_args.stride, "window stride in pixels");
    mine_cmd->callback([&] { run_mine(mine_args); });

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train the translator on a dataset");
    train_cmd->add_option("--dataset", train_args.dataset, "dataset directory")->required();
    train_cmd->add_option("--output", train_args.output, "checkpoint/trace directory")->required();
    train_cmd->add_option("--iterations", train_args.cfg.iterations, "training iterations");
    train_cmd->add_option("--batch-size", train_args.cfg.batch_size, "pairs per iteration");
    CLI::Option* psize = train_cmd->add_option("--patch-size", train_args.cfg.patch_size,
                                               "patch side (default: manifest value)");
    train_cmd->add_option("--delta", train_args.cfg.delta, "hybrid band margin");
    train_cmd->add_option("--seed", train_args.cfg.seed, "rng seed");
    train_cmd->add_option("--checkpoint-every", train_args.cfg.checkpoint_every,
                          "iterations between checkpoints (0 = off)");
    train_cmd->add_option("--lr", train_args.cfg.adam.lr, "adam learning rate");
    train_cmd->add_option("--beta1", train_args.cfg.adam.beta1, "adam beta1");
    train_cmd->add_option("--beta2", train_args.cfg.adam.beta2, "adam beta2");
    train_cmd->add_option("--eps", train_args.cfg.adam.eps, "adam epsilon");
    train_cmd->add_option("--base-width", train_args.cfg.gen.base_width, "generator stem width");
    train_cmd->add_option("--down-levels", train_args.cfg.gen.down_levels, "generator down levels");
    train_cmd->add_option("--res-blocks", train_args.cfg.gen.res_blocks, "residual blocks");
    train_cmd->add_flag("--no-l1", train_args.no_l1, "drop the L1 term");
    train_cmd->add_flag("--no-adv", train_args.no_adv, "drop the adversarial term");
    train_cmd->add_flag("--no-shape", train_args.no_shape, "drop the blurred-shape term");
    train_cmd->add_option("--resume", train_args.resume, "checkpoint to continue from");
    train_cmd->callback([&] {
        train_args.patch_size_set = psize->count() > 0;
        run_train(train_args);
    });

    StylizeArgs sty;
    CLI::App* sty_cmd = app.add_subcommand("stylize", "translate a sketch patch by patch");
    sty_cmd->add_option("--input", sty.input, "sketch image")->required();
    sty_cmd->add_option("--output", sty.output, "styled output image")->required();
    CLI::Option* ck = sty_cmd->add_option("--checkpoint", sty.checkpoint, "trained model");
    sty_cmd->add_flag("--identity", sty.identity, "bypass the model, copy hybrids through")
        ->excludes(ck);
    sty_cmd->add_option("--patch-size", sty.patch_size, "window side");
    sty_cmd->add_option("--overlap", sty.overlap, "window overlap");
    sty_cmd->add_option("--root", sty.root, "raster|random[:SEED] traversal roots");
    sty_cmd->add_option("--order", sty.order, "bfs|raster traversal order");
    sty_cmd->add_option("--pre", sty.pre, "erode:R|dilate:R sketch preprocessing");
    sty_cmd->add_option("--seed-orientation", sty.region, "X,Y,W,H region pasted from exemplar");
    sty_cmd->add_option("--exemplar", sty.exemplar, "styled exemplar for seeding");
    sty_cmd->add_option("--seed", sty.seed, "rng seed");
    sty_cmd->callback([&] { run_stylize(sty); });

    GradCheckOptions gc;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gc_cmd->add_option("--seed", gc.seed, "rng seed");
    gc_cmd->add_option("--step", gc.step, "finite-difference step");
    gc_cmd->add_option("--tol", gc.tol, "max relative error to pass");
    gc_cmd->callback([&] { status = run_gradcheck_cmd(gc); });

    SeamArgs seam;
    CLI::App* seam_cmd = app.add_subcommand("seam-report", "measure seams on a styled image");
    seam_cmd->add_option("--input", seam.input, "image to measure")->required();
    seam_cmd->add_option("--patch-size", seam.patch_size, "window side");
    seam_cmd->add_option("--overlap", seam.overlap, "window overlap");
    seam_cmd->callback([&] { run_seam_report(seam); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}

}  // namespace patchstyle
