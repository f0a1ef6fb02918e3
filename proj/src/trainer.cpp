#include "patchstyle/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "patchstyle/rng.hpp"

namespace patchstyle {

namespace {

void validate_config(const TrainConfig& c) {
    if (c.batch_size < 1) throw ParamError("train: batch_size must be positive");
    if (c.iterations < 0) throw ParamError("train: iterations must be >= 0");
    if (c.checkpoint_every < 0) throw ParamError("train: checkpoint_every must be >= 0");
    if (c.adam.lr <= 0 || c.adam.eps <= 0) throw ParamError("train: lr and eps must be positive");
    if (c.adam.beta1 < 0 || c.adam.beta1 >= 1 || c.adam.beta2 < 0 || c.adam.beta2 >= 1)
        throw ParamError("train: moment coefficients must lie in [0, 1)");
    if (!c.toggles.any()) throw ParamError("train: every loss term is disabled");
    if (c.delta < 0 || c.patch_size / 2 - c.delta < 1)
        throw ParamError("train: need patch_size/2 - delta >= 1");
    if (c.patch_size < kShapeBlurSize / 2 + 1)
        throw ParamError("train: patch_size too small for the shape-loss blur");
}

void validate_dataset(const std::vector<PatchPair>& dataset, int p) {
    if (dataset.empty()) throw ParamError("train: empty dataset");
    for (const PatchPair& pair : dataset) {
        if (pair.plain.width() != p || pair.plain.height() != p ||
            pair.styled.width() != p || pair.styled.height() != p)
            throw DimensionError("train: dataset patch size does not match config patch_size");
    }
}

std::string checkpoint_name(int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_%06d.ckpt", iteration);
    return buf;
}

// Adam buffers per parameter slot plus per-group step counts.
struct OptState {
    std::vector<std::vector<float>> m, v;
    std::int64_t gen_steps = 0;
    std::int64_t disc_steps = 0;

    explicit OptState(const ModelParams<float>& params) {
        m.reserve(params.size());
        v.reserve(params.size());
        for (const auto& s : params.slots()) {
            m.emplace_back(s.values.size(), 0.0f);
            v.emplace_back(s.values.size(), 0.0f);
        }
    }
};

void apply_adam(ModelParams<float>& params, const BoundParams<float>& bound,
                const std::vector<std::size_t>& indices, OptState& opt, std::int64_t step,
                const AdamConfig& cfg) {
    for (std::size_t i : indices)
        adam_step(params.slot(i).values, bound.slot(i).grad(), opt.m[i], opt.v[i], step, cfg);
}

void dump_diagnostic(const std::string& out_dir, int iteration, const std::string& what,
                     const std::vector<GrayImage>& plain, const std::vector<GrayImage>& styled,
                     const std::vector<GrayImage>& real) {
    namespace fs = std::filesystem;
    fs::path dir = fs::path(out_dir) / ("diagnostic_iter" + std::to_string(iteration));
    fs::create_directories(dir);
    std::ofstream note(dir / "note.txt");
    note << "iteration " << iteration << "\n" << what << "\n";
    auto save_all = [&](const std::vector<GrayImage>& batch, const char* stem) {
        for (std::size_t b = 0; b < batch.size(); ++b) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%s_%02zu.pgm", stem, b);
            save_pgm(batch[b], (dir / buf).string());
        }
    };
    save_all(plain, "plain");
    save_all(styled, "styled");
    save_all(real, "real");
}

}  // namespace

void write_loss_csv(const std::string& path, const std::vector<LossRow>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "iteration,l1,adv_g,shape,d_real,d_fake\n";
    out.precision(10);
    for (const LossRow& r : trace)
        out << r.iteration << ',' << r.l1 << ',' << r.adv_g << ',' << r.shape << ',' << r.d_real
            << ',' << r.d_fake << '\n';
    if (!out) throw IoError("failed writing " + path);
}

namespace {

TrainResult run_loop(ModelParams<float> params, const std::vector<PatchPair>& dataset,
                     const TrainConfig& config, Rng& rng, const std::string& out_dir) {
    validate_config(config);
    validate_dataset(dataset, config.patch_size);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    OptState opt(params);
    const std::vector<std::size_t> gen_idx = params.indices_with_prefix("g.");
    const std::vector<std::size_t> disc_idx = params.indices_with_prefix("d.");
    const auto n = static_cast<std::uint32_t>(dataset.size());

    TrainResult result;
    result.trace.reserve(static_cast<std::size_t>(config.iterations));

    for (int it = 0; it < config.iterations; ++it) {
        // Fixed draw order keeps the G-batch sequence identical across
        // ablation variants: pair indices, masks, then real indices.
        std::vector<GrayImage> plain_batch, styled_batch, real_batch;
        std::vector<HybridMask> masks;
        plain_batch.reserve(config.batch_size);
        styled_batch.reserve(config.batch_size);
        masks.reserve(config.batch_size);
        for (int b = 0; b < config.batch_size; ++b) {
            const PatchPair& pair = dataset[rng.uniform_u32(n)];
            plain_batch.push_back(pair.plain);
            styled_batch.push_back(pair.styled);
        }
        for (int b = 0; b < config.batch_size; ++b)
            masks.push_back(sample_mask(config.patch_size, config.delta, rng));
        real_batch.reserve(config.batch_size);
        for (int b = 0; b < config.batch_size; ++b)
            real_batch.push_back(dataset[rng.uniform_u32(n)].styled);

        LossRow row;
        row.iteration = it;
        try {
            if (config.toggles.adv) {
                // D step on detached fakes.
                Tape<float> tape;
                BoundParams<float> bound(tape, params);
                auto gen_fn = [&](const Tensor<float>& x) {
                    return generator_forward(config.gen, bound, x);
                };
                auto disc_fn = [&](const Tensor<float>& x) {
                    return discriminator_forward(config.disc, bound, x);
                };
                std::vector<GrayImage> hybrids;
                hybrids.reserve(plain_batch.size());
                for (std::size_t b = 0; b < plain_batch.size(); ++b)
                    hybrids.push_back(compose(plain_batch[b], styled_batch[b], masks[b]));
                Tensor<float> fake = gen_fn(images_to_tensor(tape, hybrids));
                Tensor<float> real = images_to_tensor(tape, real_batch);
                DiscLoss<float> dl = discriminator_loss<float>(disc_fn, fake, real);
                tape.backward(dl.total);
                apply_adam(params, bound, disc_idx, opt, ++opt.disc_steps, config.adam);
                row.d_real = dl.real_term;
                row.d_fake = dl.fake_term;
            }

            // G step against the just-updated discriminator.
            Tape<float> tape;
            BoundParams<float> bound(tape, params);
            auto gen_fn = [&](const Tensor<float>& x) {
                return generator_forward(config.gen, bound, x);
            };
            auto disc_fn = [&](const Tensor<float>& x) {
                return discriminator_forward(config.disc, bound, x);
            };
            GenLoss<float> gl = generator_loss<float>(tape, gen_fn, disc_fn, plain_batch,
                                                      styled_batch, masks, config.toggles);
            tape.backward(gl.total);
            apply_adam(params, bound, gen_idx, opt, ++opt.gen_steps, config.adam);
            row.l1 = gl.l1;
            row.adv_g = gl.adv;
            row.shape = gl.shape;
        } catch (const NumericError& e) {
            if (!out_dir.empty()) {
                dump_diagnostic(out_dir, it, e.what(), plain_batch, styled_batch, real_batch);
                write_loss_csv(out_dir + "/loss.csv", result.trace);
            }
            throw NumericError("iteration " + std::to_string(it) + ": " + e.what());
        }

        result.trace.push_back(row);
        if (!out_dir.empty() && config.checkpoint_every > 0 &&
            (it + 1) % config.checkpoint_every == 0)
            save_checkpoint(out_dir + "/" + checkpoint_name(it + 1), params, config.gen,
                            config.disc);
    }

    result.params = std::move(params);
    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/model.ckpt", result.params, config.gen, config.disc);
        write_loss_csv(out_dir + "/loss.csv", result.trace);
    }
    return result;
}

}  // namespace

TrainResult train(const std::vector<PatchPair>& dataset, const TrainConfig& config,
                  const std::string& out_dir) {
    validate_config(config);
    Rng rng(config.seed);
    ModelParams<float> params = init_params<float>(config.gen, config.disc, rng);
    params.seed = config.seed;
    // Sampling continues the same stream the init consumed.
    return run_loop(std::move(params), dataset, config, rng, out_dir);
}

TrainResult train_from(ModelParams<float> params, const std::vector<PatchPair>& dataset,
                       const TrainConfig& config, const std::string& out_dir) {
    Rng rng(config.seed);
    return run_loop(std::move(params), dataset, config, rng, out_dir);
}

}  // namespace patchstyle
