#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "patchstyle/errors.hpp"
#include "patchstyle/hybrid.hpp"
#include "patchstyle/image.hpp"
#include "patchstyle/nets.hpp"
#include "patchstyle/patches.hpp"
#include "patchstyle/tensor.hpp"

namespace patchstyle {

// Fixed Gaussian used by the shape-reconstruction loss term.
inline constexpr int kShapeBlurSize = 10;
inline constexpr double kShapeBlurSigma = 10.0;

// Batch-in, batch-out network closure. Real networks capture bound
// parameters; tests substitute stubs.
template <typename T>
using BatchFn = std::function<Tensor<T>(const Tensor<T>&)>;

struct LossToggles {
    bool l1 = true;
    bool adv = true;
    bool shape = true;

    bool any() const { return l1 || adv || shape; }
};

template <typename T>
struct GenLoss {
    Tensor<T> total;  // scalar node on the caller's tape
    double l1 = 0.0;
    double adv = 0.0;
    double shape = 0.0;
};

template <typename T>
struct DiscLoss {
    Tensor<T> total;
    double real_term = 0.0;
    double fake_term = 0.0;
};

// Full generator objective: mean L1(G(h), s) + mean (D(G(h)) - 1)^2 +
// mean L1(blur(G(h)), blur(s)), each term unit-weighted and individually
// toggleable. Hybrids are composed here from the given masks.
template <typename T>
GenLoss<T> generator_loss(Tape<T>& tape, const BatchFn<T>& gen, const BatchFn<T>& disc,
                          const std::vector<GrayImage>& plain_batch,
                          const std::vector<GrayImage>& styled_batch,
                          const std::vector<HybridMask>& masks,
                          const LossToggles& toggles = {}) {
    if (plain_batch.empty()) throw DimensionError("generator_loss: empty batch");
    if (styled_batch.size() != plain_batch.size() || masks.size() != plain_batch.size())
        throw DimensionError("generator_loss: batch/mask sizes disagree");
    if (!toggles.any()) throw ParamError("generator_loss: every loss term is disabled");

    std::vector<GrayImage> hybrids;
    hybrids.reserve(plain_batch.size());
    for (std::size_t i = 0; i < plain_batch.size(); ++i)
        hybrids.push_back(compose(plain_batch[i], styled_batch[i], masks[i]));

    Tensor<T> h = images_to_tensor(tape, hybrids);
    Tensor<T> s = images_to_tensor(tape, styled_batch);
    Tensor<T> fake = gen(h);
    if (fake.shape() != s.shape())
        throw DimensionError("generator_loss: generator output shape " + shape_str(fake.shape()) +
                             " does not match target " + shape_str(s.shape()));

    GenLoss<T> out;
    std::optional<Tensor<T>> acc;
    auto accumulate = [&](const Tensor<T>& term) { acc = acc ? add(*acc, term) : term; };

    if (toggles.l1) {
        Tensor<T> term = mean(abs(sub(fake, s)));
        out.l1 = static_cast<double>(term.scalar());
        accumulate(term);
    }
    if (toggles.adv) {
        Tensor<T> term = mean(square(add_scalar(disc(fake), T(-1))));
        out.adv = static_cast<double>(term.scalar());
        accumulate(term);
    }
    if (toggles.shape) {
        Tensor<T> bf = gaussian_blur(fake, kShapeBlurSize, kShapeBlurSigma);
        Tensor<T> bs = gaussian_blur(s, kShapeBlurSize, kShapeBlurSigma);
        Tensor<T> term = mean(abs(sub(bf, bs)));
        out.shape = static_cast<double>(term.scalar());
        accumulate(term);
    }
    out.total = *acc;
    return out;
}

// LSGAN discriminator objective: mean (D(real) - 1)^2 + mean D(fake)^2.
// The fake batch is detached here, so backward never reaches the generator.
template <typename T>
DiscLoss<T> discriminator_loss(const BatchFn<T>& disc, const Tensor<T>& fake,
                               const Tensor<T>& real) {
    Tensor<T> real_term = mean(square(add_scalar(disc(real), T(-1))));
    Tensor<T> fake_term = mean(square(disc(fake.detach())));
    DiscLoss<T> out;
    out.real_term = static_cast<double>(real_term.scalar());
    out.fake_term = static_cast<double>(fake_term.scalar());
    out.total = add(real_term, fake_term);
    return out;
}

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected adaptive-moment update. `step` counts updates applied
// to this parameter group, 1-based including this one.
template <typename T>
void adam_step(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m,
               std::vector<T>& v, std::int64_t step, const AdamConfig& cfg) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        throw DimensionError("adam_step: buffer sizes disagree");
    if (step < 1) throw ParamError("adam_step: step must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
        const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        param[i] -= static_cast<T>(cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
}

struct TrainConfig {
    int batch_size = 8;
    int iterations = 2000;
    AdamConfig adam;
    int delta = 8;         // hybrid band margin
    int patch_size = 64;
    LossToggles toggles;   // ablation switches, default full method
    std::uint64_t seed = 0;
    int checkpoint_every = 500;  // 0 disables periodic checkpoints
    GeneratorSpec gen;
    DiscriminatorSpec disc;
};

struct LossRow {
    int iteration = 0;
    double l1 = 0.0;
    double adv_g = 0.0;
    double shape = 0.0;
    double d_real = 0.0;
    double d_fake = 0.0;
};

struct TrainResult {
    ModelParams<float> params;
    std::vector<LossRow> trace;
};

// Alternating D/G training over on-the-fly hybrids. All randomness comes
// from one stream seeded with config.seed: parameter init first, then per
// iteration the pair indices, the masks, and the real-batch indices.
// When out_dir is non-empty, writes loss.csv, model.ckpt, periodic
// checkpoints, and a diagnostic dump of the offending batch on numeric
// failure.
TrainResult train(const std::vector<PatchPair>& dataset, const TrainConfig& config,
                  const std::string& out_dir = "");

// Same loop starting from existing parameters (resume or injected state).
TrainResult train_from(ModelParams<float> params, const std::vector<PatchPair>& dataset,
                       const TrainConfig& config, const std::string& out_dir = "");

void write_loss_csv(const std::string& path, const std::vector<LossRow>& trace);

}  // namespace patchstyle
