#include "patchstyle/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "patchstyle/errors.hpp"
#include "patchstyle/hybrid.hpp"
#include "patchstyle/image.hpp"
#include "patchstyle/nets.hpp"
#include "patchstyle/rng.hpp"
#include "patchstyle/trainer.hpp"

namespace patchstyle {

namespace {

std::vector<double> normal_values(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

std::vector<double> slice(const std::vector<double>& v, std::size_t a, std::size_t n) {
    return {v.begin() + a, v.begin() + a + n};
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

GrayImage random_sketch(int p, std::uint64_t seed) {
    GrayImage img(p, p, 1.0f);
    Rng rng(seed);
    for (int i = 0; i < 3; ++i) {
        const int x0 = static_cast<int>(rng.uniform_u32(p));
        const int y0 = static_cast<int>(rng.uniform_u32(p));
        const int x1 = static_cast<int>(rng.uniform_u32(p));
        const int y1 = static_cast<int>(rng.uniform_u32(p));
        const int steps = 2 * p;
        for (int s = 0; s <= steps; ++s) {
            const double t = double(s) / steps;
            const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            if (x >= 0 && x < p && y >= 0 && y < p) img.at(x, y) = 0.0f;
        }
    }
    return img;
}

}  // namespace

GradCheckReport check_gradients(std::string name, const std::vector<double>& theta,
                                const GradBuild& build, const std::vector<std::size_t>& probes,
                                const GradCheckOptions& opt) {
    Tape<double> tape;
    std::vector<Tensor<double>> vars;
    Tensor<double> loss = build(tape, theta, &vars);
    tape.backward(loss);
    std::vector<double> analytic;
    analytic.reserve(theta.size());
    for (const auto& v : vars) analytic.insert(analytic.end(), v.grad().begin(), v.grad().end());
    if (analytic.size() != theta.size())
        throw ParamError("check_gradients: registered variables do not cover theta");

    auto eval = [&](const std::vector<double>& th) {
        Tape<double> t;
        return build(t, th, nullptr).scalar();
    };

    GradCheckReport rep;
    rep.name = std::move(name);
    for (std::size_t i : probes) {
        if (i >= theta.size()) throw ParamError("check_gradients: probe index out of range");
        auto central = [&](double h) {
            std::vector<double> tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            return (eval(tp) - eval(tm)) / (2.0 * h);
        };
        const double fd1 = central(opt.step);
        const double fd2 = central(opt.step / 2);
        if (std::abs(fd1 - fd2) / (std::abs(fd1) + std::abs(fd2) + 1e-8) > 5e-4) {
            ++rep.skipped;  // straddles a relu/abs kink
            continue;
        }
        const double rel =
            std::abs(analytic[i] - fd1) / (std::abs(analytic[i]) + std::abs(fd1) + 1e-8);
        rep.max_rel = std::max(rep.max_rel, rel);
        ++rep.checked;
    }
    return rep;
}

namespace {

// mean(y * w) with a fixed weight field makes gradients non-uniform without
// adding kinks of its own.
Tensor<double> weighted_mean(Tape<double>& tape, const Tensor<double>& y, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(numel(y.shape())));
    for (double& x : w) x = rng.normal();
    return mean(mul(y, tape.constant(y.shape(), std::move(w))));
}

GradCheckReport check_op(const std::string& name, const GradCheckOptions& opt, std::uint64_t salt,
                         const std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>& op,
                         Shape shape) {
    Rng rng(opt.seed * 1000003 + salt);
    const auto n = static_cast<std::size_t>(numel(shape));
    std::vector<double> theta = normal_values(n, rng);
    const std::uint64_t wseed = rng.next();
    auto build = [&, shape](Tape<double>& tape, const std::vector<double>& th,
                            std::vector<Tensor<double>>* vars) {
        Tensor<double> x = tape.variable(shape, th);
        if (vars) vars->push_back(x);
        Rng wrng(wseed);
        return weighted_mean(tape, op(tape, x), wrng);
    };
    return check_gradients(name, theta, build, all_indices(n), opt);
}

GradCheckReport check_end_to_end(const GradCheckOptions& opt) {
    const int p = 16;
    const GeneratorSpec gs;            // default generator
    const DiscriminatorSpec ds{{8, 16}, 0.2f};  // keeps a 16x16 score map alive

    Rng rng(opt.seed + 9001);
    ModelParams<double> params = init_params<double>(gs, ds, rng);

    std::vector<GrayImage> plain{random_sketch(p, opt.seed + 1)};
    std::vector<GrayImage> styled{synth_style(plain[0], {StyleKind::Stripes, 6, 0, 3})};
    std::vector<HybridMask> masks{sample_mask(p, 2, rng)};

    std::vector<double> theta;
    theta.reserve(static_cast<std::size_t>(params.value_count()));
    for (const auto& s : params.slots()) theta.insert(theta.end(), s.values.begin(), s.values.end());

    auto build = [&](Tape<double>& tape, const std::vector<double>& th,
                     std::vector<Tensor<double>>* vars) {
        ModelParams<double> local = params;
        std::size_t off = 0;
        for (std::size_t i = 0; i < local.size(); ++i) {
            auto& values = local.slot(i).values;
            std::copy_n(th.begin() + off, values.size(), values.begin());
            off += values.size();
        }
        BoundParams<double> bound(tape, local);
        if (vars)
            for (std::size_t i = 0; i < bound.size(); ++i) vars->push_back(bound.slot(i));
        BatchFn<double> gen_fn = [&](const Tensor<double>& x) {
            return generator_forward(gs, bound, x);
        };
        BatchFn<double> disc_fn = [&](const Tensor<double>& x) {
            return discriminator_forward(ds, bound, x);
        };
        return generator_loss<double>(tape, gen_fn, disc_fn, plain, styled, masks).total;
    };

    // Two probes per slot keeps coverage over every layer affordable.
    std::vector<std::size_t> probes;
    std::size_t off = 0;
    for (const auto& s : params.slots()) {
        probes.push_back(off + rng.uniform_u32(static_cast<std::uint32_t>(s.values.size())));
        if (s.values.size() > 1)
            probes.push_back(off + rng.uniform_u32(static_cast<std::uint32_t>(s.values.size())));
        off += s.values.size();
    }
    return check_gradients("objective_end_to_end", theta, build, probes, opt);
}

}  // namespace

GradCheckSummary run_gradcheck(const GradCheckOptions& opt) {
    GradCheckSummary sum;
    std::uint64_t salt = 1;
    auto run = [&](const std::string& name,
                   const std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>& op,
                   Shape shape) { sum.reports.push_back(check_op(name, opt, salt++, op, shape)); };

    run("add", [](Tape<double>& t, const Tensor<double>& x) {
        return add(x, t.full(x.shape(), 0.7));
    }, {2, 3, 4});
    run("sub", [](Tape<double>& t, const Tensor<double>& x) {
        return sub(t.full(x.shape(), 0.3), x);
    }, {3, 5});
    run("mul", [](Tape<double>& t, const Tensor<double>& x) {
        Rng r(99);
        std::vector<double> w(static_cast<std::size_t>(numel(x.shape())));
        for (double& v : w) v = r.normal();
        return mul(x, t.constant(x.shape(), std::move(w)));
    }, {4, 4});
    run("add_scalar", [](Tape<double>&, const Tensor<double>& x) { return add_scalar(x, -1.5); },
        {2, 6});
    run("mul_scalar", [](Tape<double>&, const Tensor<double>& x) { return mul_scalar(x, 2.5); },
        {2, 6});
    run("relu", [](Tape<double>&, const Tensor<double>& x) { return relu(x); }, {5, 7});
    run("leaky_relu",
        [](Tape<double>&, const Tensor<double>& x) { return leaky_relu(x, 0.2); }, {5, 7});
    run("tanh", [](Tape<double>&, const Tensor<double>& x) { return tanh(x); }, {5, 7});
    run("abs", [](Tape<double>&, const Tensor<double>& x) { return abs(x); }, {5, 7});
    run("square", [](Tape<double>&, const Tensor<double>& x) { return square(x); }, {5, 7});
    run("mean", [](Tape<double>&, const Tensor<double>& x) { return square(mean(x)); }, {3, 9});
    run("pad2d_zero", [](Tape<double>&, const Tensor<double>& x) {
        return pad2d(x, {2, 1, 2, 1}, PadMode::Zero);
    }, {1, 2, 4, 5});
    run("pad2d_reflect", [](Tape<double>&, const Tensor<double>& x) {
        return pad2d(x, {2, 1, 2, 1}, PadMode::Reflect);
    }, {1, 2, 4, 5});
    run("pad2d_replicate", [](Tape<double>&, const Tensor<double>& x) {
        return pad2d(x, {2, 1, 2, 1}, PadMode::Replicate);
    }, {1, 2, 4, 5});
    run("instance_norm", [](Tape<double>&, const Tensor<double>& x) {
        return instance_norm(x, kNormEps);
    }, {2, 3, 4, 5});
    run("gaussian_blur", [](Tape<double>&, const Tensor<double>& x) {
        return gaussian_blur(x, kShapeBlurSize, kShapeBlurSigma);
    }, {1, 1, 8, 7});

    // conv ops need a second variable for the kernel.
    {
        Rng rng(opt.seed * 1000003 + 500);
        const std::size_t nx = 2 * 3 * 5 * 4, nk = 4 * 3 * 3 * 2;
        std::vector<double> theta = normal_values(nx + nk, rng);
        const std::uint64_t wseed = rng.next();
        auto build = [&](Tape<double>& tape, const std::vector<double>& th,
                         std::vector<Tensor<double>>* vars) {
            Tensor<double> x = tape.variable({2, 3, 5, 4}, slice(th, 0, nx));
            Tensor<double> k = tape.variable({4, 3, 3, 2}, slice(th, nx, nk));
            if (vars) {
                vars->push_back(x);
                vars->push_back(k);
            }
            Rng wrng(wseed);
            return weighted_mean(tape, conv2d(x, k, 2, {1, 0, 1, 1}), wrng);
        };
        sum.reports.push_back(
            check_gradients("conv2d", theta, build, all_indices(nx + nk), opt));
    }
    {
        Rng rng(opt.seed * 1000003 + 501);
        const std::size_t nx = 2 * 3 * 3 * 3, nk = 3 * 2 * 4 * 4;
        std::vector<double> theta = normal_values(nx + nk, rng);
        const std::uint64_t wseed = rng.next();
        auto build = [&](Tape<double>& tape, const std::vector<double>& th,
                         std::vector<Tensor<double>>* vars) {
            Tensor<double> x = tape.variable({2, 3, 3, 3}, slice(th, 0, nx));
            Tensor<double> k = tape.variable({3, 2, 4, 4}, slice(th, nx, nk));
            if (vars) {
                vars->push_back(x);
                vars->push_back(k);
            }
            Rng wrng(wseed);
            return weighted_mean(tape, conv2d_transpose(x, k, 2, Pad2d::uniform(1)), wrng);
        };
        sum.reports.push_back(
            check_gradients("conv2d_transpose", theta, build, all_indices(nx + nk), opt));
    }
    {
        Rng rng(opt.seed * 1000003 + 502);
        const std::size_t nx = 2 * 3 * 2 * 2, nb = 3;
        std::vector<double> theta = normal_values(nx + nb, rng);
        const std::uint64_t wseed = rng.next();
        auto build = [&](Tape<double>& tape, const std::vector<double>& th,
                         std::vector<Tensor<double>>* vars) {
            Tensor<double> x = tape.variable({2, 3, 2, 2}, slice(th, 0, nx));
            Tensor<double> b = tape.variable({3}, slice(th, nx, nb));
            if (vars) {
                vars->push_back(x);
                vars->push_back(b);
            }
            Rng wrng(wseed);
            return weighted_mean(tape, bias_add(x, b), wrng);
        };
        sum.reports.push_back(check_gradients("bias_add", theta, build, all_indices(nx + nb), opt));
    }

    sum.reports.push_back(check_end_to_end(opt));

    sum.pass = true;
    for (const GradCheckReport& r : sum.reports) {
        sum.max_rel = std::max(sum.max_rel, r.max_rel);
        sum.checked += r.checked;
        sum.skipped += r.skipped;
        if (r.checked == 0) sum.pass = false;
    }
    if (sum.max_rel >= opt.tol) sum.pass = false;
    return sum;
}

}  // namespace patchstyle
