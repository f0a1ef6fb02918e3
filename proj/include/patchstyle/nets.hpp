#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "patchstyle/rng.hpp"
#include "patchstyle/tensor.hpp"

namespace patchstyle {

inline constexpr double kNormEps = 1e-5;

// Image-translation generator: 7x7 stem, `down_levels` stride-2 convs doubling
// the width, `res_blocks` residual blocks, mirrored transposed convs back up,
// 7x7 head + tanh. Instance norm + relu after every conv except the head.
struct GeneratorSpec {
    int base_width = 16;
    int down_levels = 2;
    int res_blocks = 3;

    bool operator==(const GeneratorSpec&) const = default;
};

// Patch discriminator: 4x4 convs (stride 2 except the last listed width),
// leaky relu, instance norm everywhere but the first layer, then a stride-1
// 4x4 conv to a 1-channel score map. Default yields 6x6 scores on 64x64.
struct DiscriminatorSpec {
    std::vector<int> widths{16, 32, 64, 64};
    float leaky_slope = 0.2f;

    bool operator==(const DiscriminatorSpec&) const = default;
};

// Named, ordered parameter slots. Shapes are fixed at creation; values are
// the single source of truth between tape bindings.
template <typename T>
class ModelParams {
public:
    struct Slot {
        std::string name;
        Shape shape;
        std::vector<T> values;
    };

    void add(std::string name, Shape shape, std::vector<T> values) {
        if (index_.count(name)) throw ParamError("duplicate parameter slot: " + name);
        if (numel(shape) != static_cast<std::int64_t>(values.size())) {
            throw ParamError("slot " + name + " shape/value mismatch");
        }
        index_[name] = slots_.size();
        slots_.push_back({std::move(name), std::move(shape), std::move(values)});
    }

    std::size_t slot_index(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ParamError("missing parameter slot: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Slot& slot(std::size_t i) { return slots_[i]; }
    const Slot& slot(std::size_t i) const { return slots_[i]; }
    const std::vector<Slot>& slots() const { return slots_; }
    std::size_t size() const { return slots_.size(); }

    std::vector<std::size_t> indices_with_prefix(const std::string& prefix) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i].name.rfind(prefix, 0) == 0) out.push_back(i);
        }
        return out;
    }

    std::int64_t value_count() const {
        std::int64_t n = 0;
        for (const auto& s : slots_) n += static_cast<std::int64_t>(s.values.size());
        return n;
    }

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.seed = seed;
        for (const auto& s : slots_) {
            out.add(s.name, s.shape, std::vector<U>(s.values.begin(), s.values.end()));
        }
        return out;
    }

    std::uint64_t seed = 0;

private:
    std::vector<Slot> slots_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Per-forward-pass binding of every slot as a tape variable, in slot order.
template <typename T>
class BoundParams {
public:
    BoundParams(Tape<T>& tape, const ModelParams<T>& params) : params_(&params) {
        bound_.reserve(params.size());
        for (const auto& s : params.slots()) bound_.push_back(tape.variable(s.shape, s.values));
    }

    Tensor<T> operator[](const std::string& name) const {
        return bound_[params_->slot_index(name)];
    }
    const Tensor<T>& slot(std::size_t i) const { return bound_[i]; }
    std::size_t size() const { return bound_.size(); }

private:
    const ModelParams<T>* params_;
    std::vector<Tensor<T>> bound_;
};

// (name, shape) schema in registration order; init, checkpoints, and the
// forward passes all derive from these.
std::vector<std::pair<std::string, Shape>> generator_slots(const GeneratorSpec& spec);
std::vector<std::pair<std::string, Shape>> discriminator_slots(const DiscriminatorSpec& spec);

// One-sided receptive field of a single score cell, in input pixels.
int receptive_field(const DiscriminatorSpec& spec);

// Weights ~ Normal(0, 0.02), biases zero, drawn in slot order from `rng`.
template <typename T>
ModelParams<T> init_params(const GeneratorSpec& gen, const DiscriminatorSpec& disc, Rng& rng) {
    ModelParams<T> params;
    auto fill = [&](const std::vector<std::pair<std::string, Shape>>& schema) {
        for (const auto& [name, shape] : schema) {
            const auto n = static_cast<std::size_t>(numel(shape));
            std::vector<T> v(n, T(0));
            if (name.size() < 2 || name.substr(name.size() - 2) != ".b") {
                for (T& x : v) x = static_cast<T>(0.02 * rng.normal());
            }
            params.add(name, shape, std::move(v));
        }
    };
    fill(generator_slots(gen));
    fill(discriminator_slots(disc));
    return params;
}

template <typename T>
ModelParams<T> init_params(const GeneratorSpec& gen, const DiscriminatorSpec& disc,
                           std::uint64_t seed) {
    Rng rng(seed);
    ModelParams<T> params = init_params<T>(gen, disc, rng);
    params.seed = seed;
    return params;
}

template <typename T>
Tensor<T> generator_forward(const GeneratorSpec& spec, const BoundParams<T>& p,
                            const Tensor<T>& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || xs[1] != 1) {
        throw DimensionError("generator_forward: need [N,1,H,W], got " + shape_str(xs));
    }
    const int div = 1 << spec.down_levels;
    if (xs[2] % div != 0 || xs[3] % div != 0) {
        throw DimensionError("generator_forward: spatial dims must be divisible by " +
                             std::to_string(div));
    }
    if (xs[2] < 4 || xs[3] < 4) throw DimensionError("generator_forward: input too small");
    const T eps = static_cast<T>(kNormEps);

    Tensor<T> h = pad2d(x, Pad2d::uniform(3), PadMode::Reflect);
    h = bias_add(conv2d(h, p["g.in.w"], 1), p["g.in.b"]);
    h = relu(instance_norm(h, eps));
    for (int l = 0; l < spec.down_levels; ++l) {
        const std::string base = "g.down" + std::to_string(l);
        h = bias_add(conv2d(h, p[base + ".w"], 2, Pad2d::uniform(1)), p[base + ".b"]);
        h = relu(instance_norm(h, eps));
    }
    for (int r = 0; r < spec.res_blocks; ++r) {
        const std::string base = "g.res" + std::to_string(r);
        Tensor<T> t = bias_add(conv2d(h, p[base + ".c1.w"], 1, Pad2d::uniform(1)), p[base + ".c1.b"]);
        t = relu(instance_norm(t, eps));
        t = bias_add(conv2d(t, p[base + ".c2.w"], 1, Pad2d::uniform(1)), p[base + ".c2.b"]);
        h = add(h, instance_norm(t, eps));
    }
    for (int l = spec.down_levels - 1; l >= 0; --l) {
        const std::string base = "g.up" + std::to_string(l);
        h = bias_add(conv2d_transpose(h, p[base + ".w"], 2, Pad2d::uniform(1)), p[base + ".b"]);
        h = relu(instance_norm(h, eps));
    }
    h = pad2d(h, Pad2d::uniform(3), PadMode::Reflect);
    return tanh(bias_add(conv2d(h, p["g.out.w"], 1), p["g.out.b"]));
}

template <typename T>
Tensor<T> discriminator_forward(const DiscriminatorSpec& spec, const BoundParams<T>& p,
                                const Tensor<T>& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || xs[1] != 1) {
        throw DimensionError("discriminator_forward: need [N,1,H,W], got " + shape_str(xs));
    }
    const T eps = static_cast<T>(kNormEps);
    const T slope = static_cast<T>(spec.leaky_slope);
    Tensor<T> h = x;
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        const std::string base = "d.l" + std::to_string(i);
        const int stride = i + 1 < spec.widths.size() ? 2 : 1;
        h = bias_add(conv2d(h, p[base + ".w"], stride, Pad2d::uniform(1)), p[base + ".b"]);
        if (i > 0) h = instance_norm(h, eps);
        h = leaky_relu(h, slope);
    }
    return bias_add(conv2d(h, p["d.out.w"], 1, Pad2d::uniform(1)), p["d.out.b"]);
}

// Checkpoint: little-endian binary with specs + seed, then named slots with
// shape and raw float32 values. Round-trips bit-exactly.
struct Checkpoint {
    ModelParams<float> params;
    GeneratorSpec gen;
    DiscriminatorSpec disc;
};

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const GeneratorSpec& gen, const DiscriminatorSpec& disc);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace patchstyle
