#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "patchstyle/errors.hpp"

namespace patchstyle {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

enum class PadMode { Zero, Reflect, Replicate };

struct Pad2d {
    int top = 0, bottom = 0, left = 0, right = 0;
    static Pad2d uniform(int p) { return {p, p, p, p}; }
};

template <typename T>
class Tape;

// Lightweight handle into a Tape node. Copying a Tensor copies the handle,
// not the data; the owning tape must outlive all handles.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape<T>* tape() const { return tape_; }

    const Shape& shape() const;
    const std::vector<T>& values() const;
    // Gradient buffer; zeros for nodes the last backward pass never reached.
    const std::vector<T>& grad() const;
    bool needs_grad() const;
    std::int64_t size() const;
    T scalar() const;

    // Value copy recorded as a constant: gradients do not flow past it.
    Tensor<T> detach() const;

private:
    friend class Tape<T>;
    Tensor(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

    Tape<T>* tape_ = nullptr;
    int id_ = -1;
};

namespace detail {

template <typename T>
bool all_finite(const std::vector<T>& v) {
    T acc = 0;
    for (T x : v) acc += x < 0 ? -x : x;
    return std::isfinite(static_cast<double>(acc));
}

template <typename T>
void add_into(std::vector<T>& dst, const std::vector<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

// Records the forward computation as a flat list of nodes in creation order,
// which is a topological order by construction. backward() sweeps that list
// in reverse exactly once, accumulating gradients additively across fan-out.
// A tape and its tensors are confined to a single thread.
template <typename T>
class Tape {
public:
    struct Node {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;
        std::function<void()> backprop;  // empty for leaves and constants
        bool needs_grad = false;

        std::int64_t n() const { return static_cast<std::int64_t>(values.size()); }
        std::vector<T>& grad_buf() {
            if (grad.empty()) grad.assign(values.size(), T(0));
            return grad;
        }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor<T> constant(Shape shape, std::vector<T> values) {
        return make(std::move(shape), std::move(values), false);
    }

    Tensor<T> full(Shape shape, T value) {
        std::vector<T> v(static_cast<std::size_t>(numel(shape)), value);
        return constant(std::move(shape), std::move(v));
    }

    // Leaf with a gradient slot (parameters, gradient-checked inputs).
    Tensor<T> variable(Shape shape, std::vector<T> values) {
        Tensor<T> t = make(std::move(shape), std::move(values), true);
        node(t.id()).grad_buf();  // materialize zeros so unreachable leaves read as zero grad
        return t;
    }

    Tensor<T> make(Shape shape, std::vector<T> values, bool needs_grad) {
        if (shape.empty()) throw DimensionError("tensor rank must be >= 1");
        for (int d : shape) {
            if (d < 1) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
        }
        if (numel(shape) != static_cast<std::int64_t>(values.size())) {
            throw DimensionError("shape " + shape_str(shape) + " does not match value count " +
                                 std::to_string(values.size()));
        }
        if (!detail::all_finite(values)) throw NumericError("non-finite tensor values");
        Node nd;
        nd.shape = std::move(shape);
        nd.values = std::move(values);
        nd.needs_grad = needs_grad;
        nodes_.push_back(std::move(nd));
        return Tensor<T>(this, static_cast<int>(nodes_.size()) - 1);
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from `loss` to the start of the tape. Gradients add to
    // whatever is already stored; call zero_grad() between distinct losses.
    void backward(const Tensor<T>& loss) {
        if (loss.tape() != this) throw DimensionError("backward: loss lives on another tape");
        Node& ln = node(loss.id());
        if (ln.n() != 1) {
            throw DimensionError("backward requires a scalar loss, got " + shape_str(ln.shape));
        }
        ln.grad_buf()[0] += T(1);
        for (int id = loss.id(); id >= 0; --id) {
            Node& nd = nodes_[static_cast<std::size_t>(id)];
            if (nd.grad.empty() || !nd.backprop) continue;
            nd.backprop();
        }
    }

    void zero_grad() {
        for (Node& nd : nodes_) {
            if (!nd.grad.empty()) std::fill(nd.grad.begin(), nd.grad.end(), T(0));
        }
    }

private:
    std::deque<Node> nodes_;  // deque keeps node references stable for backprop closures
};

template <typename T>
const Shape& Tensor<T>::shape() const {
    return tape_->node(id_).shape;
}
template <typename T>
const std::vector<T>& Tensor<T>::values() const {
    return tape_->node(id_).values;
}
template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
    return tape_->node(id_).grad_buf();
}
template <typename T>
bool Tensor<T>::needs_grad() const {
    return tape_->node(id_).needs_grad;
}
template <typename T>
std::int64_t Tensor<T>::size() const {
    return tape_->node(id_).n();
}
template <typename T>
T Tensor<T>::scalar() const {
    const auto& nd = tape_->node(id_);
    if (nd.n() != 1) throw DimensionError("scalar() on tensor of shape " + shape_str(nd.shape));
    return nd.values[0];
}
template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return tape_->constant(shape(), values());
}

namespace detail {

template <typename T>
void check_same_tape(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.tape() != b.tape()) throw DimensionError("operands live on different tapes");
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "add");
    Tape<T>& tp = *a.tape();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    bool ng = a.needs_grad() || b.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *bn = &tp.node(b.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, bn, yn] {
            if (an->needs_grad) detail::add_into(an->grad_buf(), yn->grad);
            if (bn->needs_grad) detail::add_into(bn->grad_buf(), yn->grad);
        };
    }
    return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "sub");
    Tape<T>& tp = *a.tape();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    bool ng = a.needs_grad() || b.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *bn = &tp.node(b.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, bn, yn] {
            if (an->needs_grad) detail::add_into(an->grad_buf(), yn->grad);
            if (bn->needs_grad) {
                auto& g = bn->grad_buf();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= yn->grad[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b, "mul");
    Tape<T>& tp = *a.tape();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    bool ng = a.needs_grad() || b.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *bn = &tp.node(b.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, bn, yn] {
            if (an->needs_grad) {
                auto& g = an->grad_buf();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * bn->values[i];
            }
            if (bn->needs_grad) {
                auto& g = bn->grad_buf();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * an->values[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v += c;
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn] { detail::add_into(an->grad_buf(), yn->grad); };
    }
    return y;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v *= c;
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn, c] {
            auto& g = an->grad_buf();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * c;
        };
    }
    return y;
}

// Subgradient at 0 takes the negative-side value (slope 0 for relu).
template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v = v > T(0) ? v : T(0);
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn] {
            auto& g = an->grad_buf();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (an->values[i] > T(0)) g[i] += yn->grad[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v = v > T(0) ? v : slope * v;
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn, slope] {
            auto& g = an->grad_buf();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += yn->grad[i] * (an->values[i] > T(0) ? T(1) : slope);
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v = std::tanh(v);
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn] {
            auto& g = an->grad_buf();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T t = yn->values[i];
                g[i] += yn->grad[i] * (T(1) - t * t);
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    Tape<T>& tp = *a.tape();
    std::vector<T> out(a.values());
    for (T& v : out) v = v < T(0) ? -v : v;
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make(a.shape(), std::move(out), ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn] {
            auto& g = an->grad_buf();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += an->values[i] > T(0) ? yn->grad[i] : -yn->grad[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    Tape<T>& tp = *a.tape();
    const auto& av = a.values();
    T acc = 0;
    for (T v : av) acc += v;
    const T m = acc / static_cast<T>(av.size());
    bool ng = a.needs_grad();
    Tensor<T> y = tp.make({1}, {m}, ng);
    if (ng) {
        auto *an = &tp.node(a.id()), *yn = &tp.node(y.id());
        yn->backprop = [an, yn] {
            const T g = yn->grad[0] / static_cast<T>(an->values.size());
            auto& ga = an->grad_buf();
            for (T& v : ga) v += g;
        };
    }
    return y;
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
    return mul(a, a);
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// Shape-changing operations
// ---------------------------------------------------------------------------

// Per-channel bias on an NCHW activation map.
template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& b) {
    detail::check_same_tape(x, b);
    const Shape& xs = x.shape();
    const Shape& bs = b.shape();
    if (xs.size() != 4 || bs.size() != 1 || bs[0] != xs[1]) {
        throw DimensionError("bias_add: need NCHW x and [C] bias, got " + shape_str(xs) + " and " +
                             shape_str(bs));
    }
    Tape<T>& tp = *x.tape();
    const int N = xs[0], C = xs[1];
    const std::int64_t plane = static_cast<std::int64_t>(xs[2]) * xs[3];
    std::vector<T> out(x.values());
    const auto& bv = b.values();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            T* p = out.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
            const T bc = bv[static_cast<std::size_t>(c)];
            for (std::int64_t i = 0; i < plane; ++i) p[i] += bc;
        }
    }
    bool ng = x.needs_grad() || b.needs_grad();
    Tensor<T> y = tp.make(xs, std::move(out), ng);
    if (ng) {
        auto *xn = &tp.node(x.id()), *bn = &tp.node(b.id()), *yn = &tp.node(y.id());
        yn->backprop = [xn, bn, yn, N, C, plane] {
            if (xn->needs_grad) detail::add_into(xn->grad_buf(), yn->grad);
            if (bn->needs_grad) {
                auto& gb = bn->grad_buf();
                for (int n = 0; n < N; ++n) {
                    for (int c = 0; c < C; ++c) {
                        const T* g = yn->grad.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
                        T acc = 0;
                        for (std::int64_t i = 0; i < plane; ++i) acc += g[i];
                        gb[static_cast<std::size_t>(c)] += acc;
                    }
                }
            }
        };
    }
    return y;
}

namespace detail {

inline int reflect_index(int i, int n) {
    // mirror without repeating the edge sample; valid while |overhang| <= n-1
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace detail

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, Pad2d pad, PadMode mode) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw DimensionError("pad2d: need NCHW input, got " + shape_str(xs));
    if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0) {
        throw DimensionError("pad2d: negative padding");
    }
    const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    if (mode == PadMode::Reflect) {
        if (std::max(pad.top, pad.bottom) > H - 1 || std::max(pad.left, pad.right) > W - 1) {
            throw DimensionError("pad2d: reflect padding exceeds size-1");
        }
    }
    const int Hp = H + pad.top + pad.bottom;
    const int Wp = W + pad.left + pad.right;
    Tape<T>& tp = *x.tape();
    const auto& xv = x.values();

    // source index per padded row/col, or -1 for zero fill
    std::vector<int> row_src(static_cast<std::size_t>(Hp)), col_src(static_cast<std::size_t>(Wp));
    for (int i = 0; i < Hp; ++i) {
        const int s = i - pad.top;
        row_src[static_cast<std::size_t>(i)] =
            (s >= 0 && s < H) ? s
            : mode == PadMode::Zero ? -1
            : mode == PadMode::Reflect ? detail::reflect_index(s, H)
                                       : detail::clamp_index(s, H);
    }
    for (int j = 0; j < Wp; ++j) {
        const int s = j - pad.left;
        col_src[static_cast<std::size_t>(j)] =
            (s >= 0 && s < W) ? s
            : mode == PadMode::Zero ? -1
            : mode == PadMode::Reflect ? detail::reflect_index(s, W)
                                       : detail::clamp_index(s, W);
    }

    std::vector<T> out(static_cast<std::size_t>(N) * C * Hp * Wp, T(0));
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = xv.data() + static_cast<std::int64_t>(nc) * H * W;
        T* dst = out.data() + static_cast<std::int64_t>(nc) * Hp * Wp;
        for (int i = 0; i < Hp; ++i) {
            const int si = row_src[static_cast<std::size_t>(i)];
            if (si < 0) continue;
            for (int j = 0; j < Wp; ++j) {
                const int sj = col_src[static_cast<std::size_t>(j)];
                if (sj >= 0) dst[i * Wp + j] = src[si * W + sj];
            }
        }
    }
    bool ng = x.needs_grad();
    Tensor<T> y = tp.make({N, C, Hp, Wp}, std::move(out), ng);
    if (ng) {
        auto *xn = &tp.node(x.id()), *yn = &tp.node(y.id());
        yn->backprop = [xn, yn, row_src, col_src, N, C, H, W, Hp, Wp] {
            auto& gx = xn->grad_buf();
            for (int nc = 0; nc < N * C; ++nc) {
                const T* g = yn->grad.data() + static_cast<std::int64_t>(nc) * Hp * Wp;
                T* dst = gx.data() + static_cast<std::int64_t>(nc) * H * W;
                for (int i = 0; i < Hp; ++i) {
                    const int si = row_src[static_cast<std::size_t>(i)];
                    if (si < 0) continue;
                    for (int j = 0; j < Wp; ++j) {
                        const int sj = col_src[static_cast<std::size_t>(j)];
                        if (sj >= 0) dst[si * W + sj] += g[i * Wp + j];
                    }
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation) via im2col + GEMM
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

struct ConvDims {
    int N, C, H, W;        // input
    int F, kh, kw;         // kernel
    int stride;
    Pad2d pad;
    int Hp, Wp;            // padded input
    int oh, ow;            // output grid
    std::int64_t ckk() const { return static_cast<std::int64_t>(C) * kh * kw; }
    std::int64_t ohw() const { return static_cast<std::int64_t>(oh) * ow; }
};

inline ConvDims conv_dims(const Shape& xs, const Shape& ks, int stride, Pad2d pad, const char* op) {
    if (xs.size() != 4 || ks.size() != 4) {
        throw DimensionError(std::string(op) + ": need NCHW input and FCHW kernel, got " +
                             shape_str(xs) + " and " + shape_str(ks));
    }
    if (xs[1] != ks[1]) {
        throw DimensionError(std::string(op) + ": channel mismatch " + shape_str(xs) + " vs kernel " +
                             shape_str(ks));
    }
    if (stride < 1) throw DimensionError(std::string(op) + ": stride must be >= 1");
    if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0) {
        throw DimensionError(std::string(op) + ": negative padding");
    }
    ConvDims d;
    d.N = xs[0];
    d.C = xs[1];
    d.H = xs[2];
    d.W = xs[3];
    d.F = ks[0];
    d.kh = ks[2];
    d.kw = ks[3];
    d.stride = stride;
    d.pad = pad;
    d.Hp = d.H + pad.top + pad.bottom;
    d.Wp = d.W + pad.left + pad.right;
    if (d.kh > d.Hp || d.kw > d.Wp) {
        throw DimensionError(std::string(op) + ": kernel " + shape_str(ks) +
                             " larger than padded input " + shape_str(xs));
    }
    d.oh = (d.Hp - d.kh) / stride + 1;
    d.ow = (d.Wp - d.kw) / stride + 1;
    return d;
}

// col is (C*kh*kw) x (oh*ow), stored column-major: one receptive field per column.
template <typename T>
void im2col(const T* img, const ConvDims& d, T* col) {
    const std::int64_t ckk = d.ckk();
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            T* dst = col + (static_cast<std::int64_t>(oy) * d.ow + ox) * ckk;
            const int iy0 = oy * d.stride, ix0 = ox * d.stride;
            for (int c = 0; c < d.C; ++c) {
                const T* plane = img + static_cast<std::int64_t>(c) * d.Hp * d.Wp;
                for (int ky = 0; ky < d.kh; ++ky) {
                    const T* row = plane + static_cast<std::int64_t>(iy0 + ky) * d.Wp + ix0;
                    for (int kx = 0; kx < d.kw; ++kx) *dst++ = row[kx];
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add columns back onto the padded image.
template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* img) {
    const std::int64_t ckk = d.ckk();
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            const T* src = col + (static_cast<std::int64_t>(oy) * d.ow + ox) * ckk;
            const int iy0 = oy * d.stride, ix0 = ox * d.stride;
            for (int c = 0; c < d.C; ++c) {
                T* plane = img + static_cast<std::int64_t>(c) * d.Hp * d.Wp;
                for (int ky = 0; ky < d.kh; ++ky) {
                    T* row = plane + static_cast<std::int64_t>(iy0 + ky) * d.Wp + ix0;
                    for (int kx = 0; kx < d.kw; ++kx) row[kx] += *src++;
                }
            }
        }
    }
}

template <typename T>
void pad_image_zero(const T* src, const ConvDims& d, T* dst) {
    std::fill(dst, dst + static_cast<std::int64_t>(d.C) * d.Hp * d.Wp, T(0));
    for (int c = 0; c < d.C; ++c) {
        const T* sp = src + static_cast<std::int64_t>(c) * d.H * d.W;
        T* dp = dst + static_cast<std::int64_t>(c) * d.Hp * d.Wp;
        for (int y = 0; y < d.H; ++y) {
            std::copy(sp + static_cast<std::int64_t>(y) * d.W,
                      sp + static_cast<std::int64_t>(y + 1) * d.W,
                      dp + static_cast<std::int64_t>(y + d.pad.top) * d.Wp + d.pad.left);
        }
    }
}

template <typename T>
void unpad_image_add(const T* padded, const ConvDims& d, T* dst) {
    for (int c = 0; c < d.C; ++c) {
        const T* sp = padded + static_cast<std::int64_t>(c) * d.Hp * d.Wp;
        T* dp = dst + static_cast<std::int64_t>(c) * d.H * d.W;
        for (int y = 0; y < d.H; ++y) {
            const T* srow = sp + static_cast<std::int64_t>(y + d.pad.top) * d.Wp + d.pad.left;
            T* drow = dp + static_cast<std::int64_t>(y) * d.W;
            for (int x = 0; x < d.W; ++x) drow[x] += srow[x];
        }
    }
}

}  // namespace detail

// y[n,f,oy,ox] = sum_{c,ky,kx} x[n, c, oy*s - padT + ky, ox*s - padL + kx] * k[f,c,ky,kx]
// with zero padding; out-of-grid taps contribute zero.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, int stride, Pad2d pad = {}) {
    detail::check_same_tape(x, k);
    const detail::ConvDims d = detail::conv_dims(x.shape(), k.shape(), stride, pad, "conv2d");
    Tape<T>& tp = *x.tape();
    const auto& xv = x.values();
    const auto& kv = k.values();

    const std::int64_t ckk = d.ckk(), ohw = d.ohw();
    std::vector<T> out(static_cast<std::size_t>(d.N) * d.F * ohw);
    std::vector<T> padded(static_cast<std::size_t>(d.C) * d.Hp * d.Wp);
    std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
    Eigen::Map<const detail::RowMat<T>> A(kv.data(), d.F, ckk);
    for (int n = 0; n < d.N; ++n) {
        detail::pad_image_zero(xv.data() + static_cast<std::int64_t>(n) * d.C * d.H * d.W, d,
                               padded.data());
        detail::im2col(padded.data(), d, col.data());
        Eigen::Map<const detail::ColMat<T>> B(col.data(), ckk, ohw);
        Eigen::Map<detail::RowMat<T>> Y(out.data() + static_cast<std::int64_t>(n) * d.F * ohw, d.F,
                                        ohw);
        Y.noalias() = A * B;
    }

    bool ng = x.needs_grad() || k.needs_grad();
    Tensor<T> y = tp.make({d.N, d.F, d.oh, d.ow}, std::move(out), ng);
    if (ng) {
        auto *xn = &tp.node(x.id()), *kn = &tp.node(k.id()), *yn = &tp.node(y.id());
        yn->backprop = [xn, kn, yn, d] {
            const std::int64_t ckk2 = d.ckk(), ohw2 = d.ohw();
            std::vector<T> col(static_cast<std::size_t>(ckk2 * ohw2));
            std::vector<T> padded(static_cast<std::size_t>(d.C) * d.Hp * d.Wp);
            const bool want_k = kn->needs_grad, want_x = xn->needs_grad;
            if (want_k) kn->grad_buf();
            if (want_x) xn->grad_buf();
            Eigen::Map<const detail::RowMat<T>> A(kn->values.data(), d.F, ckk2);
            for (int n = 0; n < d.N; ++n) {
                Eigen::Map<const detail::RowMat<T>> G(
                    yn->grad.data() + static_cast<std::int64_t>(n) * d.F * ohw2, d.F, ohw2);
                if (want_k) {
                    detail::pad_image_zero(
                        xn->values.data() + static_cast<std::int64_t>(n) * d.C * d.H * d.W, d,
                        padded.data());
                    detail::im2col(padded.data(), d, col.data());
                    Eigen::Map<const detail::ColMat<T>> B(col.data(), ckk2, ohw2);
                    Eigen::Map<detail::RowMat<T>> dK(kn->grad.data(), d.F, ckk2);
                    dK.noalias() += G * B.transpose();
                }
                if (want_x) {
                    Eigen::Map<detail::ColMat<T>> dB(col.data(), ckk2, ohw2);
                    dB.noalias() = A.transpose() * G;
                    std::fill(padded.begin(), padded.end(), T(0));
                    detail::col2im_add(col.data(), d, padded.data());
                    detail::unpad_image_add(
                        padded.data(), d,
                        xn->grad.data() + static_cast<std::int64_t>(n) * d.C * d.H * d.W);
                }
            }
        };
    }
    return y;
}

// Exact adjoint of conv2d with the same kernel/stride/padding: maps an
// [N,F,H,W] map back up to [N,C,(H-1)*stride - padT - padB + kh, ...].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& k, int stride, Pad2d pad = {}) {
    detail::check_same_tape(x, k);
    const Shape& xs = x.shape();
    const Shape& ks = k.shape();
    if (xs.size() != 4 || ks.size() != 4) {
        throw DimensionError("conv2d_transpose: need NCHW input and FCHW kernel, got " +
                             shape_str(xs) + " and " + shape_str(ks));
    }
    if (xs[1] != ks[0]) {
        throw DimensionError("conv2d_transpose: input channels " + shape_str(xs) +
                             " must match kernel F of " + shape_str(ks));
    }
    const int N = xs[0], F = xs[1], H = xs[2], W = xs[3];
    const int C = ks[1], kh = ks[2], kw = ks[3];
    const int Ho = (H - 1) * stride - pad.top - pad.bottom + kh;
    const int Wo = (W - 1) * stride - pad.left - pad.right + kw;
    if (stride < 1) throw DimensionError("conv2d_transpose: stride must be >= 1");
    if (Ho < 1 || Wo < 1) throw DimensionError("conv2d_transpose: output would be empty");

    // Dims of the conv this op is adjoint to: input [N,C,Ho,Wo] -> output [N,F,H,W].
    detail::ConvDims d;
    d.N = N;
    d.C = C;
    d.H = Ho;
    d.W = Wo;
    d.F = F;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    d.Hp = Ho + pad.top + pad.bottom;
    d.Wp = Wo + pad.left + pad.right;
    d.oh = H;
    d.ow = W;

    Tape<T>& tp = *x.tape();
    const auto& xv = x.values();
    const auto& kv = k.values();
    const std::int64_t ckk = d.ckk(), ohw = d.ohw();
    std::vector<T> out(static_cast<std::size_t>(N) * C * Ho * Wo, T(0));
    std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
    std::vector<T> padded(static_cast<std::size_t>(C) * d.Hp * d.Wp);
    Eigen::Map<const detail::RowMat<T>> A(kv.data(), F, ckk);
    for (int n = 0; n < N; ++n) {
        Eigen::Map<const detail::RowMat<T>> Y(xv.data() + static_cast<std::int64_t>(n) * F * ohw, F,
                                              ohw);
        Eigen::Map<detail::ColMat<T>> B(col.data(), ckk, ohw);
        B.noalias() = A.transpose() * Y;
        std::fill(padded.begin(), padded.end(), T(0));
        detail::col2im_add(col.data(), d, padded.data());
        detail::unpad_image_add(padded.data(), d,
                                out.data() + static_cast<std::int64_t>(n) * C * Ho * Wo);
    }

    bool ng = x.needs_grad() || k.needs_grad();
    Tensor<T> y = tp.make({N, C, Ho, Wo}, std::move(out), ng);
    if (ng) {
        auto *xn = &tp.node(x.id()), *kn = &tp.node(k.id()), *yn = &tp.node(y.id());
        yn->backprop = [xn, kn, yn, d] {
            const std::int64_t ckk2 = d.ckk(), ohw2 = d.ohw();
            std::vector<T> col(static_cast<std::size_t>(ckk2 * ohw2));
            std::vector<T> padded(static_cast<std::size_t>(d.C) * d.Hp * d.Wp);
            const bool want_k = kn->needs_grad, want_x = xn->needs_grad;
            if (want_k) kn->grad_buf();
            if (want_x) xn->grad_buf();
            Eigen::Map<const detail::RowMat<T>> A(kn->values.data(), d.F, ckk2);
            for (int n = 0; n < d.N; ++n) {
                // d/dinput: forward conv of the output gradient
                detail::pad_image_zero(
                    yn->grad.data() + static_cast<std::int64_t>(n) * d.C * d.H * d.W, d,
                    padded.data());
                detail::im2col(padded.data(), d, col.data());
                Eigen::Map<const detail::ColMat<T>> B(col.data(), ckk2, ohw2);
                if (want_x) {
                    Eigen::Map<detail::RowMat<T>> dX(
                        xn->grad.data() + static_cast<std::int64_t>(n) * d.F * ohw2, d.F, ohw2);
                    dX.noalias() += A * B;
                }
                if (want_k) {
                    Eigen::Map<const detail::RowMat<T>> X(
                        xn->values.data() + static_cast<std::int64_t>(n) * d.F * ohw2, d.F, ohw2);
                    Eigen::Map<detail::RowMat<T>> dK(kn->grad.data(), d.F, ckk2);
                    dK.noalias() += X * B.transpose();
                }
            }
        };
    }
    return y;
}

// Normalizes each (n, c) plane to zero mean / unit population variance.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw DimensionError("instance_norm: need NCHW input, got " + shape_str(xs));
    if (!(eps > T(0))) throw DimensionError("instance_norm: eps must be positive");
    Tape<T>& tp = *x.tape();
    const int planes = xs[0] * xs[1];
    const std::int64_t plane = static_cast<std::int64_t>(xs[2]) * xs[3];
    const auto& xv = x.values();
    std::vector<T> out(xv.size());
    std::vector<T> inv_std(static_cast<std::size_t>(planes));
    for (int p = 0; p < planes; ++p) {
        const T* src = xv.data() + p * plane;
        T* dst = out.data() + p * plane;
        T mu = 0;
        for (std::int64_t i = 0; i < plane; ++i) mu += src[i];
        mu /= static_cast<T>(plane);
        T var = 0;
        for (std::int64_t i = 0; i < plane; ++i) {
            const T c = src[i] - mu;
            var += c * c;
        }
        var /= static_cast<T>(plane);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(p)] = inv;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - mu) * inv;
    }
    bool ng = x.needs_grad();
    Tensor<T> y = tp.make(xs, std::move(out), ng);
    if (ng) {
        auto *xn = &tp.node(x.id()), *yn = &tp.node(y.id());
        yn->backprop = [xn, yn, inv_std, planes, plane] {
            auto& gx = xn->grad_buf();
            for (int p = 0; p < planes; ++p) {
                const T* g = yn->grad.data() + p * plane;
                const T* ynorm = yn->values.data() + p * plane;
                T* dst = gx.data() + p * plane;
                T gmean = 0, gymean = 0;
                for (std::int64_t i = 0; i < plane; ++i) {
                    gmean += g[i];
                    gymean += g[i] * ynorm[i];
                }
                gmean /= static_cast<T>(plane);
                gymean /= static_cast<T>(plane);
                const T inv = inv_std[static_cast<std::size_t>(p)];
                for (std::int64_t i = 0; i < plane; ++i) {
                    dst[i] += inv * (g[i] - gmean - ynorm[i] * gymean);
                }
            }
        };
    }
    return y;
}

}  // namespace patchstyle
