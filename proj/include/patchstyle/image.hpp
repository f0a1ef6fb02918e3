#pragma once

#include <string>
#include <vector>

#include "patchstyle/errors.hpp"
#include "patchstyle/tensor.hpp"

namespace patchstyle {

// Binarization threshold: values below are ink (0 = black ink, 1 = white paper).
inline constexpr float kInkThreshold = 0.5f;

inline bool is_ink(float v) { return v < kInkThreshold; }

// Row-major single-channel image with float pixels in [0, 1].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, float fill = 1.0f);

    int width() const { return width_; }
    int height() const { return height_; }
    std::int64_t pixel_count() const { return static_cast<std::int64_t>(width_) * height_; }

    float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    float& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    bool ink_at(int x, int y) const { return is_ink(at(x, y)); }

    const std::vector<float>& pixels() const { return pixels_; }
    std::vector<float>& pixels() { return pixels_; }

    bool same_size(const GrayImage& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> pixels_;
};

// --- I/O (format chosen by extension: .png or .pgm) ---
GrayImage load_image(const std::string& path);
void save_image(const GrayImage& img, const std::string& path);

GrayImage load_pgm(const std::string& path);
void save_pgm(const GrayImage& img, const std::string& path);
GrayImage load_png(const std::string& path);
void save_png(const GrayImage& img, const std::string& path);

// --- Geometry ---

// Rotates by `degrees` about the image center onto a tight bounding-box canvas;
// exact index permutations for multiples of 90, bilinear resampling otherwise.
// Off-canvas samples read as `fill`. rotate(img, 90) satisfies
// out(x, y) = in(y, H-1-x).
GrayImage rotate(const GrayImage& img, double degrees, float fill = 1.0f);

GrayImage crop(const GrayImage& img, int x, int y, int w, int h);
void paste(GrayImage& dst, const GrayImage& src, int x, int y);

// --- Morphology on binarized ink (square structuring element, side 2r+1) ---
// Pixels outside the image count as background. Output is binary {0, 1}.
GrayImage erode_ink(const GrayImage& img, int radius);
GrayImage dilate_ink(const GrayImage& img, int radius);

// --- Blur ---

// Normalized 1-D Gaussian taps; tap i covers offset i - size/2, so even sizes
// anchor at offsets -size/2 .. size/2-1.
std::vector<float> gaussian_kernel1d(int size, double sigma);

// Separable Gaussian with replicate edge handling; output size equals input size.
GrayImage gaussian_blur(const GrayImage& img, int size, double sigma);

// --- Analysis ---

// Majority vote over binarized border pixels: returns 0.0f when strictly more
// than half are ink, else 1.0f.
float background_value(const GrayImage& img);

// True when every binarized pixel equals the binarized background.
bool is_blank(const GrayImage& img, float background);

std::int64_t ink_count(const GrayImage& img);

// --- Tensor bridge ---
// Images map to [-1, 1] activations with ink positive: t = 1 - 2v, v = (1-t)/2.

template <typename T>
Tensor<T> image_to_tensor(Tape<T>& tape, const GrayImage& img, bool needs_grad = false) {
    std::vector<T> v(static_cast<std::size_t>(img.pixel_count()));
    const auto& px = img.pixels();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = T(1) - T(2) * static_cast<T>(px[i]);
    return tape.make({1, 1, img.height(), img.width()}, std::move(v), needs_grad);
}

template <typename T>
Tensor<T> images_to_tensor(Tape<T>& tape, const std::vector<GrayImage>& imgs) {
    if (imgs.empty()) throw DimensionError("images_to_tensor: empty batch");
    const int H = imgs[0].height(), W = imgs[0].width();
    std::vector<T> v;
    v.reserve(static_cast<std::size_t>(imgs.size()) * H * W);
    for (const GrayImage& img : imgs) {
        if (img.height() != H || img.width() != W) {
            throw DimensionError("images_to_tensor: mixed image sizes in batch");
        }
        for (float p : img.pixels()) v.push_back(T(1) - T(2) * static_cast<T>(p));
    }
    return tape.constant({static_cast<int>(imgs.size()), 1, H, W}, std::move(v));
}

template <typename T>
GrayImage tensor_to_image(const Tensor<T>& t, int batch_index = 0) {
    const Shape& s = t.shape();
    if (s.size() != 4 || s[1] != 1) {
        throw DimensionError("tensor_to_image: need [N,1,H,W], got " + shape_str(s));
    }
    if (batch_index < 0 || batch_index >= s[0]) {
        throw DimensionError("tensor_to_image: batch index out of range");
    }
    const int H = s[2], W = s[3];
    GrayImage img(W, H);
    const T* src = t.values().data() + static_cast<std::int64_t>(batch_index) * H * W;
    auto& px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        double v = (1.0 - static_cast<double>(src[i])) / 2.0;
        px[i] = static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
    }
    return img;
}

// Differentiable Gaussian blur on a single-channel activation map: replicate
// padding plus two constant-kernel convolutions matching gaussian_kernel1d.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, int size, double sigma) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || xs[1] != 1) {
        throw DimensionError("gaussian_blur: need [N,1,H,W], got " + shape_str(xs));
    }
    const std::vector<float> taps = gaussian_kernel1d(size, sigma);
    std::vector<T> k(taps.begin(), taps.end());
    Tape<T>& tp = *x.tape();
    const int lo = size / 2, hi = size - 1 - size / 2;
    Tensor<T> kx = tp.constant({1, 1, 1, size}, k);
    Tensor<T> ky = tp.constant({1, 1, size, 1}, std::move(k));
    Tensor<T> padded = pad2d(x, Pad2d{lo, hi, lo, hi}, PadMode::Replicate);
    return conv2d(conv2d(padded, kx, 1), ky, 1);
}

}  // namespace patchstyle
