#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "rlcsc/errors.hpp"
#include "rlcsc/tensor.hpp"

namespace rlcsc {

// Luminance plane on the [0,1] scale (8-bit value / 255). RGB inputs carry
// BT.601 studio-swing luma, so their samples live in [16/255, 235/255];
// grayscale inputs span the full range.
struct ImageY {
    int h = 0, w = 0;
    std::vector<double> samples;

    ImageY() = default;
    ImageY(int h_, int w_) : h(h_), w(w_), samples(static_cast<std::size_t>(h_) * w_, 0.0) {}

    double& at(int y, int x) { return samples[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return samples[static_cast<std::size_t>(y) * w + x]; }

    Tensor4<double> to_tensor() const {
        Tensor4<double> t(1, 1, h, w);
        t.data = samples;
        return t;
    }
    static ImageY from_tensor(const Tensor4<double>& t) {
        if (t.n != 1 || t.c != 1) throw ShapeError("ImageY: tensor must be (1,1,h,w), got " + t.shape_str());
        ImageY img(t.h, t.w);
        img.samples = t.data;
        return img;
    }
};

struct ImageRgb {
    int h = 0, w = 0;
    std::vector<double> r, g, b; // each h*w, [0,1]

    ImageRgb() = default;
    ImageRgb(int h_, int w_)
        : h(h_), w(w_), r(static_cast<std::size_t>(h_) * w_, 0.0), g(r.size(), 0.0), b(r.size(), 0.0) {}
};

struct ImageYcc {
    ImageY y, cb, cr;
};

// BT.601 studio swing: Y = 16/255 + (65.481 R + 128.553 G + 24.966 B)/255,
// RGB in [0,1]. White maps to 235/255.
double bt601_luma(double r, double g, double b);

ImageYcc rgb_to_ycbcr(const ImageRgb& rgb);
ImageRgb ycbcr_to_rgb(const ImageYcc& ycc);

struct LoadedImage {
    ImageY y;
    std::optional<ImageRgb> rgb; // present when the source had color
};

// 8-bit grayscale or RGB PNG, or 8-bit PGM.
LoadedImage load_image(const std::filesystem::path& path);
ImageY load_y(const std::filesystem::path& path);

// 8-bit PNG output; values are clamped and quantized half-away-from-zero.
void save_y(const ImageY& img, const std::filesystem::path& path);
void save_rgb(const ImageRgb& img, const std::filesystem::path& path);

ImageY clamp01(const ImageY& img);

} // namespace rlcsc
