#include "rlcsc/resize.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rlcsc {

namespace {

// Cubic convolution kernel, a = -0.5, support [-2, 2].
double cubic(double x) {
    const double ax = std::abs(x);
    if (ax <= 1.0) return (1.5 * ax - 2.5) * ax * ax + 1.0;
    if (ax < 2.0) return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
    return 0.0;
}

int mirror_index(int idx, int n) {
    while (idx < 0 || idx >= n) {
        if (idx < 0) idx = -idx - 1;
        if (idx >= n) idx = 2 * n - 1 - idx;
    }
    return idx;
}

struct TapSet {
    int taps = 0;
    std::vector<int> index;     // out_len * taps, mirrored into range
    std::vector<double> weight; // out_len * taps, normalized
};

TapSet contributions(int in_len, int out_len, double scale) {
    const bool antialias = scale < 1.0;
    const double kernel_width = antialias ? 4.0 / scale : 4.0;
    TapSet t;
    t.taps = static_cast<int>(std::ceil(kernel_width)) + 2;
    t.index.resize(static_cast<std::size_t>(out_len) * t.taps);
    t.weight.resize(static_cast<std::size_t>(out_len) * t.taps);

    for (int j = 0; j < out_len; ++j) {
        const double center = (j + 0.5) / scale - 0.5;
        const int left = static_cast<int>(std::floor(center - kernel_width / 2.0));
        double sum = 0.0;
        double* wrow = t.weight.data() + static_cast<std::size_t>(j) * t.taps;
        int* irow = t.index.data() + static_cast<std::size_t>(j) * t.taps;
        for (int i = 0; i < t.taps; ++i) {
            const int pos = left + i;
            const double d = center - pos;
            const double wv = antialias ? scale * cubic(scale * d) : cubic(d);
            wrow[i] = wv;
            sum += wv;
            irow[i] = mirror_index(pos, in_len);
        }
        for (int i = 0; i < t.taps; ++i) wrow[i] /= sum;
    }
    return t;
}

// Resample along the height dimension.
ImageY resample_rows(const ImageY& img, int out_h, double scale) {
    const TapSet t = contributions(img.h, out_h, scale);
    ImageY out(out_h, img.w);
    for (int y = 0; y < out_h; ++y) {
        const double* wrow = t.weight.data() + static_cast<std::size_t>(y) * t.taps;
        const int* irow = t.index.data() + static_cast<std::size_t>(y) * t.taps;
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < t.taps; ++i) acc += wrow[i] * img.at(irow[i], x);
            out.at(y, x) = acc;
        }
    }
    return out;
}

ImageY resample_cols(const ImageY& img, int out_w, double scale) {
    const TapSet t = contributions(img.w, out_w, scale);
    ImageY out(img.h, out_w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double* wrow = t.weight.data() + static_cast<std::size_t>(x) * t.taps;
            const int* irow = t.index.data() + static_cast<std::size_t>(x) * t.taps;
            double acc = 0.0;
            for (int i = 0; i < t.taps; ++i) acc += wrow[i] * img.at(y, irow[i]);
            out.at(y, x) = acc;
        }
    }
    return out;
}

} // namespace

ImageY bicubic_resize(const ImageY& img, double scale) {
    if (!(scale > 0.0)) throw NumericError("bicubic_resize: scale must be positive");
    if (img.h <= 0 || img.w <= 0) throw ShapeError("bicubic_resize: empty image");
    const long out_h = std::llround(img.h * scale);
    const long out_w = std::llround(img.w * scale);
    if (out_h < 1 || out_w < 1)
        throw NumericError("bicubic_resize: degenerate output size " + std::to_string(out_h) + "x" +
                           std::to_string(out_w) + " from scale " + std::to_string(scale));
    return resample_cols(resample_rows(img, static_cast<int>(out_h), scale), static_cast<int>(out_w),
                         scale);
}

std::pair<ImageY, ImageY> make_ilr(const ImageY& img, int sr_scale) {
    if (sr_scale < 1) throw NumericError("make_ilr: scale must be >= 1");
    if (img.h < sr_scale || img.w < sr_scale)
        throw ShapeError("make_ilr: image " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                         " smaller than scale " + std::to_string(sr_scale));
    const int ch = img.h - img.h % sr_scale;
    const int cw = img.w - img.w % sr_scale;
    ImageY hr(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) hr.at(y, x) = img.at(y, x);

    const ImageY lr = bicubic_resize(hr, 1.0 / sr_scale);
    ImageY ilr = bicubic_resize(lr, static_cast<double>(sr_scale));
    return {std::move(ilr), std::move(hr)};
}

} // namespace rlcsc
