#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlcsc/image.hpp"
#include "rlcsc/model.hpp"

namespace rlcsc {

ImageY crop_border(const ImageY& img, int px);

// 10 log10(1 / mse) on the [0,1] scale; identical images give +infinity.
double psnr(const ImageY& a, const ImageY& b);

// Single-scale SSIM: 11x11 Gaussian window sigma 1.5, K1 0.01, K2 0.03,
// dynamic range 1, averaged over valid (fully inside) window positions.
double ssim(const ImageY& a, const ImageY& b);

struct EvalEntry {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    int scale = 0;
    int crop = 0;
    std::vector<EvalEntry> images;
    std::vector<std::string> missing;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

using Predictor = std::function<ImageY(const ImageY&)>;

// Identity on the interpolated input: the bicubic baseline.
Predictor bicubic_predictor();

// Runs the network on the luminance plane in double precision.
Predictor model_predictor(RlcscParams<double> params);

// Per image: make_ilr -> predict -> clamp to [0,1] -> crop both by `crop`
// pixels per side -> PSNR/SSIM. Missing or unreadable files are listed and
// evaluation continues.
EvalReport evaluate(const std::vector<std::filesystem::path>& files, const Predictor& predict,
                    int scale, int crop);

std::string report_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

} // namespace rlcsc
