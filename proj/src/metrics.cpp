#include "rlcsc/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "rlcsc/resize.hpp"

namespace rlcsc {

ImageY crop_border(const ImageY& img, int px) {
    if (px < 0) throw NumericError("crop_border: negative crop");
    if (px == 0) return img;
    if (2 * px >= std::min(img.h, img.w))
        throw ShapeError("crop_border: crop " + std::to_string(px) + " too large for " +
                         std::to_string(img.h) + "x" + std::to_string(img.w));
    ImageY out(img.h - 2 * px, img.w - 2 * px);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) out.at(y, x) = img.at(y + px, x + px);
    return out;
}

double psnr(const ImageY& a, const ImageY& b) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError("psnr: dimensions differ, " + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                         std::to_string(b.w));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double d = a.samples[i] - b.samples[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.samples.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& gaussian_window() {
    static const std::array<double, kWin> g = [] {
        std::array<double, kWin> w{};
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += w[i];
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return g;
}

// Separable valid-region Gaussian filtering: output is (h-10) x (w-10).
ImageY filter_valid(const ImageY& img) {
    const auto& g = gaussian_window();
    ImageY mid(img.h, img.w - kWin + 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < mid.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += g[i] * img.at(y, x + i);
            mid.at(y, x) = acc;
        }
    ImageY out(img.h - kWin + 1, mid.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += g[i] * mid.at(y + i, x);
            out.at(y, x) = acc;
        }
    return out;
}

ImageY hadamard(const ImageY& a, const ImageY& b) {
    ImageY out(a.h, a.w);
    for (std::size_t i = 0; i < a.samples.size(); ++i) out.samples[i] = a.samples[i] * b.samples[i];
    return out;
}

} // namespace

double ssim(const ImageY& a, const ImageY& b) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError("ssim: dimensions differ, " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
    if (a.h < kWin || a.w < kWin)
        throw ShapeError("ssim: image smaller than the 11x11 window: " + std::to_string(a.h) + "x" +
                         std::to_string(a.w));

    const ImageY mu_a = filter_valid(a);
    const ImageY mu_b = filter_valid(b);
    const ImageY saa = filter_valid(hadamard(a, a));
    const ImageY sbb = filter_valid(hadamard(b, b));
    const ImageY sab = filter_valid(hadamard(a, b));

    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.samples.size(); ++i) {
        const double ma = mu_a.samples[i], mb = mu_b.samples[i];
        const double va = saa.samples[i] - ma * ma;
        const double vb = sbb.samples[i] - mb * mb;
        const double cov = sab.samples[i] - ma * mb;
        const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
        const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
        sum += num / den;
    }
    return sum / static_cast<double>(mu_a.samples.size());
}

Predictor bicubic_predictor() {
    return [](const ImageY& ilr) { return ilr; };
}

Predictor model_predictor(RlcscParams<double> params) {
    params.validate();
    return [params = std::move(params)](const ImageY& ilr) {
        return ImageY::from_tensor(forward(params, ilr.to_tensor()));
    };
}

EvalReport evaluate(const std::vector<std::filesystem::path>& files, const Predictor& predict,
                    int scale, int crop) {
    if (scale < 1) throw NumericError("evaluate: scale must be >= 1");
    EvalReport report;
    report.scale = scale;
    report.crop = crop;
    for (const auto& file : files) {
        ImageY hr_src;
        try {
            hr_src = load_y(file);
        } catch (const Error&) {
            report.missing.push_back(file.string());
            continue;
        }
        auto [ilr, hr] = make_ilr(hr_src, scale);
        const ImageY pred = clamp01(predict(ilr));
        const ImageY pc = crop_border(pred, crop);
        const ImageY hc = crop_border(hr, crop);
        report.images.push_back({file.stem().string(), psnr(pc, hc), ssim(pc, hc)});
    }
    if (!report.images.empty()) {
        double ps = 0.0, ss = 0.0;
        for (const auto& e : report.images) {
            ps += e.psnr;
            ss += e.ssim;
        }
        report.mean_psnr = ps / static_cast<double>(report.images.size());
        report.mean_ssim = ss / static_cast<double>(report.images.size());
    }
    return report;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    std::size_t name_w = 4;
    for (const auto& e : report.images) name_w = std::max(name_w, e.name.size());
    out << "scale x" << report.scale << ", border crop " << report.crop << " px\n";
    char line[256];
    for (const auto& e : report.images) {
        std::snprintf(line, sizeof(line), "%-*s  %6.2f/%.4f\n", static_cast<int>(name_w),
                      e.name.c_str(), e.psnr, e.ssim);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-*s  %6.2f/%.4f\n", static_cast<int>(name_w), "mean",
                  report.mean_psnr, report.mean_ssim);
    out << line;
    for (const auto& m : report.missing) out << "missing: " << m << "\n";
    return out.str();
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "name,psnr,ssim\n";
    char line[256];
    for (const auto& e : report.images) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", e.name.c_str(), e.psnr, e.ssim);
        out << line;
    }
    std::snprintf(line, sizeof(line), "mean,%.6f,%.6f\n", report.mean_psnr, report.mean_ssim);
    out << line;
    return out.str();
}

} // namespace rlcsc
