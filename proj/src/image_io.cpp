#include "rlcsc/image.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace rlcsc {

namespace {

constexpr double kYccOffset[3] = {16.0 / 255.0, 128.0 / 255.0, 128.0 / 255.0};
constexpr double kYccMatrix[3][3] = {
    {65.481 / 255.0, 128.553 / 255.0, 24.966 / 255.0},
    {-37.797 / 255.0, -74.203 / 255.0, 112.0 / 255.0},
    {112.0 / 255.0, -93.786 / 255.0, -18.214 / 255.0},
};

std::array<std::array<double, 3>, 3> invert3x3(const double m[3][3]) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    std::array<std::array<double, 3>, 3> inv;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

std::uint8_t quantize8(double v) {
    const double q = std::round(v * 255.0); // half away from zero
    return static_cast<std::uint8_t>(q < 0.0 ? 0.0 : (q > 255.0 ? 255.0 : q));
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

// Rows of 8-bit samples, `channels` = 1 (gray) or 3 (rgb).
struct Raster {
    int h = 0, w = 0, channels = 0;
    std::vector<std::uint8_t> bytes;
};

Raster read_png(const std::filesystem::path& path) {
    PngReader r;
    r.fp = std::fopen(path.string().c_str(), "rb");
    if (!r.fp) throw IoError("cannot open " + path.string());

    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError(path.string() + ": not a PNG file");

    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("libpng init failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw FormatError(path.string() + ": corrupt PNG");

    png_init_io(r.png, r.fp);
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    if (bit_depth == 16)
        throw FormatError(path.string() + ": 16-bit PNG unsupported (8-bit only)");
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    Raster out;
    out.h = static_cast<int>(png_get_image_height(r.png, r.info));
    out.w = static_cast<int>(png_get_image_width(r.png, r.info));
    out.channels = static_cast<int>(png_get_channels(r.png, r.info));
    if (out.channels != 1 && out.channels != 3)
        throw FormatError(path.string() + ": unsupported channel count " +
                          std::to_string(out.channels));

    out.bytes.resize(static_cast<std::size_t>(out.h) * out.w * out.channels);
    std::vector<png_bytep> rows(out.h);
    for (int y = 0; y < out.h; ++y)
        rows[y] = out.bytes.data() + static_cast<std::size_t>(y) * out.w * out.channels;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return out;
}

Raster read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw FormatError(path.string() + ": not an 8-bit PGM");

    auto next_int = [&](const char* what) {
        // skip whitespace and '#' comment lines
        for (;;) {
            const int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw FormatError(path.string() + ": bad PGM header (" + what + ")");
        return v;
    };

    const long w = next_int("width"), h = next_int("height"), maxval = next_int("maxval");
    if (maxval != 255) throw FormatError(path.string() + ": PGM maxval must be 255 (8-bit)");

    Raster out;
    out.h = static_cast<int>(h);
    out.w = static_cast<int>(w);
    out.channels = 1;
    out.bytes.resize(static_cast<std::size_t>(h) * w);
    if (magic == "P5") {
        in.get(); // single whitespace after maxval
        in.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(out.bytes.size()));
        if (in.gcount() != static_cast<std::streamsize>(out.bytes.size()))
            throw FormatError(path.string() + ": truncated PGM payload");
    } else {
        for (auto& b : out.bytes) {
            long v;
            in >> v;
            if (!in || v < 0 || v > 255) throw FormatError(path.string() + ": bad PGM sample");
            b = static_cast<std::uint8_t>(v);
        }
    }
    return out;
}

bool has_ext(const std::filesystem::path& p, const char* ext) {
    std::string e = p.extension().string();
    for (auto& ch : e) ch = static_cast<char>(std::tolower(ch));
    return e == ext;
}

} // namespace

double bt601_luma(double r, double g, double b) {
    return kYccOffset[0] + kYccMatrix[0][0] * r + kYccMatrix[0][1] * g + kYccMatrix[0][2] * b;
}

ImageYcc rgb_to_ycbcr(const ImageRgb& rgb) {
    ImageYcc out;
    out.y = ImageY(rgb.h, rgb.w);
    out.cb = ImageY(rgb.h, rgb.w);
    out.cr = ImageY(rgb.h, rgb.w);
    for (std::size_t i = 0; i < rgb.r.size(); ++i) {
        const double r = rgb.r[i], g = rgb.g[i], b = rgb.b[i];
        out.y.samples[i] = kYccOffset[0] + kYccMatrix[0][0] * r + kYccMatrix[0][1] * g + kYccMatrix[0][2] * b;
        out.cb.samples[i] = kYccOffset[1] + kYccMatrix[1][0] * r + kYccMatrix[1][1] * g + kYccMatrix[1][2] * b;
        out.cr.samples[i] = kYccOffset[2] + kYccMatrix[2][0] * r + kYccMatrix[2][1] * g + kYccMatrix[2][2] * b;
    }
    return out;
}

ImageRgb ycbcr_to_rgb(const ImageYcc& ycc) {
    static const auto inv = invert3x3(kYccMatrix);
    ImageRgb out(ycc.y.h, ycc.y.w);
    for (std::size_t i = 0; i < out.r.size(); ++i) {
        const double y = ycc.y.samples[i] - kYccOffset[0];
        const double cb = ycc.cb.samples[i] - kYccOffset[1];
        const double cr = ycc.cr.samples[i] - kYccOffset[2];
        out.r[i] = inv[0][0] * y + inv[0][1] * cb + inv[0][2] * cr;
        out.g[i] = inv[1][0] * y + inv[1][1] * cb + inv[1][2] * cr;
        out.b[i] = inv[2][0] * y + inv[2][1] * cb + inv[2][2] * cr;
    }
    return out;
}

LoadedImage load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    Raster raster;
    if (has_ext(path, ".pgm"))
        raster = read_pgm(path);
    else if (has_ext(path, ".png"))
        raster = read_png(path);
    else
        throw FormatError(path.string() + ": unsupported extension (PNG or PGM expected)");

    LoadedImage out;
    if (raster.channels == 1) {
        out.y = ImageY(raster.h, raster.w);
        for (std::size_t i = 0; i < out.y.samples.size(); ++i)
            out.y.samples[i] = raster.bytes[i] / 255.0;
    } else {
        ImageRgb rgb(raster.h, raster.w);
        for (std::size_t i = 0; i < rgb.r.size(); ++i) {
            rgb.r[i] = raster.bytes[3 * i + 0] / 255.0;
            rgb.g[i] = raster.bytes[3 * i + 1] / 255.0;
            rgb.b[i] = raster.bytes[3 * i + 2] / 255.0;
        }
        out.y = ImageY(raster.h, raster.w);
        for (std::size_t i = 0; i < rgb.r.size(); ++i)
            out.y.samples[i] = bt601_luma(rgb.r[i], rgb.g[i], rgb.b[i]);
        out.rgb = std::move(rgb);
    }
    return out;
}

ImageY load_y(const std::filesystem::path& path) { return load_image(path).y; }

namespace {

void write_png(const std::filesystem::path& path, int h, int w, int channels,
               const std::vector<std::uint8_t>& bytes) {
    PngWriter wr;
    wr.fp = std::fopen(path.string().c_str(), "wb");
    if (!wr.fp) throw IoError("cannot write " + path.string());
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) throw IoError("libpng init failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + path.string());

    png_init_io(wr.png, wr.fp);
    png_set_IHDR(wr.png, wr.info, w, h, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * w * channels);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

} // namespace

void save_y(const ImageY& img, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(img.samples.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize8(img.samples[i]);
    write_png(path, img.h, img.w, 1, bytes);
}

void save_rgb(const ImageRgb& img, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(img.r.size() * 3);
    for (std::size_t i = 0; i < img.r.size(); ++i) {
        bytes[3 * i + 0] = quantize8(img.r[i]);
        bytes[3 * i + 1] = quantize8(img.g[i]);
        bytes[3 * i + 2] = quantize8(img.b[i]);
    }
    write_png(path, img.h, img.w, 3, bytes);
}

ImageY clamp01(const ImageY& img) {
    ImageY out = img;
    for (auto& v : out.samples) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return out;
}

} // namespace rlcsc
