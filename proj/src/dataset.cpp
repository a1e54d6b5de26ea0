#include "rlcsc/dataset.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "rlcsc/resize.hpp"

namespace rlcsc {

ImageY flip_h(const ImageY& img) {
    ImageY out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) out.at(y, x) = img.at(y, img.w - 1 - x);
    return out;
}

ImageY flip_v(const ImageY& img) {
    ImageY out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) out.at(y, x) = img.at(img.h - 1 - y, x);
    return out;
}

ImageY rotate_ccw(const ImageY& img, int degrees) {
    switch (degrees) {
    case 90: {
        ImageY out(img.w, img.h);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(img.w - 1 - x, y) = img.at(y, x);
        return out;
    }
    case 180: {
        ImageY out(img.h, img.w);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(img.h - 1 - y, img.w - 1 - x) = img.at(y, x);
        return out;
    }
    case 270: {
        ImageY out(img.w, img.h);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(x, img.h - 1 - y) = img.at(y, x);
        return out;
    }
    default:
        throw FormatError("rotate_ccw: angle must be 90, 180 or 270, got " + std::to_string(degrees));
    }
}

std::vector<ImageY> augment(const ImageY& img, const AugmentSpec& spec) {
    std::vector<ImageY> out;
    auto emit_geometric = [&](const ImageY& base) {
        out.push_back(base);
        if (spec.flip_horizontal) out.push_back(flip_h(base));
        if (spec.flip_vertical) out.push_back(flip_v(base));
        for (int deg : spec.rotations) out.push_back(rotate_ccw(base, deg));
    };
    emit_geometric(img);
    for (double ds : spec.downscales) emit_geometric(bicubic_resize(img, ds));
    return out;
}

PatchSet build_patchset(const std::vector<ImageY>& images, const AugmentSpec& spec, int patch,
                        int stride, BuildStats* stats) {
    if (patch < 1 || stride < 1) throw FormatError("build_patchset: patch and stride must be >= 1");
    if (spec.sr_scales.empty()) throw FormatError("build_patchset: at least one SR scale required");

    PatchSet set;
    set.patch_size = static_cast<std::uint16_t>(patch);
    set.stride = static_cast<std::uint16_t>(stride);
    for (int s : spec.sr_scales) set.sr_scales.push_back(static_cast<std::uint16_t>(s));

    BuildStats local;
    const std::size_t pp = static_cast<std::size_t>(patch) * patch;
    for (const ImageY& img : images) {
        for (const ImageY& variant : augment(img, spec)) {
            for (int s : spec.sr_scales) {
                if (variant.h < s || variant.w < s) {
                    ++local.variants_skipped;
                    std::fprintf(stderr, "build_patchset: skipping %dx%d variant (scale %d)\n",
                                 variant.h, variant.w, s);
                    continue;
                }
                auto [ilr, hr] = make_ilr(variant, s);
                if (ilr.h < patch || ilr.w < patch) {
                    ++local.variants_skipped;
                    std::fprintf(stderr,
                                 "build_patchset: skipping %dx%d variant (smaller than %d patch)\n",
                                 ilr.h, ilr.w, patch);
                    continue;
                }
                ++local.variants_used;
                for (int y = 0; y + patch <= ilr.h; y += stride) {
                    for (int x = 0; x + patch <= ilr.w; x += stride) {
                        set.data.reserve(set.data.size() + 2 * pp);
                        for (int py = 0; py < patch; ++py)
                            for (int px = 0; px < patch; ++px)
                                set.data.push_back(static_cast<float>(ilr.at(y + py, x + px)));
                        for (int py = 0; py < patch; ++py)
                            for (int px = 0; px < patch; ++px)
                                set.data.push_back(static_cast<float>(hr.at(y + py, x + px)));
                        ++set.count;
                    }
                }
            }
        }
    }
    if (stats) *stats = local;
    if (set.count == 0) throw FormatError("build_patchset: no patches produced");
    return set;
}

namespace {

constexpr char kMagic[8] = {'R', 'L', 'C', 'S', 'C', 'P', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& buf, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian build expected");
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

template <class T>
T take(const std::uint8_t*& p, const std::uint8_t* end) {
    if (p + sizeof(T) > end) throw FormatError("patch file: truncated header");
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
}

} // namespace

std::vector<std::uint8_t> serialize_patchset(const PatchSet& set) {
    std::vector<std::uint8_t> buf;
    buf.reserve(32 + set.data.size() * sizeof(float));
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put(buf, kVersion);
    put(buf, set.count);
    put(buf, set.patch_size);
    put(buf, set.stride);
    put(buf, static_cast<std::uint16_t>(set.sr_scales.size()));
    for (std::uint16_t s : set.sr_scales) put(buf, s);
    const auto* p = reinterpret_cast<const std::uint8_t*>(set.data.data());
    buf.insert(buf.end(), p, p + set.data.size() * sizeof(float));
    return buf;
}

void save_patchset(const PatchSet& set, const std::filesystem::path& path) {
    const auto buf = serialize_patchset(set);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

PatchSet load_patchset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::uint8_t* p = buf.data();
    const std::uint8_t* end = p + buf.size();
    if (buf.size() < 8 || std::memcmp(p, kMagic, 8) != 0)
        throw FormatError(path.string() + ": not a patch file (bad magic)");
    p += 8;

    const auto version = take<std::uint32_t>(p, end);
    if (version != kVersion)
        throw FormatError(path.string() + ": unsupported patch file version " + std::to_string(version));

    PatchSet set;
    set.count = take<std::uint64_t>(p, end);
    set.patch_size = take<std::uint16_t>(p, end);
    set.stride = take<std::uint16_t>(p, end);
    const auto n_scales = take<std::uint16_t>(p, end);
    for (int i = 0; i < n_scales; ++i) set.sr_scales.push_back(take<std::uint16_t>(p, end));

    const std::size_t payload = set.count * 2 * set.floats_per_patch() * sizeof(float);
    if (static_cast<std::size_t>(end - p) != payload)
        throw FormatError(path.string() + ": payload size mismatch (" +
                          std::to_string(end - p) + " bytes, expected " + std::to_string(payload) + ")");
    set.data.resize(payload / sizeof(float));
    std::memcpy(set.data.data(), p, payload);
    return set;
}

std::uint64_t patchset_digest(const PatchSet& set) {
    const auto buf = serialize_patchset(set);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : buf) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::vector<std::filesystem::path> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        std::string trimmed = line.substr(first, last - first + 1);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::filesystem::path p(trimmed);
        out.push_back(p.is_absolute() ? p : base / p);
    }
    return out;
}

} // namespace rlcsc
