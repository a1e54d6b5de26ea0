#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlcsc/image.hpp"

namespace rlcsc {

// Geometric and scale augmentation plan. The identity transform is always
// included; `downscales` adds bicubic-shrunk copies of every geometric
// variant; `sr_scales` selects which SR factors enter the training set.
struct AugmentSpec {
    bool flip_horizontal = false;
    bool flip_vertical = false;
    std::vector<int> rotations;       // subset of {90, 180, 270}, degrees ccw
    std::vector<double> downscales;   // e.g. {0.7, 0.5, 0.4}
    std::vector<int> sr_scales = {2, 3, 4};

    static AugmentSpec none() { return AugmentSpec{}; }
    static AugmentSpec full() {
        AugmentSpec s;
        s.flip_horizontal = s.flip_vertical = true;
        s.rotations = {90, 180, 270};
        s.downscales = {0.7, 0.5, 0.4};
        s.sr_scales = {2, 3, 4};
        return s;
    }
};

ImageY flip_h(const ImageY& img);
ImageY flip_v(const ImageY& img);
ImageY rotate_ccw(const ImageY& img, int degrees); // 90, 180 or 270

// Enumeration order: geometric variants (identity, flips, rotations) at scale
// 1.0, then the same variants of each downscaled copy, in spec order.
std::vector<ImageY> augment(const ImageY& img, const AugmentSpec& spec);

// Packed, pixel-aligned (ILR, HR) training pairs on the HR grid.
struct PatchSet {
    std::uint16_t patch_size = 33;
    std::uint16_t stride = 33;
    std::vector<std::uint16_t> sr_scales;
    std::uint64_t count = 0;
    std::vector<float> data; // per pair: patch*patch ILR floats, then HR

    std::size_t floats_per_patch() const {
        return static_cast<std::size_t>(patch_size) * patch_size;
    }
    const float* ilr(std::uint64_t i) const { return data.data() + i * 2 * floats_per_patch(); }
    const float* hr(std::uint64_t i) const {
        return data.data() + i * 2 * floats_per_patch() + floats_per_patch();
    }
};

struct BuildStats {
    std::size_t variants_used = 0;
    std::size_t variants_skipped = 0; // too small for one patch after make_ilr
};

// For every image, every augmented variant and every sr scale: make_ilr, then
// scan top-left to bottom-right emitting aligned pairs. Undersized variants
// are skipped with a warning on stderr.
PatchSet build_patchset(const std::vector<ImageY>& images, const AugmentSpec& spec, int patch = 33,
                        int stride = 33, BuildStats* stats = nullptr);

std::vector<std::uint8_t> serialize_patchset(const PatchSet& set);
void save_patchset(const PatchSet& set, const std::filesystem::path& path);
PatchSet load_patchset(const std::filesystem::path& path);

// FNV-1a 64 over the serialized byte stream.
std::uint64_t patchset_digest(const PatchSet& set);

// One image path per line; blank lines and '#' comments ignored. Relative
// paths resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

} // namespace rlcsc
