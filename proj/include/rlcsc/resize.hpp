#pragma once

#include <utility>

#include "rlcsc/image.hpp"

namespace rlcsc {

// Cubic-convolution resampling (a = -0.5), the resizer the SR benchmarks are
// computed with. When scale < 1 the kernel support widens by 1/scale
// (antialiasing); out-of-range taps use symmetric boundary indices; weights
// are normalized per output sample. Output dims are round(dim * scale), each
// dimension resampled with the caller's scale. Separable: height, then width.
ImageY bicubic_resize(const ImageY& img, double scale);

// (I_y, I_x): modulo-crop img from bottom/right so both dims divide sr_scale,
// then I_y = up(down(I_x, 1/s), s). The pair is pixel-aligned and same-sized.
std::pair<ImageY, ImageY> make_ilr(const ImageY& img, int sr_scale);

} // namespace rlcsc
