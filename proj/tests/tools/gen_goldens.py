#!/usr/bin/env python3
"""Regenerates tests/golden_data.hpp.

Reference implementations (cubic-convolution resampling with antialiasing and
windowed SSIM) are written here in numpy, independently of the C++ sources,
and probe values are frozen into a header the unit tests compare against.

Run from the repository root:  python3 tests/tools/gen_goldens.py
"""

import sys

import numpy as np


def cubic(x):
    x = np.abs(x)
    out = np.where(x <= 1.0, (1.5 * x - 2.5) * x * x + 1.0, 0.0)
    out = np.where((x > 1.0) & (x < 2.0), ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0, out)
    return out


def mirror(idx, n):
    idx = np.asarray(idx)
    out = idx.copy()
    for _ in range(8):
        out = np.where(out < 0, -out - 1, out)
        out = np.where(out >= n, 2 * n - 1 - out, out)
    return out


def contributions(in_len, out_len, scale):
    antialias = scale < 1.0
    kernel_width = 4.0 / scale if antialias else 4.0
    taps = int(np.ceil(kernel_width)) + 2
    j = np.arange(out_len, dtype=np.float64)
    center = (j + 0.5) / scale - 0.5
    left = np.floor(center - kernel_width / 2.0).astype(np.int64)
    idx = left[:, None] + np.arange(taps)[None, :]
    d = center[:, None] - idx
    w = scale * cubic(scale * d) if antialias else cubic(d)
    w = w / np.sum(w, axis=1, keepdims=True)
    return mirror(idx, in_len), w


def resize(img, scale):
    # round half away from zero, as the implementation does
    out_h = int(np.floor(img.shape[0] * scale + 0.5))
    out_w = int(np.floor(img.shape[1] * scale + 0.5))
    idx, w = contributions(img.shape[0], out_h, scale)
    mid = np.einsum("ot,otx->ox", w, img[idx, :])
    idx, w = contributions(img.shape[1], out_w, scale)
    return np.einsum("ot,xot->xo", w, mid[:, idx])


def gaussian_window(n=11, sigma=1.5):
    d = np.arange(n) - (n - 1) / 2.0
    g = np.exp(-d * d / (2.0 * sigma * sigma))
    return g / g.sum()


def filter_valid(img):
    g = gaussian_window()
    n = g.size
    mid = np.stack([img[:, x : x + n] @ g for x in range(img.shape[1] - n + 1)], axis=1)
    return np.stack([g @ mid[y : y + n, :] for y in range(img.shape[0] - n + 1)], axis=0)


def ssim(a, b):
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    mu_a, mu_b = filter_valid(a), filter_valid(b)
    saa, sbb, sab = filter_valid(a * a), filter_valid(b * b), filter_valid(a * b)
    va, vb, cov = saa - mu_a * mu_a, sbb - mu_b * mu_b, sab - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)
    return float(np.mean(num / den))


def pattern(h, w, mult_y=7, mult_x=3, mod=17):
    y, x = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return ((y * mult_y + x * mult_x) % mod) / 16.0


def probes(img, k=6):
    flat = img.reshape(-1)
    pos = np.linspace(0, flat.size - 1, k).astype(np.int64)
    return pos, flat[pos]


def main():
    cases = [
        ("x2", pattern(16, 13), 2.0),
        ("x3", pattern(16, 13), 3.0),
        ("d2", pattern(16, 14), 0.5),
        ("d3", pattern(15, 12), 1.0 / 3.0),
        ("d07", pattern(16, 13), 0.7),
        ("up15", pattern(12, 12), 1.5),
    ]

    lines = []
    lines.append("#pragma once")
    lines.append("")
    lines.append("// Frozen reference values; regenerate with tests/tools/gen_goldens.py.")
    lines.append("")
    lines.append("#include <cstddef>")
    lines.append("")
    lines.append("namespace golden {")
    lines.append("")
    lines.append("struct ResizeCase {")
    lines.append("    const char* name;")
    lines.append("    int in_h, in_w;")
    lines.append("    double scale;")
    lines.append("    int out_h, out_w;")
    lines.append("    double sum;")
    lines.append("    std::size_t probe_pos[6];")
    lines.append("    double probe_val[6];")
    lines.append("};")
    lines.append("")
    lines.append("inline constexpr ResizeCase kResizeCases[] = {")
    for name, img, scale in cases:
        out = resize(img, scale)
        pos, val = probes(out)
        lines.append(
            "    {\"%s\", %d, %d, %.17g, %d, %d, %.17g,\n     {%s},\n     {%s}},"
            % (
                name,
                img.shape[0],
                img.shape[1],
                scale,
                out.shape[0],
                out.shape[1],
                float(out.sum()),
                ", ".join(str(int(p)) for p in pos),
                ", ".join("%.17g" % v for v in val),
            )
        )
    lines.append("};")
    lines.append("")

    a = pattern(32, 32)
    b = pattern(32, 32, mult_y=5, mult_x=11, mod=13)
    blend = 0.75 * a + 0.25 * b
    lines.append("inline constexpr double kSsimPatternAB = %.17g;" % ssim(a, b))
    lines.append("inline constexpr double kSsimPatternABlend = %.17g;" % ssim(a, blend))
    lines.append("")
    lines.append("} // namespace golden")
    lines.append("")

    with open("tests/golden_data.hpp", "w") as f:
        f.write("\n".join(lines))

    # Sanity cross-checks against independent libraries (not frozen).
    try:
        from PIL import Image

        img = pattern(16, 13)
        pil = Image.fromarray((img * 65535).astype(np.float32), mode="F")
        for scale in (2.0, 3.0):
            ours = resize(img, scale)
            ref = np.asarray(
                pil.resize((ours.shape[1], ours.shape[0]), Image.BICUBIC)
            ) / 65535.0
            interior = (slice(6, -6), slice(6, -6))
            diff = np.max(np.abs(ours[interior] - ref[interior]))
            print(f"cross-check resize vs PIL scale {scale}: interior max diff {diff:.2e}",
                  file=sys.stderr)
    except ImportError:
        pass
    try:
        from skimage.metrics import structural_similarity

        ref = structural_similarity(a, b, win_size=11, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False, data_range=1.0)
        print(f"cross-check ssim vs skimage: ours {ssim(a, b):.6f} skimage {ref:.6f}",
              file=sys.stderr)
    except ImportError:
        pass

    print("wrote tests/golden_data.hpp")


if __name__ == "__main__":
    main()
