#pragma once

#include <cmath>
#include <cstdint>

#include "rlcsc/rng.hpp"
#include "rlcsc/tensor.hpp"

namespace rlcsc::testsupport {

template <class T>
void fill_uniform(Tensor4<T>& t, Rng& rng, double lo, double hi) {
    for (auto& v : t.data) v = static_cast<T>(lo + (hi - lo) * rng.next_unit());
}

template <class T>
void fill_gaussian(Tensor4<T>& t, Rng& rng, double sigma) {
    for (auto& v : t.data) v = static_cast<T>(sigma * rng.next_gaussian());
}

// Direct six-loop convolution reference: per output element, walk the kernel
// with explicit bounds checks. Deliberately structured unlike the production
// kernel so the two act as independent routes.
template <class T>
Tensor4<T> naive_conv2d(const Tensor4<T>& x, const Tensor4<T>& k, const Tensor4<T>* bias = nullptr) {
    const int pad = (k.h - 1) / 2;
    Tensor4<T> out(x.n, k.n, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < k.n; ++oc)
            for (int oy = 0; oy < x.h; ++oy)
                for (int ox = 0; ox < x.w; ++ox) {
                    T acc = bias ? bias->data[oc] : T(0);
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < k.h; ++ky)
                            for (int kx = 0; kx < k.w; ++kx) {
                                const int iy = oy + ky - pad;
                                const int ix = ox + kx - pad;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += x.at(in, ic, iy, ix) * k.at(oc, ic, ky, kx);
                            }
                    out.at(in, oc, oy, ox) = acc;
                }
    return out;
}

template <class T>
double max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

template <class T>
double max_rel_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
    double scale = 0.0;
    for (const T v : a.data) scale = std::max(scale, std::abs(static_cast<double>(v)));
    return max_abs_diff(a, b) / std::max(scale, 1e-30);
}

template <class T>
bool bit_equal(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (std::memcmp(&a.data[i], &b.data[i], sizeof(T)) != 0) return false;
    return true;
}

} // namespace rlcsc::testsupport
