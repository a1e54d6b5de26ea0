#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rlcsc/errors.hpp"
#include "rlcsc/parallel.hpp"

namespace rlcsc {

// NCHW tensor, row-major, value semantics. Inputs, feature maps, convolution
// kernels (out,in,kh,kw) and per-channel vectors (1,c,1,1) all use this type.
template <class T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    static Tensor4 zeros(int n_, int c_, int h_, int w_) { return Tensor4(n_, c_, h_, w_); }

    static Tensor4 full(int n_, int c_, int h_, int w_, T v) {
        Tensor4 t(n_, c_, h_, w_);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    std::size_t numel() const { return data.size(); }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    const T& at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    T* plane(int in, int ic) { return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w; }
    const T* plane(int in, int ic) const {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }

    bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

// Per-channel vector (1,c,1,1) broadcastable over (n,c,h,w).
template <class T>
inline bool is_channel_vector(const Tensor4<T>& b, int channels) {
    return b.n == 1 && b.c == channels && b.h == 1 && b.w == 1;
}

template <class T>
inline void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

namespace detail {

template <class T>
inline void check_conv_args(const Tensor4<T>& x, const Tensor4<T>& k) {
    if (k.h != k.w)
        throw ShapeError("conv2d: kernel must be square, got " + k.shape_str());
    if (k.h % 2 == 0)
        throw ShapeError("conv2d: kernel must be odd-sized, got " + k.shape_str());
    if (x.c != k.c)
        throw ShapeError("conv2d: input channels " + std::to_string(x.c) +
                         " != kernel in_channels " + std::to_string(k.c) + " (input " +
                         x.shape_str() + ", kernel " + k.shape_str() + ")");
}

// One (sample, out-channel) output plane. Cross-correlation, zero padding.
template <class T>
inline void conv_plane(const Tensor4<T>& x, const Tensor4<T>& k, int in, int oc, T bias, T* out) {
    const int H = x.h, W = x.w, ks = k.h, pad = (ks - 1) / 2;
    std::fill(out, out + static_cast<std::size_t>(H) * W, bias);
    for (int ic = 0; ic < x.c; ++ic) {
        const T* xp = x.plane(in, ic);
        const T* kp = k.plane(oc, ic);
        for (int ky = 0; ky < ks; ++ky) {
            for (int kx = 0; kx < ks; ++kx) {
                const T wv = kp[ky * ks + kx];
                const int dy = ky - pad, dx = kx - pad;
                const int oy0 = std::max(0, -dy), oy1 = std::min(H, H - dy);
                const int ox0 = std::max(0, -dx), ox1 = std::min(W, W - dx);
                for (int oy = oy0; oy < oy1; ++oy) {
                    const T* xrow = xp + static_cast<std::size_t>(oy + dy) * W + dx;
                    T* orow = out + static_cast<std::size_t>(oy) * W;
                    for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xrow[ox];
                }
            }
        }
    }
}

template <class T>
inline void conv_kernel_grad_sample(const Tensor4<T>& x, const Tensor4<T>& dy, int in, int pad,
                                    Tensor4<T>& dk);

} // namespace detail

// 2-D cross-correlation with zero padding of (k-1)/2 per side; spatial size is
// preserved. `bias`, when given, is a per-channel vector of k.n entries.
template <class T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& k, const Tensor4<T>* bias = nullptr) {
    detail::check_conv_args(x, k);
    if (bias && !is_channel_vector(*bias, k.n))
        throw ShapeError("conv2d: bias must be (1," + std::to_string(k.n) + ",1,1), got " +
                         bias->shape_str());
    Tensor4<T> out(x.n, k.n, x.h, x.w);
    parallel_for(static_cast<std::size_t>(x.n) * k.n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const int in = static_cast<int>(i) / k.n;
            const int oc = static_cast<int>(i) % k.n;
            const T bv = bias ? bias->data[oc] : T(0);
            detail::conv_plane(x, k, in, oc, bv, out.plane(in, oc));
        }
    });
    return out;
}

// Adjoint of conv2d. Any of dx/dk/db may be null; non-null outputs are
// accumulated into (callers pass zero-initialized tensors of the right shape).
// dk/db contributions are reduced over samples in ascending order.
template <class T>
void conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& k, const Tensor4<T>& dy, Tensor4<T>* dx,
                     Tensor4<T>* dk, Tensor4<T>* db) {
    detail::check_conv_args(x, k);
    if (dy.n != x.n || dy.c != k.n || dy.h != x.h || dy.w != x.w)
        throw ShapeError("conv2d_backward: dy shape " + dy.shape_str() + " inconsistent with input " +
                         x.shape_str() + " and kernel " + k.shape_str());
    const int H = x.h, W = x.w, ks = k.h, pad = (ks - 1) / 2;

    if (dx) {
        if (!dx->same_shape(x)) throw ShapeError("conv2d_backward: dx shape mismatch");
        // dx[iy,ix] += sum_{oc,ky,kx} k[oc,ic,ky,kx] * dy[iy-ky+pad, ix-kx+pad]
        parallel_for(static_cast<std::size_t>(x.n) * x.c, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const int in = static_cast<int>(i) / x.c;
                const int ic = static_cast<int>(i) % x.c;
                T* dxp = dx->plane(in, ic);
                for (int oc = 0; oc < k.n; ++oc) {
                    const T* dyp = dy.plane(in, oc);
                    const T* kp = k.plane(oc, ic);
                    for (int ky = 0; ky < ks; ++ky) {
                        for (int kx = 0; kx < ks; ++kx) {
                            const T wv = kp[ky * ks + kx];
                            const int dyy = pad - ky, dxx = pad - kx;
                            const int iy0 = std::max(0, -dyy), iy1 = std::min(H, H - dyy);
                            const int ix0 = std::max(0, -dxx), ix1 = std::min(W, W - dxx);
                            for (int iy = iy0; iy < iy1; ++iy) {
                                const T* drow = dyp + static_cast<std::size_t>(iy + dyy) * W + dxx;
                                T* xrow = dxp + static_cast<std::size_t>(iy) * W;
                                for (int ix = ix0; ix < ix1; ++ix) xrow[ix] += wv * drow[ix];
                            }
                        }
                    }
                }
            }
        });
    }

    if (dk) {
        if (!dk->same_shape(k)) throw ShapeError("conv2d_backward: dk shape mismatch");
        if (x.n > 1 && thread_count() > 1) {
            // Per-sample partials, reduced in sample order so the result does
            // not depend on the worker count.
            std::vector<Tensor4<T>> dk_part(x.n);
            parallel_for(static_cast<std::size_t>(x.n), [&](std::size_t b, std::size_t e) {
                for (std::size_t in = b; in < e; ++in) {
                    Tensor4<T> part(k.n, k.c, ks, ks);
                    detail::conv_kernel_grad_sample(x, dy, static_cast<int>(in), pad, part);
                    dk_part[in] = std::move(part);
                }
            });
            for (int in = 0; in < x.n; ++in)
                for (std::size_t j = 0; j < dk->numel(); ++j) dk->data[j] += dk_part[in].data[j];
        } else {
            for (int in = 0; in < x.n; ++in) detail::conv_kernel_grad_sample(x, dy, in, pad, *dk);
        }
    }
    if (db) {
        if (!is_channel_vector(*db, k.n)) throw ShapeError("conv2d_backward: db shape mismatch");
        for (int in = 0; in < x.n; ++in)
            for (int oc = 0; oc < k.n; ++oc) {
                const T* dyp = dy.plane(in, oc);
                T s = 0;
                for (std::size_t j = 0; j < static_cast<std::size_t>(H) * W; ++j) s += dyp[j];
                db->data[oc] += s;
            }
    }
}

namespace detail {

// dk contribution of one sample: dk[oc,ic,ky,kx] += sum_{oy,ox} dy*x_shifted
template <class T>
inline void conv_kernel_grad_sample(const Tensor4<T>& x, const Tensor4<T>& dy, int in, int pad,
                                    Tensor4<T>& dk) {
    const int H = x.h, W = x.w, ks = dk.h;
    for (int oc = 0; oc < dk.n; ++oc) {
        const T* dyp = dy.plane(in, oc);
        for (int ic = 0; ic < dk.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* kp = dk.plane(oc, ic);
            for (int ky = 0; ky < ks; ++ky) {
                for (int kx = 0; kx < ks; ++kx) {
                    const int dyy = ky - pad, dxx = kx - pad;
                    const int oy0 = std::max(0, -dyy), oy1 = std::min(H, H - dyy);
                    const int ox0 = std::max(0, -dxx), ox1 = std::min(W, W - dxx);
                    T s = 0;
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const T* xrow = xp + static_cast<std::size_t>(oy + dyy) * W + dxx;
                        const T* drow = dyp + static_cast<std::size_t>(oy) * W;
                        for (int ox = ox0; ox < ox1; ++ox) s += drow[ox] * xrow[ox];
                    }
                    kp[ky * ks + kx] += s;
                }
            }
        }
    }
}

} // namespace detail

template <class T>
Tensor4<T> relu(const Tensor4<T>& x) {
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return out;
}

// dx = dy where x > 0, else 0 (subgradient 0 at the kink).
template <class T>
void relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy, Tensor4<T>& dx) {
    require_same_shape(x, dy, "relu_backward");
    require_same_shape(x, dx, "relu_backward");
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (x.data[i] > T(0)) dx.data[i] += dy.data[i];
}

// Elementwise a+b / a-b; b may also be a per-channel vector (1,c,1,1).
template <class T, class BinOp>
Tensor4<T> zip_broadcast(const Tensor4<T>& a, const Tensor4<T>& b, const char* name, BinOp op) {
    Tensor4<T> out(a.n, a.c, a.h, a.w);
    if (a.same_shape(b)) {
        for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = op(a.data[i], b.data[i]);
        return out;
    }
    if (is_channel_vector(b, a.c)) {
        const std::size_t hw = static_cast<std::size_t>(a.h) * a.w;
        for (int in = 0; in < a.n; ++in)
            for (int ic = 0; ic < a.c; ++ic) {
                const T bv = b.data[ic];
                const T* ap = a.plane(in, ic);
                T* op_ = out.plane(in, ic);
                for (std::size_t j = 0; j < hw; ++j) op_[j] = op(ap[j], bv);
            }
        return out;
    }
    throw ShapeError(std::string(name) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str() +
                     " (only a (1,c,1,1) channel vector broadcasts)");
}

template <class T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
    return zip_broadcast(a, b, "add", [](T x, T y) { return x + y; });
}

template <class T>
Tensor4<T> sub(const Tensor4<T>& a, const Tensor4<T>& b) {
    return zip_broadcast(a, b, "sub", [](T x, T y) { return x - y; });
}

template <class T>
Tensor4<T> scale(const Tensor4<T>& x, T alpha) {
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = alpha * x.data[i];
    return out;
}

// Reduce a full-shape gradient onto a (1,c,1,1) channel vector.
template <class T>
void reduce_to_channel_vector(const Tensor4<T>& dy, Tensor4<T>& db) {
    const std::size_t hw = static_cast<std::size_t>(dy.h) * dy.w;
    for (int in = 0; in < dy.n; ++in)
        for (int ic = 0; ic < dy.c; ++ic) {
            const T* p = dy.plane(in, ic);
            T s = 0;
            for (std::size_t j = 0; j < hw; ++j) s += p[j];
            db.data[ic] += s;
        }
}

// Mean of squared differences over all elements. The reduction runs in 64-bit
// regardless of T so loss traces are comparable between dtypes.
template <class T>
double mse(const Tensor4<T>& a, const Tensor4<T>& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

template <class T>
bool all_finite(const Tensor4<T>& x) {
    for (const T v : x.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

} // namespace rlcsc
