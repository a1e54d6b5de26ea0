#pragma once

#include <cstddef>
#include <string>

#include "rlcsc/tape.hpp"
#include "rlcsc/tensor.hpp"

namespace rlcsc {

struct ModelConfig {
    int n_f = 128;      // feature channels
    int m_f = 256;      // sparse-code channels
    int s = 3;          // kernel size, odd
    int c_img = 1;      // image channels (luminance only)
    int recursions = 25;

    void validate() const {
        if (n_f <= 0 || m_f <= 0 || s <= 0 || c_img <= 0 || recursions <= 0)
            throw FormatError("model config: all dimensions must be positive");
        if (s % 2 == 0)
            throw FormatError("model config: kernel size must be odd, got " + std::to_string(s));
    }
};

// The six trainable layers plus the per-channel thresholds. S is a single
// tensor reused every recursion; recursions add no parameters.
template <class T>
struct RlcscParams {
    Tensor4<T> f0;      // (n_f, c_img, s, s) feature extraction
    Tensor4<T> f1;      // (n_f, n_f, s, s)
    Tensor4<T> w1;      // (m_f, n_f, s, s)  features -> code space
    Tensor4<T> s;       // (m_f, m_f, s, s)  shared recursion kernel
    Tensor4<T> w2;      // (n_f, m_f, s, s)  code -> feature space
    Tensor4<T> h;       // (c_img, n_f, s, s) residual reconstruction
    Tensor4<T> theta;   // (1, m_f, 1, 1) nonnegative thresholds
    int recursions = 1;

    static RlcscParams make(const ModelConfig& cfg) {
        cfg.validate();
        RlcscParams p;
        p.f0 = Tensor4<T>(cfg.n_f, cfg.c_img, cfg.s, cfg.s);
        p.f1 = Tensor4<T>(cfg.n_f, cfg.n_f, cfg.s, cfg.s);
        p.w1 = Tensor4<T>(cfg.m_f, cfg.n_f, cfg.s, cfg.s);
        p.s = Tensor4<T>(cfg.m_f, cfg.m_f, cfg.s, cfg.s);
        p.w2 = Tensor4<T>(cfg.n_f, cfg.m_f, cfg.s, cfg.s);
        p.h = Tensor4<T>(cfg.c_img, cfg.n_f, cfg.s, cfg.s);
        p.theta = Tensor4<T>(1, cfg.m_f, 1, 1);
        p.recursions = cfg.recursions;
        return p;
    }

    void validate() const {
        if (recursions < 1) throw FormatError("params: recursion count must be >= 1");
        auto chain = [](const Tensor4<T>& a, const Tensor4<T>& b, const char* what) {
            if (a.n != b.c)
                throw ShapeError(std::string("params: channel chain broken at ") + what + ": " +
                                 a.shape_str() + " feeds " + b.shape_str());
        };
        chain(f0, f1, "F0->F1");
        chain(f1, w1, "F1->W1");
        chain(w1, s, "W1->S");
        chain(s, w2, "S->W2");
        chain(w2, h, "W2->H");
        if (s.n != s.c) throw ShapeError("params: S must map code space to itself, got " + s.shape_str());
        if (!is_channel_vector(theta, w1.n))
            throw ShapeError("params: theta must be (1," + std::to_string(w1.n) + ",1,1), got " +
                             theta.shape_str());
    }

    ModelConfig config() const {
        return ModelConfig{f0.n, w1.n, f0.h, f0.c, recursions};
    }

    std::size_t parameter_count() const {
        return f0.numel() + f1.numel() + w1.numel() + s.numel() + w2.numel() + h.numel() +
               theta.numel();
    }

    template <class U>
    RlcscParams<U> cast() const {
        RlcscParams<U> p;
        p.f0 = f0.template cast<U>();
        p.f1 = f1.template cast<U>();
        p.w1 = w1.template cast<U>();
        p.s = s.template cast<U>();
        p.w2 = w2.template cast<U>();
        p.h = h.template cast<U>();
        p.theta = theta.template cast<U>();
        p.recursions = recursions;
        return p;
    }
};

inline int depth(int recursions) { return recursions + 5; }

template <class T>
int depth(const RlcscParams<T>& p) {
    return depth(p.recursions);
}

// y = ReLU(F1 * ReLU(F0 * I_y))
template <class T>
Tensor4<T> extract_features(const RlcscParams<T>& p, const Tensor4<T>& i_y) {
    return relu(conv2d(relu(conv2d(i_y, p.f0)), p.f1));
}

// z_0 = 0; z_{k+1} = ReLU(W1*y + S*z_k - theta). W1*y is computed once and
// reused; the first recursion drops the S term since z_0 = 0.
template <class T>
Tensor4<T> conv_lista(const RlcscParams<T>& p, const Tensor4<T>& y) {
    if (p.recursions < 1) throw FormatError("conv_lista: recursion count must be >= 1");
    const Tensor4<T> w1y = conv2d(y, p.w1);
    Tensor4<T> z = relu(sub(w1y, p.theta));
    for (int k = 1; k < p.recursions; ++k)
        z = relu(sub(add(w1y, conv2d(z, p.s)), p.theta));
    return z;
}

// R = H * ReLU(W2 * z)
template <class T>
Tensor4<T> recover_residual(const RlcscParams<T>& p, const Tensor4<T>& z) {
    return conv2d(relu(conv2d(z, p.w2)), p.h);
}

template <class T>
Tensor4<T> residual(const RlcscParams<T>& p, const Tensor4<T>& i_y) {
    return recover_residual(p, conv_lista(p, extract_features(p, i_y)));
}

// I_x = I_y + R
template <class T>
Tensor4<T> forward(const RlcscParams<T>& p, const Tensor4<T>& i_y) {
    return add(i_y, residual(p, i_y));
}

// Tape-recorded forward for training and gradient checks.
struct ParamVars {
    VarId f0, f1, w1, s, w2, h, theta;
};

template <class T>
ParamVars register_params(Tape<T>& tape, const RlcscParams<T>& p) {
    p.validate();
    ParamVars v{};
    v.f0 = tape.leaf(p.f0, true);
    v.f1 = tape.leaf(p.f1, true);
    v.w1 = tape.leaf(p.w1, true);
    v.s = tape.leaf(p.s, true);
    v.w2 = tape.leaf(p.w2, true);
    v.h = tape.leaf(p.h, true);
    v.theta = tape.leaf(p.theta, true);
    return v;
}

template <class T>
VarId residual_tape(Tape<T>& tape, const ParamVars& pv, VarId i_y, int recursions) {
    const VarId y = tape.relu(tape.conv2d(tape.relu(tape.conv2d(i_y, pv.f0)), pv.f1));
    const VarId w1y = tape.conv2d(y, pv.w1);
    VarId z = tape.relu(tape.sub(w1y, pv.theta));
    for (int k = 1; k < recursions; ++k)
        z = tape.relu(tape.sub(tape.add(w1y, tape.conv2d(z, pv.s)), pv.theta));
    return tape.conv2d(tape.relu(tape.conv2d(z, pv.w2)), pv.h);
}

template <class T>
VarId forward_tape(Tape<T>& tape, const ParamVars& pv, VarId i_y, int recursions) {
    return tape.add(i_y, residual_tape(tape, pv, i_y, recursions));
}

} // namespace rlcsc
