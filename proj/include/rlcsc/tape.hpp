#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rlcsc/tensor.hpp"

namespace rlcsc {

using VarId = int;

// Reverse-mode differentiation record. Every produced tensor is a node that
// remembers its inputs and backward rule; ids are issued in creation order, so
// the list is topologically sorted by construction. Single-owner: record and
// call backward from one thread.
template <class T>
class Tape {
public:
    VarId leaf(Tensor4<T> v, bool param = false) {
        return push({Op::Leaf, -1, -1, -1, T(0), param, std::move(v)});
    }

    VarId conv2d(VarId x, VarId k) {
        Tensor4<T> y = rlcsc::conv2d(value(x), value(k));
        return push({Op::Conv2d, x, k, -1, T(0), false, std::move(y)});
    }

    VarId conv2d(VarId x, VarId k, VarId bias) {
        Tensor4<T> y = rlcsc::conv2d(value(x), value(k), &value(bias));
        return push({Op::Conv2dBias, x, k, bias, T(0), false, std::move(y)});
    }

    VarId relu(VarId x) {
        return push({Op::Relu, x, -1, -1, T(0), false, rlcsc::relu(value(x))});
    }

    VarId add(VarId a, VarId b) {
        return push({Op::Add, a, b, -1, T(0), false, rlcsc::add(value(a), value(b))});
    }

    VarId sub(VarId a, VarId b) {
        return push({Op::Sub, a, b, -1, T(0), false, rlcsc::sub(value(a), value(b))});
    }

    VarId scale(VarId x, T alpha) {
        return push({Op::Scale, x, -1, -1, alpha, false, rlcsc::scale(value(x), alpha)});
    }

    VarId mse(VarId a, VarId b) {
        const double m = rlcsc::mse(value(a), value(b));
        Tensor4<T> v(1, 1, 1, 1);
        v.data[0] = static_cast<T>(m);
        return push({Op::Mse, a, b, -1, T(0), false, std::move(v)});
    }

    const Tensor4<T>& value(VarId id) const { return node(id).value; }
    bool is_param(VarId id) const { return node(id).param; }
    std::size_t size() const { return nodes_.size(); }

    class Gradients {
    public:
        // Gradient of a parameter leaf; anything else was not retained.
        const Tensor4<T>& at(VarId id) const {
            if (id < 0 || static_cast<std::size_t>(id) >= g_.size() || !g_[id])
                throw Error("gradient queried for a detached (non-parameter) tensor, id " +
                            std::to_string(id));
            return *g_[id];
        }

    private:
        friend class Tape;
        std::vector<std::optional<Tensor4<T>>> g_;
    };

    // Gradients of the scalar `loss` for every parameter leaf. A parameter
    // used k times receives the sum of its k per-use contributions; parameters
    // off the loss path get zeros.
    Gradients backward(VarId loss) const {
        const Tensor4<T>& lv = value(loss);
        if (lv.numel() != 1)
            throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());

        std::vector<std::optional<Tensor4<T>>> g(nodes_.size());
        g[loss] = Tensor4<T>::full(1, 1, 1, 1, T(1));

        for (VarId id = loss; id >= 0; --id) {
            if (!g[id]) continue;
            const Node& nd = nodes_[id];
            const Tensor4<T>& gy = *g[id];
            switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::Conv2d:
                conv2d_backward(value(nd.a), value(nd.b), gy, &ensure(g, nd.a), &ensure(g, nd.b),
                                static_cast<Tensor4<T>*>(nullptr));
                break;
            case Op::Conv2dBias:
                conv2d_backward(value(nd.a), value(nd.b), gy, &ensure(g, nd.a), &ensure(g, nd.b),
                                &ensure(g, nd.c));
                break;
            case Op::Relu:
                relu_backward(value(nd.a), gy, ensure(g, nd.a));
                break;
            case Op::Add:
                accumulate(g, nd.a, gy, false);
                accumulate(g, nd.b, gy, false);
                break;
            case Op::Sub:
                accumulate(g, nd.a, gy, false);
                accumulate(g, nd.b, gy, true);
                break;
            case Op::Scale: {
                Tensor4<T>& ga = ensure(g, nd.a);
                for (std::size_t i = 0; i < gy.numel(); ++i) ga.data[i] += nd.alpha * gy.data[i];
                break;
            }
            case Op::Mse: {
                const Tensor4<T>& a = value(nd.a);
                const Tensor4<T>& b = value(nd.b);
                const T s = gy.data[0] * T(2) / static_cast<T>(a.numel());
                Tensor4<T>& ga = ensure(g, nd.a);
                Tensor4<T>& gb = ensure(g, nd.b);
                for (std::size_t i = 0; i < a.numel(); ++i) {
                    const T d = s * (a.data[i] - b.data[i]);
                    ga.data[i] += d;
                    gb.data[i] -= d;
                }
                break;
            }
            }
            if (nd.op != Op::Leaf) g[id].reset(); // intermediates are not retained
        }

        Gradients out;
        out.g_.resize(nodes_.size());
        for (VarId id = 0; id < static_cast<VarId>(nodes_.size()); ++id) {
            if (!nodes_[id].param) continue;
            const Tensor4<T>& v = nodes_[id].value;
            out.g_[id] = g[id] ? std::move(*g[id]) : Tensor4<T>::zeros(v.n, v.c, v.h, v.w);
        }
        return out;
    }

private:
    enum class Op { Leaf, Conv2d, Conv2dBias, Relu, Add, Sub, Scale, Mse };

    struct Node {
        Op op;
        VarId a, b, c;
        T alpha;
        bool param;
        Tensor4<T> value;
    };

    VarId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<VarId>(nodes_.size() - 1);
    }

    const Node& node(VarId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw Error("tape: invalid variable id " + std::to_string(id));
        return nodes_[id];
    }

    Tensor4<T>& ensure(std::vector<std::optional<Tensor4<T>>>& g, VarId id) const {
        if (!g[id]) {
            const Tensor4<T>& v = nodes_[id].value;
            g[id] = Tensor4<T>::zeros(v.n, v.c, v.h, v.w);
        }
        return *g[id];
    }

    // += gy into g[id], reducing over (n,h,w) when the target is a broadcast
    // channel vector; negate for the subtrahend side of Sub.
    void accumulate(std::vector<std::optional<Tensor4<T>>>& g, VarId id, const Tensor4<T>& gy,
                    bool negate) const {
        Tensor4<T>& dst = ensure(g, id);
        if (dst.same_shape(gy)) {
            if (negate)
                for (std::size_t i = 0; i < gy.numel(); ++i) dst.data[i] -= gy.data[i];
            else
                for (std::size_t i = 0; i < gy.numel(); ++i) dst.data[i] += gy.data[i];
            return;
        }
        Tensor4<T> red(1, dst.c, 1, 1);
        reduce_to_channel_vector(gy, red);
        if (negate)
            for (int ic = 0; ic < dst.c; ++ic) dst.data[ic] -= red.data[ic];
        else
            for (int ic = 0; ic < dst.c; ++ic) dst.data[ic] += red.data[ic];
    }

    std::vector<Node> nodes_;
};

} // namespace rlcsc
