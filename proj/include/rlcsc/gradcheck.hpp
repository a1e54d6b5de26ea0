#pragma once

#include <array>
#include <cmath>
#include <string>

#include "rlcsc/model.hpp"

namespace rlcsc {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

// Central-difference check of the tape gradients for
// loss = mse(I_y + residual(params, I_y), target). The difference side goes
// through the plain (tape-free) forward path only. 64-bit throughout.
// `stride` > 1 checks every stride-th entry of each tensor (entry 0 always).
inline GradCheckReport gradient_check(const RlcscParams<double>& params, const Tensor4<double>& i_y,
                                      const Tensor4<double>& target, double eps,
                                      std::size_t stride = 1) {
    if (eps <= 0.0) throw NumericError("gradient_check: eps must be positive");
    if (stride < 1) stride = 1;

    Tape<double> tape;
    const ParamVars pv = register_params(tape, params);
    const VarId in = tape.leaf(i_y);
    const VarId tgt = tape.leaf(target);
    const VarId loss = tape.mse(forward_tape(tape, pv, in, params.recursions), tgt);
    const auto grads = tape.backward(loss);

    struct Entry {
        const char* name;
        Tensor4<double> RlcscParams<double>::*member;
        VarId var;
    };
    const std::array<Entry, 7> entries = {{{"F0", &RlcscParams<double>::f0, pv.f0},
                                           {"F1", &RlcscParams<double>::f1, pv.f1},
                                           {"W1", &RlcscParams<double>::w1, pv.w1},
                                           {"S", &RlcscParams<double>::s, pv.s},
                                           {"W2", &RlcscParams<double>::w2, pv.w2},
                                           {"H", &RlcscParams<double>::h, pv.h},
                                           {"theta", &RlcscParams<double>::theta, pv.theta}}};

    RlcscParams<double> probe = params;
    GradCheckReport report;
    for (const Entry& e : entries) {
        const Tensor4<double>& analytic = grads.at(e.var);
        Tensor4<double>& tensor = probe.*(e.member);
        for (std::size_t i = 0; i < tensor.numel(); i += stride) {
            const double saved = tensor.data[i];
            tensor.data[i] = saved + eps;
            const double up = mse(forward(probe, i_y), target);
            tensor.data[i] = saved - eps;
            const double down = mse(forward(probe, i_y), target);
            tensor.data[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = analytic.data[i];
            const double rel = std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-6);
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = e.name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

} // namespace rlcsc
