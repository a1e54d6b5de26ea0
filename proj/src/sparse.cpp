#include "rlcsc/sparse.hpp"

#include <cmath>
#include <string>

namespace rlcsc::sparse {

Vec matvec(const Matrix& m, const Vec& v) {
    if (static_cast<int>(v.size()) != m.cols)
        throw ShapeError("matvec: matrix is " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                         " but vector has length " + std::to_string(v.size()));
    Vec out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
        for (int j = 0; j < m.cols; ++j) s += row[j] * v[j];
        out[i] = s;
    }
    return out;
}

Vec matvec_t(const Matrix& m, const Vec& v) {
    if (static_cast<int>(v.size()) != m.rows)
        throw ShapeError("matvec_t: matrix is " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols) + " but vector has length " +
                         std::to_string(v.size()));
    Vec out(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double vi = v[i];
        const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
        for (int j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
    }
    return out;
}

void SparseProblem::validate() const {
    if (static_cast<int>(signal.size()) != dict.rows)
        throw ShapeError("sparse problem: signal length " + std::to_string(signal.size()) +
                         " != dictionary rows " + std::to_string(dict.rows));
    if (lambda < 0.0) throw NumericError("sparse problem: lambda must be nonnegative");
    if (step_constant <= 0.0) throw NumericError("sparse problem: step constant L must be positive");
}

void ListaCell::validate() const {
    if (we.rows != g.rows || g.rows != g.cols)
        throw ShapeError("lista cell: We is " + std::to_string(we.rows) + "x" +
                         std::to_string(we.cols) + ", G is " + std::to_string(g.rows) + "x" +
                         std::to_string(g.cols));
    if (static_cast<int>(theta.size()) != we.rows)
        throw ShapeError("lista cell: theta length " + std::to_string(theta.size()) +
                         " != code dimension " + std::to_string(we.rows));
    for (double t : theta)
        if (t < 0.0) throw NumericError("lista cell: theta must be nonnegative");
    if (steps < 0) throw NumericError("lista cell: step count must be nonnegative");
}

Vec soft_threshold(const Vec& alpha, double theta) {
    if (theta < 0.0) throw NumericError("soft_threshold: theta must be nonnegative");
    Vec out(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double m = std::abs(alpha[i]) - theta;
        out[i] = m > 0.0 ? std::copysign(m, alpha[i]) : 0.0;
    }
    return out;
}

Vec soft_threshold(const Vec& alpha, const Vec& theta) {
    if (alpha.size() != theta.size())
        throw ShapeError("soft_threshold: alpha length " + std::to_string(alpha.size()) +
                         " != theta length " + std::to_string(theta.size()));
    Vec out(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (theta[i] < 0.0) throw NumericError("soft_threshold: theta must be nonnegative");
        const double m = std::abs(alpha[i]) - theta[i];
        out[i] = m > 0.0 ? std::copysign(m, alpha[i]) : 0.0;
    }
    return out;
}

Vec nonneg_soft_threshold(const Vec& alpha, const Vec& theta) {
    if (alpha.size() != theta.size())
        throw ShapeError("nonneg_soft_threshold: alpha length " + std::to_string(alpha.size()) +
                         " != theta length " + std::to_string(theta.size()));
    Vec out(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (theta[i] < 0.0) throw NumericError("nonneg_soft_threshold: theta must be nonnegative");
        const double m = alpha[i] - theta[i];
        out[i] = m > 0.0 ? m : 0.0;
    }
    return out;
}

double sc_objective(const SparseProblem& p, const Vec& z) {
    p.validate();
    if (static_cast<int>(z.size()) != p.dict.cols)
        throw ShapeError("sc_objective: z length " + std::to_string(z.size()) +
                         " != dictionary cols " + std::to_string(p.dict.cols));
    const Vec dz = matvec(p.dict, z);
    double fit = 0.0;
    for (std::size_t i = 0; i < dz.size(); ++i) {
        const double r = p.signal[i] - dz[i];
        fit += r * r;
    }
    double l1 = 0.0;
    for (double v : z) l1 += std::abs(v);
    return 0.5 * fit + p.lambda * l1;
}

IstaResult ista_solve(const SparseProblem& p, int iters) {
    p.validate();
    if (iters < 1) throw NumericError("ista_solve: iteration count must be >= 1");

    const double inv_l = 1.0 / p.step_constant;
    const double thr = p.lambda * inv_l;

    IstaResult res;
    res.z.assign(p.dict.cols, 0.0);
    res.objective_trace.reserve(iters + 1);
    res.objective_trace.push_back(sc_objective(p, res.z));

    for (int k = 0; k < iters; ++k) {
        Vec r = matvec(p.dict, res.z);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = p.signal[i] - r[i];
        Vec g = matvec_t(p.dict, r);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = res.z[i] + inv_l * g[i];
        res.z = soft_threshold(g, thr);
        const double obj = sc_objective(p, res.z);
        if (!std::isfinite(obj))
            throw NumericError("ista_solve: non-finite objective at iteration " + std::to_string(k + 1));
        res.objective_trace.push_back(obj);
    }
    return res;
}

Vec lista_forward(const ListaCell& cell, const Vec& y) {
    cell.validate();
    if (static_cast<int>(y.size()) != cell.we.cols)
        throw ShapeError("lista_forward: y length " + std::to_string(y.size()) + " != We cols " +
                         std::to_string(cell.we.cols));
    const Vec wy = matvec(cell.we, y);
    Vec z(cell.we.rows, 0.0);
    for (int k = 0; k < cell.steps; ++k) {
        Vec pre = matvec(cell.g, z);
        for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += wy[i];
        z = soft_threshold(pre, cell.theta);
    }
    return z;
}

double estimate_mu_max(const Matrix& dict) {
    const int m = dict.cols;
    if (m == 0 || dict.rows == 0) throw ShapeError("estimate_mu_max: empty dictionary");
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = 1.0 + 0.01 * ((i * 2654435761u) % 97); // fixed start
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        Vec w = matvec_t(dict, matvec(dict, v));
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (int i = 0; i < m; ++i) v[i] = w[i] / norm;
        const double prev = lambda;
        lambda = norm; // Rayleigh quotient of the previous (unit) iterate
        if (it > 0 && std::abs(lambda - prev) <= 1e-6 * std::max(1.0, lambda)) break;
    }
    return lambda;
}

double reference_prox_grad_min(const Matrix& dict, const Vec& signal, double lambda, int iters) {
    const int n = dict.rows, m = dict.cols;
    if (static_cast<int>(signal.size()) != n)
        throw ShapeError("reference_prox_grad_min: signal/dictionary mismatch");

    auto smooth = [&](const Vec& z, Vec* resid) {
        double f = 0.0;
        for (int i = 0; i < n; ++i) {
            double d = 0.0;
            for (int j = 0; j < m; ++j) d += dict.a[static_cast<std::size_t>(i) * m + j] * z[j];
            const double r = signal[i] - d;
            if (resid) (*resid)[i] = r;
            f += r * r;
        }
        return 0.5 * f;
    };
    auto l1 = [&](const Vec& z) {
        double s = 0.0;
        for (double v : z) s += std::abs(v);
        return s;
    };

    Vec z(m, 0.0), resid(n);
    double step_l = 1.0;
    for (int it = 0; it < iters; ++it) {
        const double f0 = smooth(z, &resid);
        Vec grad(m, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                grad[j] -= dict.a[static_cast<std::size_t>(i) * m + j] * resid[i];

        // Backtracking: grow step_l until the quadratic upper bound holds.
        for (;;) {
            Vec cand(m);
            for (int j = 0; j < m; ++j) {
                const double u = z[j] - grad[j] / step_l;
                const double t = lambda / step_l;
                const double mag = std::abs(u) - t;
                cand[j] = mag > 0.0 ? std::copysign(mag, u) : 0.0;
            }
            double quad = f0;
            for (int j = 0; j < m; ++j) {
                const double d = cand[j] - z[j];
                quad += grad[j] * d + 0.5 * step_l * d * d;
            }
            if (smooth(cand, nullptr) <= quad + 1e-15) {
                z = std::move(cand);
                break;
            }
            step_l *= 2.0;
        }
    }
    return smooth(z, nullptr) + lambda * l1(z);
}

} // namespace rlcsc::sparse
