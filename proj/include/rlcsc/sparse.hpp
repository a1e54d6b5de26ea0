#pragma once

#include <cstddef>
#include <vector>

#include "rlcsc/errors.hpp"

namespace rlcsc::sparse {

using Vec = std::vector<double>;

// Dense row-major matrix; only matrix-vector products are needed here.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

Vec matvec(const Matrix& m, const Vec& v);   // m v
Vec matvec_t(const Matrix& m, const Vec& v); // m^T v

// min_z 1/2 ||y - D z||_2^2 + lambda ||z||_1
struct SparseProblem {
    Matrix dict;               // n x m; m >= n when overcomplete, not required
    Vec signal;                // length n
    double lambda = 0.0;
    double step_constant = 1.; // L, must satisfy L >= mu_max(D^T D) for descent

    void validate() const;
};

// z_{k+1} = h_theta(We y + G z_k), z_0 = 0, run for `steps` iterations.
struct ListaCell {
    Matrix we;  // m x n
    Matrix g;   // m x m
    Vec theta;  // length m, nonnegative
    int steps = 0;

    void validate() const;
};

// sign(a) * max(|a| - theta, 0)
Vec soft_threshold(const Vec& alpha, double theta);
Vec soft_threshold(const Vec& alpha, const Vec& theta);

// max(a - theta, 0); equals relu(a - theta) bitwise.
Vec nonneg_soft_threshold(const Vec& alpha, const Vec& theta);

double sc_objective(const SparseProblem& p, const Vec& z);

struct IstaResult {
    Vec z;
    Vec objective_trace; // length iters + 1, starting at the z_0 = 0 objective
};

IstaResult ista_solve(const SparseProblem& p, int iters);

Vec lista_forward(const ListaCell& cell, const Vec& y);

// Largest eigenvalue of D^T D by power iteration: 50 steps, early exit at
// relative change 1e-6. Callers should inflate slightly before using as L.
double estimate_mu_max(const Matrix& dict);

// Final objective of an independent proximal-gradient solver with a
// backtracking line search. Written self-contained (own products, own shrink,
// own objective) so it shares no code path with ista_solve.
double reference_prox_grad_min(const Matrix& dict, const Vec& signal, double lambda, int iters);

} // namespace rlcsc::sparse
