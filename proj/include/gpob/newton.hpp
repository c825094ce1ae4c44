#pragma once

#include <functional>
#include <map>
#include <string>

#include "gpob/linear_solver.hpp"

namespace gpob {

struct NewtonConfig {
    double abs_tol = 1e-10;
    double rel_tol = 0.0;
    int max_iters = 50;
    double damping_min = 1.0 / 1024.0;
    double linear_tol = 1e-8;
    int linear_max_iters = 2000;
    LinearSolverKind linear_kind = LinearSolverKind::Gmres;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
};

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<SparseMatrix(const Vec&)>;
/// Called after every accepted iterate (and on the initial state with
/// iteration 0). May throw to abort the solve.
using IterateHook = std::function<void(int iteration, const Vec& x)>;

struct NewtonResult {
    Vec x;
    std::vector<double> history;  ///< residual 2-norm per iterate, history[0] at x0
    std::vector<double> damping;  ///< accepted step length per iteration
    int iterations = 0;
    double residual_norm = 0.0;
};

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const NewtonConfig& cfg, const IterateHook& on_iterate = {});

/// Largest relative error between J·v and the central difference of F along
/// v over `n_dirs` random directions (fixed seed).
double jacobian_consistency(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x, int n_dirs = 10,
                            unsigned seed = 12345, double h = 1e-6);

}  // namespace gpob
