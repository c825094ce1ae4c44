#pragma once

#include <map>
#include <string>

#include "gpob/newton.hpp"

namespace gpob {

struct ContinuationConfig {
    double param_start = 0.0;
    double param_end = 1.0;
    double initial_step = 0.1;
    double min_step = 1e-3;
    double max_step = 0.2;
    double step_shrink = 0.5;
    double step_grow = 1.5;

    void validate() const;
};

struct BranchSample {
    double param = 0.0;
    Vec solution;
    double residual_norm = 0.0;
    std::map<std::string, double> diagnostics;
};

enum class BranchStatus { Completed, BranchEnd };

struct ContinuationResult {
    std::vector<BranchSample> samples;
    BranchStatus status = BranchStatus::Completed;
    /// Last converged parameter value.
    double param_last = 0.0;
    /// First parameter value at which the corrector failed (BranchEnd only).
    double param_failed = 0.0;
    std::string failure;  ///< message of the last failure seen
};

/// A parameterized nonlinear problem. `hook` may throw to reject an iterate;
/// `diagnostics` is evaluated on each converged state.
struct ContinuationProblem {
    ResidualFn residual;
    JacobianFn jacobian;
    IterateHook hook;
    std::function<std::map<std::string, double>(const Vec&)> diagnostics;
};

using ProblemFactory = std::function<ContinuationProblem(double param)>;
/// Builds the Newton seed for `p_new` from the last converged state at `p_old`.
using Predictor = std::function<Vec(const Vec& prev, double p_old, double p_new)>;

/// Natural-parameter continuation with step halving on failure. A corrector
/// failure at the start value raises SeedFailure; later failures shrink the
/// step, and a failure at a step of min_step ends the branch, so
/// param_failed − param_last ≤ min_step.
ContinuationResult continuation_sweep(const ProblemFactory& make_problem, const Vec& seed,
                                      const ContinuationConfig& cfg, const NewtonConfig& newton_cfg,
                                      const Predictor& predictor = {});

}  // namespace gpob
