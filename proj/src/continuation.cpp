#include "gpob/continuation.hpp"

#include <algorithm>
#include <cmath>

#include "gpob/errors.hpp"

namespace gpob {

void ContinuationConfig::validate() const {
    if (!(min_step > 0.0 && min_step <= initial_step && initial_step <= max_step))
        throw InvalidArgument("ContinuationConfig: need 0 < min_step <= initial_step <= max_step");
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) throw InvalidArgument("ContinuationConfig: step_shrink outside (0,1)");
    if (!(step_grow > 1.0)) throw InvalidArgument("ContinuationConfig: step_grow must exceed 1");
    if (param_end == param_start) throw InvalidArgument("ContinuationConfig: empty parameter range");
}

namespace {

BranchSample corrector(const ProblemFactory& make_problem, double param, const Vec& seed, const NewtonConfig& ncfg) {
    const ContinuationProblem prob = make_problem(param);
    NewtonResult nr = newton_solve(prob.residual, prob.jacobian, seed, ncfg, prob.hook);
    BranchSample s;
    s.param = param;
    s.residual_norm = nr.residual_norm;
    s.diagnostics["newton_iterations"] = nr.iterations;
    if (prob.diagnostics)
        for (auto& [k, v] : prob.diagnostics(nr.x)) s.diagnostics[k] = v;
    s.solution = std::move(nr.x);
    return s;
}

}  // namespace

ContinuationResult continuation_sweep(const ProblemFactory& make_problem, const Vec& seed,
                                      const ContinuationConfig& cfg, const NewtonConfig& newton_cfg,
                                      const Predictor& predictor) {
    cfg.validate();
    newton_cfg.validate();
    const double dir = cfg.param_end > cfg.param_start ? 1.0 : -1.0;
    ContinuationResult out;
    try {
        out.samples.push_back(corrector(make_problem, cfg.param_start, seed, newton_cfg));
    } catch (const Error& e) {
        throw SeedFailure(std::string("first corrector failed: ") + e.what());
    }
    out.param_last = cfg.param_start;

    double step = cfg.initial_step;
    while (dir * (cfg.param_end - out.param_last) > 0.0) {
        double p_new = out.param_last + dir * step;
        // snap onto the end point
        if (dir * (p_new - cfg.param_end) > -1e-9 * std::max(1.0, std::abs(cfg.param_end))) p_new = cfg.param_end;
        const BranchSample& prev = out.samples.back();
        const Vec guess = predictor ? predictor(prev.solution, prev.param, p_new) : prev.solution;
        try {
            out.samples.push_back(corrector(make_problem, p_new, guess, newton_cfg));
            out.param_last = p_new;
            step = std::min(step * cfg.step_grow, cfg.max_step);
        } catch (const Error& e) {
            out.failure = e.what();
            out.param_failed = p_new;
            const double tried = std::abs(p_new - out.param_last);
            if (tried <= cfg.min_step * (1.0 + 1e-12)) {
                out.status = BranchStatus::BranchEnd;
                return out;
            }
            step = std::max(tried * cfg.step_shrink, cfg.min_step);
        }
    }
    out.status = BranchStatus::Completed;
    return out;
}

}  // namespace gpob
