#include "gpob/newton.hpp"

#include <cmath>
#include <random>

#include "gpob/errors.hpp"

namespace gpob {

void NewtonConfig::validate() const {
    if (!(abs_tol > 0.0)) throw InvalidArgument("NewtonConfig: abs_tol must be positive");
    if (!(rel_tol >= 0.0)) throw InvalidArgument("NewtonConfig: rel_tol must be non-negative");
    if (max_iters < 1) throw InvalidArgument("NewtonConfig: max_iters must be at least 1");
    if (!(damping_min > 0.0 && damping_min <= 1.0)) throw InvalidArgument("NewtonConfig: damping_min outside (0,1]");
    if (!(linear_tol > 0.0)) throw InvalidArgument("NewtonConfig: linear_tol must be positive");
}

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x0,
                          const NewtonConfig& cfg, const IterateHook& on_iterate) {
    cfg.validate();
    for (double v : x0)
        if (!std::isfinite(v)) throw InvalidArgument("newton_solve: non-finite initial state");

    NewtonResult res;
    res.x = x0;
    Vec f = residual(res.x);
    double fn = norm2(f);
    res.history.push_back(fn);
    if (on_iterate) on_iterate(0, res.x);
    const double target = std::max(cfg.abs_tol, cfg.rel_tol * fn);

    LinearSolverOptions lo;
    lo.kind = cfg.linear_kind;
    lo.tol = cfg.linear_tol;
    lo.max_iters = cfg.linear_max_iters;

    while (!(fn <= target)) {
        if (res.iterations >= cfg.max_iters) throw NonConvergence(res.iterations, fn, "Newton");
        const SparseMatrix jac = jacobian(res.x);
        Vec dx;
        try {
            dx = solve_sparse_linear(jac, f, lo);
        } catch (const NonConvergence& e) {
            throw LinearSolveFailure(std::string("inner solve: ") + e.what());
        } catch (const SingularPreconditioner& e) {
            throw LinearSolveFailure(std::string("inner solve: ") + e.what());
        }
        double lambda = 1.0;
        Vec trial(res.x.size());
        bool accepted = false;
        while (true) {
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = res.x[i] - lambda * dx[i];
            Vec ft = residual(trial);
            const double ftn = norm2(ft);
            if (std::isfinite(ftn) && ftn < fn) {
                res.x.swap(trial);
                f.swap(ft);
                fn = ftn;
                accepted = true;
                break;
            }
            if (lambda * 0.5 < cfg.damping_min) break;
            lambda *= 0.5;
        }
        if (!accepted) throw LineSearchStall("no residual decrease down to damping " + std::to_string(lambda));
        ++res.iterations;
        res.history.push_back(fn);
        res.damping.push_back(lambda);
        if (on_iterate) on_iterate(res.iterations, res.x);
    }
    res.residual_norm = fn;
    return res;
}

double jacobian_consistency(const ResidualFn& residual, const JacobianFn& jacobian, const Vec& x, int n_dirs,
                            unsigned seed, double h) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const SparseMatrix jac = jacobian(x);
    double worst = 0.0;
    Vec v(x.size()), xp(x.size()), xm(x.size());
    for (int d = 0; d < n_dirs; ++d) {
        for (auto& e : v) e = nd(rng);
        const double vn = norm2(v);
        for (auto& e : v) e /= vn;
        for (std::size_t i = 0; i < x.size(); ++i) {
            xp[i] = x[i] + h * v[i];
            xm[i] = x[i] - h * v[i];
        }
        const Vec fp = residual(xp), fm = residual(xm);
        const Vec jv = jac * v;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < jv.size(); ++i) {
            const double fd = (fp[i] - fm[i]) / (2.0 * h);
            num += (fd - jv[i]) * (fd - jv[i]);
            den += jv[i] * jv[i];
        }
        worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
    }
    return worst;
}

}  // namespace gpob
