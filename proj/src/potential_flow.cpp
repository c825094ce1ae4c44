#include "gpob/potential_flow.hpp"

#include <algorithm>
#include <cmath>

#include "gpob/errors.hpp"

namespace gpob {

void FlowParams::validate() const {
    if (!(std::abs(delta) < 1.0)) throw InvalidArgument("|delta| must be below 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
}

double farfield_shape(double delta, double x1, double x2) {
    const double k = (1.0 - delta * delta) / (1.0 - 3.0 * delta * delta);
    return x2 / (x1 * x1 + k * x2 * x2);
}

double incompressible_disk_potential(double delta, double a, double x1, double x2) {
    const double r2 = x1 * x1 + x2 * x2;
    return delta * x2 * (1.0 + a * a / r2);
}

Vec incompressible_potential(const Grid2D& g, double delta) {
    Vec phi(g.size());
    const auto& s = g.shape();
    const bool round = s.kind == ShapeKind::Disk || s.semi_axis_a == s.semi_axis_b;
    if (round) {
        for (std::size_t k = 0; k < g.size(); ++k)
            phi[k] = incompressible_disk_potential(delta, s.semi_axis_a, g.x1(k), g.x2(k));
        return phi;
    }
    // δ(c/2) sin θ (e^μ + e^{2μ₀−μ}) in confocal coordinates, either orientation
    const double big = s.max_semi_axis(), small = std::min(s.semi_axis_a, s.semi_axis_b);
    const double c = std::sqrt(big * big - small * small);
    const double mu0 = g.xi(0);
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const double mu = g.xi(i);
            phi[g.index(i, j)] = delta * 0.5 * c * std::sin(g.theta(j)) * (std::exp(mu) + std::exp(2.0 * mu0 - mu));
        }
    return phi;
}

namespace {

struct KappaStencil {
    std::array<std::size_t, 5> node{};
    std::array<double, 5> d{};
    int n = 0;
};

/// ∂κ_p/∂Φ_m for κ = 1 − |∇_hΦ|² at node p.
KappaStencil kappa_stencil(const Grid2D& g, const VectorField& grad, std::size_t i, std::size_t j) {
    const GradientStencil gs = gradient_stencil(g, i, j);
    const std::size_t p = g.index(i, j);
    KappaStencil ks;
    ks.n = gs.n;
    for (int t = 0; t < gs.n; ++t) {
        ks.node[t] = gs.node[t];
        ks.d[t] = -2.0 * (grad.c1[p] * gs.w1[t] + grad.c2[p] * gs.w2[t]);
    }
    return ks;
}

/// ∇_hΦ · (Δ_h x₁, Δ_h x₂) at an interior node.
double defect_gradient(const Grid2D& g, std::span<const double> phi, std::size_t i, std::size_t j) {
    const DefectStencil d = defect_stencil(g, i, j);
    double s = 0.0;
    for (int t = 0; t < 4; ++t) s += d.w[t] * phi[d.node[t]];
    return s;
}

}  // namespace

Vec FlowDiscretization::residual(const Vec& state) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    if (state.size() != N + 1) throw InvalidArgument("flow state size mismatch");
    std::span<const double> phi(state.data(), N);
    const double D = state[N];
    Vec kappa = grad_squared(g, phi);
    for (auto& v : kappa) v = 1.0 - v;
    Vec r(N + 1, 0.0);
    for (std::size_t i = 0; i + 1 < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            double s = 0.0;
            visit_faces(g, i, j, [&](std::size_t n, double c) { s += c * 0.5 * (kappa[k] + kappa[n]) * (phi[n] - phi[k]); });
            if (i > 0) s -= g.cell_area(k) * kappa[k] * defect_gradient(g, phi, i, j);
            r[k] = s;
        }
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t k = g.index(ni - 1, j);
        r[k] = phi[k] - delta * g.x2(k) - D * farfield_shape(delta, g.x1(k), g.x2(k));
        const std::size_t m = g.index(ni - 2, j);
        const double gm = farfield_shape(delta, g.x1(m), g.x2(m));
        num += gm * (phi[m] - delta * g.x2(m) - D * gm);
        den += gm * gm;
    }
    r[N] = den > 0.0 ? num / den : D;
    return r;
}

SparseMatrix FlowDiscretization::jacobian(const Vec& state) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    std::span<const double> phi(state.data(), N);
    const VectorField grad = gradient(g, phi);
    Vec kappa(N);
    for (std::size_t k = 0; k < N; ++k) kappa[k] = 1.0 - grad.c1[k] * grad.c1[k] - grad.c2[k] * grad.c2[k];

    TripletBuilder tb(N + 1, N + 1);
    tb.reserve(30 * N);
    std::vector<std::pair<std::size_t, double>> dk;  // (node p, ∂R/∂κ_p)
    for (std::size_t i = 0; i + 1 < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            dk.clear();
            double self = 0.0, dself = 0.0;
            visit_faces(g, i, j, [&](std::size_t n, double c) {
                const double kf = c * 0.5 * (kappa[k] + kappa[n]);
                tb.add(k, n, kf);
                dself -= kf;
                const double a = c * 0.5 * (phi[n] - phi[k]);
                self += a;
                dk.emplace_back(n, a);
            });
            if (i > 0) {
                const DefectStencil d = defect_stencil(g, i, j);
                const double ak = g.cell_area(k);
                double gl = 0.0;
                for (int t = 0; t < 4; ++t) {
                    tb.add(k, d.node[t], -ak * kappa[k] * d.w[t]);
                    gl += d.w[t] * phi[d.node[t]];
                }
                self -= ak * gl;
            }
            tb.add(k, k, dself);
            dk.emplace_back(k, self);
            for (const auto& [p, a] : dk) {
                if (a == 0.0) continue;
                const std::size_t pi = p / nj, pj = p % nj;
                const KappaStencil ks = kappa_stencil(g, grad, pi, pj);
                for (int s = 0; s < ks.n; ++s) tb.add(k, ks.node[s], a * ks.d[s]);
            }
        }
    double den = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t k = g.index(ni - 1, j);
        tb.add(k, k, 1.0);
        tb.add(k, N, -farfield_shape(delta, g.x1(k), g.x2(k)));
        const std::size_t m = g.index(ni - 2, j);
        const double gm = farfield_shape(delta, g.x1(m), g.x2(m));
        den += gm * gm;
    }
    if (den > 0.0) {
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t m = g.index(ni - 2, j);
            tb.add(N, m, farfield_shape(delta, g.x1(m), g.x2(m)) / den);
        }
        tb.add(N, N, -1.0);
    } else {
        tb.add(N, N, 1.0);
    }
    return tb.build();
}

Vec FlowDiscretization::state_from_phi(const Vec& phi) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    if (phi.size() != N) throw InvalidArgument("seed size mismatch");
    Vec s(phi);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t m = g.index(ni - 2, j);
        const double gm = farfield_shape(delta, g.x1(m), g.x2(m));
        num += gm * (phi[m] - delta * g.x2(m));
        den += gm * gm;
    }
    const double D = den > 0.0 ? num / den : 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t k = g.index(ni - 1, j);
        s[k] = delta * g.x2(k) + D * farfield_shape(delta, g.x1(k), g.x2(k));
    }
    s.push_back(D);
    return s;
}

NewtonConfig default_flow_newton() {
    NewtonConfig c;
    c.abs_tol = 1e-10;
    c.max_iters = 30;
    c.linear_tol = 1e-8;
    c.linear_kind = LinearSolverKind::Auto;
    return c;
}

FlowSolution solve_potential_flow(std::shared_ptr<const Grid2D> grid, const FlowParams& params,
                                  const std::optional<Vec>& seed, const NewtonConfig& cfg) {
    if (!grid) throw InvalidArgument("solve_potential_flow: null grid");
    params.validate();
    if (3.0 * params.delta * params.delta >= 1.0) throw EllipticityLoss("far-field speed is supersonic");
    const Grid2D& g = *grid;
    FlowDiscretization disc{grid, params.delta};
    const Vec phi0 = seed ? *seed : incompressible_potential(g, params.delta);
    const Vec x0 = disc.state_from_phi(phi0);
    const std::size_t N = g.size();
    auto hook = [&](int it, const Vec& x) {
        const Vec s2 = grad_squared(g, std::span<const double>(x.data(), N));
        const double m = *std::max_element(s2.begin(), s2.end());
        if (!(m < kSonicSpeed2))
            throw EllipticityLoss("max |grad Phi|^2 = " + std::to_string(m) + " at iterate " + std::to_string(it));
    };
    const NewtonResult nr = newton_solve([&](const Vec& x) { return disc.residual(x); },
                                         [&](const Vec& x) { return disc.jacobian(x); }, x0, cfg, hook);
    FlowSolution sol;
    sol.grid = grid;
    sol.delta = params.delta;
    sol.phi.assign(nr.x.begin(), nr.x.begin() + static_cast<std::ptrdiff_t>(N));
    sol.dipole = nr.x[N];
    sol.speed2 = grad_squared(g, sol.phi);
    sol.rho.resize(N);
    sol.amplitude.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        sol.rho[k] = 1.0 - sol.speed2[k];
        sol.amplitude[k] = std::sqrt(sol.rho[k]);
    }
    sol.residual_norm = nr.residual_norm;
    sol.newton_iterations = nr.iterations;
    sol.max_boundary_speed2 = *std::max_element(sol.speed2.begin(), sol.speed2.begin() + static_cast<std::ptrdiff_t>(g.n_angular()));
    sol.sonic_margin = kSonicSpeed2 - *std::max_element(sol.speed2.begin(), sol.speed2.end());
    return sol;
}

SonicReport sonic_continuation(std::shared_ptr<const Grid2D> grid, double delta_max, const ContinuationConfig& cfg,
                               const NewtonConfig& newton_cfg, bool keep_solutions) {
    if (!(delta_max > 0.0 && delta_max < 1.0)) throw InvalidArgument("delta_max must lie in (0,1)");
    const std::size_t N = grid->size();
    ContinuationConfig cc = cfg;
    cc.param_start = 0.0;
    cc.param_end = delta_max;
    ProblemFactory make = [&](double delta) {
        auto disc = std::make_shared<FlowDiscretization>(FlowDiscretization{grid, delta});
        ContinuationProblem p;
        p.residual = [disc](const Vec& x) { return disc->residual(x); };
        p.jacobian = [disc](const Vec& x) { return disc->jacobian(x); };
        p.hook = [grid, N](int it, const Vec& x) {
            const Vec s2 = grad_squared(*grid, std::span<const double>(x.data(), N));
            const double m = *std::max_element(s2.begin(), s2.end());
            if (!(m < kSonicSpeed2))
                throw EllipticityLoss("max |grad Phi|^2 = " + std::to_string(m) + " at iterate " + std::to_string(it));
        };
        p.diagnostics = [grid, N](const Vec& x) {
            const Vec s2 = grad_squared(*grid, std::span<const double>(x.data(), N));
            return std::map<std::string, double>{
                {"max_boundary_speed2",
                 *std::max_element(s2.begin(), s2.begin() + static_cast<std::ptrdiff_t>(grid->n_angular()))},
                {"max_speed2", *std::max_element(s2.begin(), s2.end())}};
        };
        return p;
    };
    // rescale the previous potential (and dipole) by δ_new/δ_old, or use the
    // incompressible potential when starting from δ = 0
    Predictor predict = [&](const Vec& prev, double d_old, double d_new) {
        if (d_old == 0.0) return FlowDiscretization{grid, d_new}.state_from_phi(incompressible_potential(*grid, d_new));
        Vec x(prev);
        for (auto& v : x) v *= d_new / d_old;
        return x;
    };
    const Vec seed(N + 1, 0.0);
    const ContinuationResult res = continuation_sweep(make, seed, cc, newton_cfg, predict);
    SonicReport rep;
    for (const auto& s : res.samples) {
        rep.samples.push_back({s.param, s.diagnostics.at("max_boundary_speed2"), true});
        if (keep_solutions) {
            FlowSolution fs;
            fs.grid = grid;
            fs.delta = s.param;
            fs.phi.assign(s.solution.begin(), s.solution.begin() + static_cast<std::ptrdiff_t>(N));
            fs.dipole = s.solution[N];
            fs.speed2 = grad_squared(*grid, fs.phi);
            fs.rho.resize(N);
            fs.amplitude.resize(N);
            for (std::size_t k = 0; k < N; ++k) {
                fs.rho[k] = 1.0 - fs.speed2[k];
                fs.amplitude[k] = std::sqrt(fs.rho[k]);
            }
            fs.residual_norm = s.residual_norm;
            fs.max_boundary_speed2 = s.diagnostics.at("max_boundary_speed2");
            fs.sonic_margin = kSonicSpeed2 - s.diagnostics.at("max_speed2");
            rep.solutions.push_back(std::move(fs));
        }
    }
    rep.failure = res.failure;
    if (res.status == BranchStatus::BranchEnd) {
        rep.samples.push_back({res.param_failed, NAN, false});
        rep.delta_lo = res.param_last;
        rep.delta_hi = res.param_failed;
        rep.bracketed = true;
    } else {
        rep.delta_lo = res.param_last;
        rep.delta_hi = NAN;
    }
    return rep;
}

double local_mach_speed(double b2) {
    if (!(b2 >= 0.0 && b2 < 1.0)) throw DomainError("local_mach_speed needs 0 <= b2 < 1");
    return 2.0 * std::sqrt(b2) / std::sqrt(1.0 - b2);
}

namespace {

std::pair<double, double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

}  // namespace

FarfieldDecay farfield_decay_check(const FlowSolution& sol) {
    const Grid2D& g = *sol.grid;
    if (g.r_far() < 10.0 * g.shape().max_semi_axis()) throw InsufficientRange("R_far must be at least 10 semi-axes");
    FarfieldDecay out;
    if (sol.delta == 0.0) {
        out.skipped = true;
        return out;
    }
    const VectorField grad = gradient(g, sol.phi);
    const double rho_inf = 1.0 - sol.delta * sol.delta;
    std::vector<double> rr, dphi, drho;
    for (std::size_t i = 0; i + 1 < g.n_radial(); ++i) {
        double rmean = 0.0, mp = 0.0, mr = 0.0;
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            rmean += g.radius(k);
            mp = std::max(mp, std::hypot(grad.c1[k], grad.c2[k] - sol.delta));
            mr = std::max(mr, std::abs(sol.rho[k] - rho_inf));
        }
        rmean /= static_cast<double>(g.n_angular());
        if (rmean < 0.25 * g.r_far() || mp <= 0.0 || mr <= 0.0) continue;
        rr.push_back(rmean);
        dphi.push_back(mp);
        drho.push_back(mr);
    }
    if (rr.size() < 3) throw InsufficientRange("fewer than three rings in the far-field window");
    out.exponent_phi = loglog_slope(rr, dphi).first;
    out.exponent_rho = loglog_slope(rr, drho).first;
    return out;
}

BoundaryExtrema boundary_extrema(const FlowSolution& sol, double relative_prominence) {
    const Grid2D& g = *sol.grid;
    const Vec trace = boundary_values(g, sol.speed2);
    const auto [mn, mx] = std::minmax_element(trace.begin(), trace.end());
    BoundaryExtrema be;
    be.trace = boundary_trace(g.thetas(), trace, relative_prominence * (*mx - *mn));
    be.tangential_derivative = tangential_derivative(g, trace);
    return be;
}

}  // namespace gpob
