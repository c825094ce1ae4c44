#include "gpob/traveling_wave.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gpob/errors.hpp"

namespace gpob {

namespace {

using cd = std::complex<double>;

bool is_dirichlet(const HalfPlaneGrid& g, std::size_t i, std::size_t j) {
    return i + 1 == g.n1 || j == 0 || j + 1 == g.n2;
}

/// Neighbour values (left, right, down, up) with the mirror at y₁ = 0.
struct Stencil {
    std::size_t left, right, down, up;
};

Stencil stencil(const HalfPlaneGrid& g, std::size_t i, std::size_t j) {
    return {g.index(i == 0 ? 1 : i - 1, j), g.index(i + 1, j), g.index(i, j - 1), g.index(i, j + 1)};
}

cd node_residual(const HalfPlaneGrid& g, double c, const CVec& U, std::size_t i, std::size_t j) {
    const Stencil s = stencil(g, i, j);
    const cd u = U[g.index(i, j)];
    const double ih2 = 1.0 / (g.h * g.h);
    const cd lap = (U[s.left] + U[s.right] + U[s.down] + U[s.up] - 4.0 * u) * ih2;
    const cd d2 = (U[s.up] - U[s.down]) / (2.0 * g.h);
    return lap + cd(0.0, c) * d2 + u * (1.0 - std::norm(u));
}

double weight(const HalfPlaneGrid& g, std::size_t i) { return (i == 0 ? 0.5 : 1.0) * g.h * g.h; }

double weighted_norm(const HalfPlaneGrid& g, const CVec& z) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) s += weight(g, i) * std::norm(z[g.index(i, j)]);
    return std::sqrt(s);
}

CVec d2_field(const HalfPlaneGrid& g, const CVec& U) {
    CVec out(g.size(), 0.0);
    const std::size_t m = g.n2 - 1;
    for (std::size_t i = 0; i < g.n1; ++i) {
        for (std::size_t j = 1; j < m; ++j)
            out[g.index(i, j)] = (U[g.index(i, j + 1)] - U[g.index(i, j - 1)]) / (2.0 * g.h);
        out[g.index(i, 0)] = (-3.0 * U[g.index(i, 0)] + 4.0 * U[g.index(i, 1)] - U[g.index(i, 2)]) / (2.0 * g.h);
        out[g.index(i, m)] = (3.0 * U[g.index(i, m)] - 4.0 * U[g.index(i, m - 1)] + U[g.index(i, m - 2)]) / (2.0 * g.h);
    }
    return out;
}

void fill_diagnostics(TravelingWave& w, bool expect_vortex) {
    const HalfPlaneGrid& g = w.grid;
    w.S.resize(g.size());
    w.phi.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        w.S[k] = std::abs(w.field[k]);
        w.phi[k] = std::arg(w.field[k]);
    }
    const CVec d2 = d2_field(g, w.field);
    w.momentum = 0.0;
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            const std::size_t k = g.index(i, j);
            w.momentum += weight(g, i) * std::imag((std::conj(w.field[k]) - 1.0) * d2[k]);
        }
    w.vortices = detect_vortices(g, w.field);
    const Vortex* best = nullptr;
    for (const auto& v : w.vortices)
        if (v.winding > 0 && (!best || v.core_min < best->core_min)) best = &v;
    if (!best) {
        w.d_c = 0.0;
        if (expect_vortex) throw VortexEscape("traveling wave at c = " + std::to_string(w.c) + " has no vortex");
        return;
    }
    w.d_c = best->position[0];
}

}  // namespace

std::complex<double> FarFieldClosure::value(double y1, double y2) const {
    if (pair_d <= 0.0) return 1.0;
    const cd z = cd(y1 - pair_d, y2) * std::conj(cd(y1 + pair_d, y2));
    return z / std::abs(z);
}

TravelingWaveDiscretization::TravelingWaveDiscretization(const HalfPlaneGrid& g, double c_, FarFieldClosure cl,
                                                         bool refl)
    : grid(g), c(c_), closure(cl), reflect(refl) {
    if (g.n1 < 3 || g.n2 < 3) throw InvalidArgument("TravelingWaveDiscretization: grid too small");
    j_mid_ = (g.n2 - 1) / 2;
    slot_of_.assign(g.size(), npos);
    boundary_.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            if (is_dirichlet(g, i, j)) {
                boundary_[g.index(i, j)] = closure.value(g.y1(i), g.y2(j));
            } else if (!reflect || j >= j_mid_) {
                slot_of_[g.index(i, j)] = node_of_.size();
                node_of_.push_back(g.index(i, j));
            }
        }
}

Vec TravelingWaveDiscretization::pack(const CVec& field) const {
    Vec x(n_unknowns());
    for (std::size_t s = 0; s < node_of_.size(); ++s) {
        x[2 * s] = field[node_of_[s]].real();
        x[2 * s + 1] = field[node_of_[s]].imag();
        if (reflect && node_of_[s] % grid.n2 == j_mid_) x[2 * s + 1] = 0.0;
    }
    return x;
}

CVec TravelingWaveDiscretization::unpack(const Vec& x) const {
    CVec f(boundary_);
    for (std::size_t s = 0; s < node_of_.size(); ++s) f[node_of_[s]] = {x[2 * s], x[2 * s + 1]};
    if (reflect)
        for (std::size_t i = 0; i + 1 < grid.n1; ++i)
            for (std::size_t j = 1; j < j_mid_; ++j)
                f[grid.index(i, j)] = std::conj(f[grid.index(i, grid.n2 - 1 - j)]);
    return f;
}

Vec TravelingWaveDiscretization::residual(const Vec& x) const {
    const CVec U = unpack(x);
    Vec r(n_unknowns());
    for (std::size_t s = 0; s < node_of_.size(); ++s) {
        const std::size_t k = node_of_[s];
        const std::size_t j = k % grid.n2;
        const cd f = node_residual(grid, c, U, k / grid.n2, j);
        r[2 * s] = f.real();
        r[2 * s + 1] = (reflect && j == j_mid_) ? x[2 * s + 1] : f.imag();
    }
    return r;
}

SparseMatrix TravelingWaveDiscretization::jacobian(const Vec& x) const {
    const std::size_t n = n_unknowns();
    TripletBuilder tb(n, n);
    tb.reserve(n * 10);
    const double ih2 = 1.0 / (grid.h * grid.h);
    const double b = c / (2.0 * grid.h);
    // α·U_m, or α·conj U_{m'} when m lies in the reflected half
    auto add_complex = [&](std::size_t row_slot, std::size_t node, cd alpha) {
        std::size_t cs = slot_of_[node];
        bool conj = false;
        if (cs == npos && reflect) {
            const std::size_t i = node / grid.n2, j = node % grid.n2;
            if (!is_dirichlet(grid, i, j) && j < j_mid_) {
                cs = slot_of_[grid.index(i, grid.n2 - 1 - j)];
                conj = true;
            }
        }
        if (cs == npos) return;
        const double sg = conj ? -1.0 : 1.0;
        tb.add(2 * row_slot, 2 * cs, alpha.real());
        tb.add(2 * row_slot, 2 * cs + 1, -sg * alpha.imag());
        tb.add(2 * row_slot + 1, 2 * cs, alpha.imag());
        tb.add(2 * row_slot + 1, 2 * cs + 1, sg * alpha.real());
    };
    for (std::size_t s = 0; s < node_of_.size(); ++s) {
        const std::size_t k = node_of_[s];
        const std::size_t i = k / grid.n2, j = k % grid.n2;
        const Stencil st = stencil(grid, i, j);
        add_complex(s, st.left, ih2);
        add_complex(s, st.right, ih2);
        add_complex(s, st.down, cd(ih2, -b));
        add_complex(s, st.up, cd(ih2, b));
        const double a = x[2 * s], bb = x[2 * s + 1];
        tb.add(2 * s, 2 * s, -4.0 * ih2 + 1.0 - 3.0 * a * a - bb * bb);
        tb.add(2 * s, 2 * s + 1, -2.0 * a * bb);
        tb.add(2 * s + 1, 2 * s, -2.0 * a * bb);
        tb.add(2 * s + 1, 2 * s + 1, -4.0 * ih2 + 1.0 - a * a - 3.0 * bb * bb);
    }
    SparseMatrix J = tb.build();
    if (!reflect) return J;
    // rows Im U = 0 on y₂ = 0
    std::vector<std::size_t> rp{0}, ci;
    std::vector<double> v;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t s = r / 2;
        if (r % 2 == 1 && node_of_[s] % grid.n2 == j_mid_) {
            ci.push_back(r);
            v.push_back(1.0);
        } else {
            for (std::size_t q = J.row_ptr()[r]; q < J.row_ptr()[r + 1]; ++q) {
                ci.push_back(J.col_idx()[q]);
                v.push_back(J.values()[q]);
            }
        }
        rp.push_back(ci.size());
    }
    return SparseMatrix(n, n, std::move(rp), std::move(ci), std::move(v));
}

CVec traveling_wave_residual(const HalfPlaneGrid& g, double c, const CVec& U) {
    CVec r(g.size(), 0.0);
    for (std::size_t i = 0; i + 1 < g.n1; ++i)
        for (std::size_t j = 1; j + 1 < g.n2; ++j) r[g.index(i, j)] = node_residual(g, c, U, i, j);
    return r;
}

CVec linearized_apply(const HalfPlaneGrid& g, double c, const CVec& U, const CVec& z) {
    CVec out(g.size(), 0.0);
    const double ih2 = 1.0 / (g.h * g.h);
    for (std::size_t i = 0; i + 1 < g.n1; ++i)
        for (std::size_t j = 1; j + 1 < g.n2; ++j) {
            const Stencil s = stencil(g, i, j);
            const std::size_t k = g.index(i, j);
            const cd lap = (z[s.left] + z[s.right] + z[s.down] + z[s.up] - 4.0 * z[k]) * ih2;
            const cd d2 = (z[s.up] - z[s.down]) / (2.0 * g.h);
            const cd u = U[k];
            out[k] = lap + cd(0.0, c) * d2 + (1.0 - std::norm(u)) * z[k] - 2.0 * std::real(std::conj(u) * z[k]) * u;
        }
    return out;
}

std::complex<double> sample_wave(const TravelingWave& w, double y1, double y2) {
    const HalfPlaneGrid& g = w.grid;
    const double a = std::abs(y1) / g.h, b = (y2 + g.L2) / g.h;
    if (a > static_cast<double>(g.n1 - 1) || b < 0.0 || b > static_cast<double>(g.n2 - 1)) return 1.0;
    const auto i0 = std::min(static_cast<std::size_t>(a), g.n1 - 2);
    const auto j0 = std::min(static_cast<std::size_t>(b), g.n2 - 2);
    const double fa = a - static_cast<double>(i0), fb = b - static_cast<double>(j0);
    const CVec& U = w.field;
    return (1 - fa) * (1 - fb) * U[g.index(i0, j0)] + fa * (1 - fb) * U[g.index(i0 + 1, j0)] +
           (1 - fa) * fb * U[g.index(i0, j0 + 1)] + fa * fb * U[g.index(i0 + 1, j0 + 1)];
}

CVec wave_d2(const TravelingWave& w) { return d2_field(w.grid, w.field); }

NewtonConfig default_wave_newton() {
    NewtonConfig cfg;
    cfg.abs_tol = 1e-10;
    cfg.max_iters = 30;
    cfg.linear_kind = LinearSolverKind::DirectLU;
    return cfg;
}

CVec wave_seed(const VortexProfile& p, double d, const HalfPlaneGrid& g, FarFieldClosure closure) {
    CVec f = pair_ansatz(p, d, g).field;
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j)
            if (is_dirichlet(g, i, j)) f[g.index(i, j)] = closure.value(g.y1(i), g.y2(j));
    return f;
}

TravelingWave solve_traveling_wave(double c, const CVec& seed, const HalfPlaneGrid& g, const NewtonConfig& cfg,
                                   bool expect_vortex, FarFieldClosure closure) {
    if (!(c > 0.0 && c < std::sqrt(2.0))) throw InvalidArgument("solve_traveling_wave: need 0 < c < sqrt(2)");
    if (seed.size() != g.size()) throw InvalidArgument("solve_traveling_wave: seed size mismatch");
    const TravelingWaveDiscretization disc(g, c, closure, true);
    const NewtonResult nr = newton_solve([&](const Vec& x) { return disc.residual(x); },
                                         [&](const Vec& x) { return disc.jacobian(x); }, disc.pack(seed), cfg);
    TravelingWave w;
    w.c = c;
    w.grid = g;
    w.field = disc.unpack(nr.x);
    w.residual_norm = nr.residual_norm;
    w.newton_iterations = nr.iterations;
    w.closure = closure;
    fill_diagnostics(w, expect_vortex);
    return w;
}

TravelingWave wave_from_field(double c, const HalfPlaneGrid& g, CVec field, FarFieldClosure closure) {
    if (field.size() != g.size()) throw InvalidArgument("wave field size does not match the grid");
    TravelingWave w;
    w.c = c;
    w.grid = g;
    w.field = std::move(field);
    w.closure = closure;
    fill_diagnostics(w, false);
    return w;
}

WaveBranch continuation_in_c(double c_start, double c_end, const HalfPlaneGrid& g, const VortexProfile& p,
                             const ContinuationConfig& ccfg, const NewtonConfig& ncfg, std::optional<double> seed_d,
                             bool pair_closure) {
    if (!(c_start > 0.0 && c_start < c_end && c_end <= std::sqrt(2.0)))
        throw InvalidArgument("continuation_in_c: need 0 < c_start < c_end <= sqrt(2)");
    ContinuationConfig cc = ccfg;
    cc.param_start = c_start;
    cc.param_end = std::min(c_end, std::sqrt(2.0) - 1e-9);

    auto closure_at = [pair_closure](double c) {
        return pair_closure ? FarFieldClosure::pair_phase(1.0 / c) : FarFieldClosure::unit();
    };
    const ProblemFactory factory = [&](double c) {
        auto disc = std::make_shared<TravelingWaveDiscretization>(g, c, closure_at(c), true);
        ContinuationProblem prob;
        prob.residual = [disc](const Vec& x) { return disc->residual(x); };
        prob.jacobian = [disc](const Vec& x) { return disc->jacobian(x); };
        prob.diagnostics = [disc, &g, c](const Vec& x) {
            TravelingWave w;
            w.c = c;
            w.grid = g;
            w.field = disc->unpack(x);
            fill_diagnostics(w, true);
            if (w.d_c < 2.0 * g.h) throw VortexEscape("cores merged at c = " + std::to_string(c));
            return std::map<std::string, double>{{"d_c", w.d_c}, {"momentum", w.momentum}};
        };
        return prob;
    };

    const TravelingWaveDiscretization d0(g, c_start, closure_at(c_start), true);
    const Vec seed = d0.pack(wave_seed(p, seed_d.value_or(1.0 / c_start), g, closure_at(c_start)));
    // rescale y so that the core moves from d to d·c_old/c_new
    const Predictor predictor = [&](const Vec& prev, double c_old, double c_new) {
        const TravelingWaveDiscretization from(g, c_old, closure_at(c_old), true);
        const TravelingWaveDiscretization to(g, c_new, closure_at(c_new), true);
        const CVec U = from.unpack(prev);
        const FarFieldClosure cl = closure_at(c_new);
        const double s = c_new / c_old;
        CVec out(g.size());
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j) {
                const double y1 = g.y1(i) * s, y2 = g.y2(j) * s;
                const double a = y1 / g.h, b = (y2 + g.L2) / g.h;
                if (a >= static_cast<double>(g.n1 - 1) || b <= 0.0 || b >= static_cast<double>(g.n2 - 1)) {
                    out[g.index(i, j)] = cl.value(y1, y2);
                    continue;
                }
                const auto i0 = static_cast<std::size_t>(a), j0 = static_cast<std::size_t>(b);
                const double fa = a - static_cast<double>(i0), fb = b - static_cast<double>(j0);
                out[g.index(i, j)] = (1 - fa) * (1 - fb) * U[g.index(i0, j0)] + fa * (1 - fb) * U[g.index(i0 + 1, j0)] +
                                     (1 - fa) * fb * U[g.index(i0, j0 + 1)] + fa * fb * U[g.index(i0 + 1, j0 + 1)];
            }
        return to.pack(out);
    };
    const ContinuationResult cr = continuation_sweep(factory, seed, cc, ncfg, predictor);

    WaveBranch br;
    br.status = cr.status;
    br.c_end_observed = cr.param_last;
    br.c_failed = cr.param_failed;
    br.termination = cr.status == BranchStatus::BranchEnd ? cr.failure : "completed";
    for (const auto& s : cr.samples) {
        const TravelingWaveDiscretization disc(g, s.param, closure_at(s.param), true);
        TravelingWave w;
        w.c = s.param;
        w.grid = g;
        w.closure = disc.closure;
        w.field = disc.unpack(s.solution);
        w.residual_norm = s.residual_norm;
        w.newton_iterations = static_cast<int>(s.diagnostics.at("newton_iterations"));
        fill_diagnostics(w, true);
        if (w.c <= 0.3 + 1e-12) br.small_c_bound = std::max(br.small_c_bound, w.c * w.d_c);
        br.waves.push_back(std::move(w));
    }
    return br;
}

namespace {

struct ProjectionParts {
    double speed_coeff, interaction;
};

ProjectionParts projection_parts(double d, const HalfPlaneGrid& g, const VortexProfile& p) {
    const PairAnsatz a = pair_ansatz(p, d, g);
    const CVec& V = a.field;
    double num_speed = 0.0, num_int = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < g.n1; ++i)
        for (std::size_t j = 1; j + 1 < g.n2; ++j) {
            const std::size_t k = g.index(i, j);
            const cd r0 = node_residual(g, 0.0, V, i, j);
            const cd r1 = cd(0.0, 1.0) * (V[g.index(i, j + 1)] - V[g.index(i, j - 1)]) / (2.0 * g.h);
            const double w = weight(g, i);
            const cd dv = a.d_derivative[k];
            num_speed += w * std::real(r1 * std::conj(dv));
            num_int += w * std::real(r0 * std::conj(dv));
            den += w * std::norm(dv);
        }
    return {num_speed / den, -num_int / den};
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

double projected_speed(double epsilon, double d, const HalfPlaneGrid& g, const VortexProfile& p) {
    const auto pp = projection_parts(d, g, p);
    return epsilon * pp.speed_coeff - pp.interaction;
}

ReducedCurve reduced_speed_curve(double epsilon, const std::vector<double>& d_samples, const HalfPlaneGrid& g,
                                 const VortexProfile& p) {
    if (!(epsilon > 0.0)) throw InvalidArgument("reduced_speed_curve: epsilon must be positive");
    if (d_samples.size() < 2) throw InvalidArgument("reduced_speed_curve: need at least two separations");
    ReducedCurve rc;
    rc.epsilon = epsilon;
    for (double d : d_samples) {
        const auto pp = projection_parts(d, g, p);
        rc.d.push_back(d);
        rc.speed_coeff.push_back(pp.speed_coeff);
        rc.interaction.push_back(pp.interaction);
        rc.c_proj.push_back(epsilon * pp.speed_coeff - pp.interaction);
    }
    // c_proj = c₁ε − c₂·(1/d): linear in 1/d
    std::vector<double> x;
    for (double d : rc.d) x.push_back(1.0 / d);
    const double slope = fit_slope(x, rc.c_proj);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / static_cast<double>(x.size());
        my += rc.c_proj[i] / static_cast<double>(x.size());
    }
    const double intercept = my - slope * mx;
    rc.c1 = intercept / epsilon;
    rc.c2 = -slope;
    double scale = 0.0, dev = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        scale = std::max(scale, std::abs(rc.c_proj[i]));
        dev = std::max(dev, std::abs(intercept + slope * x[i] - rc.c_proj[i]));
    }
    rc.fit_residual = scale > 0.0 ? dev / scale : 0.0;
    rc.d_star = rc.c2 / (rc.c1 * epsilon);
    std::vector<double> ld, lv;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = rc.c1 * epsilon - rc.c_proj[i];
        if (v > 0.0) {
            ld.push_back(std::log(rc.d[i]));
            lv.push_back(std::log(v));
        }
    }
    rc.interaction_slope = ld.size() >= 2 ? fit_slope(ld, lv) : std::nan("");
    return rc;
}

SpectralReport nondegeneracy_spectrum(const TravelingWave& wave, int max_iters, double tol) {
    const HalfPlaneGrid& g = wave.grid;
    const TravelingWaveDiscretization disc(g, wave.c, wave.closure);
    SpectralReport rep;
    rep.c = wave.c;

    CVec z0(wave.field.size());
    for (std::size_t k = 0; k < z0.size(); ++k) z0[k] = cd(0.0, 1.0) * wave.field[k];
    const CVec z1 = d2_field(g, wave.field);
    rep.kernel_residual_gauge = weighted_norm(g, linearized_apply(g, wave.c, wave.field, z0)) / weighted_norm(g, z0);
    rep.kernel_residual_translation =
        weighted_norm(g, linearized_apply(g, wave.c, wave.field, z1)) / weighted_norm(g, z1);

    const SparseMatrix J = disc.jacobian(disc.pack(wave.field));
    const SparseLU lu(J);
    // A = JᵀJ; A⁻¹ = J⁻¹J⁻ᵀ
    auto apply_inverse = [&](const Vec& b) { return lu.solve(lu.solve_transpose(b)); };
    const std::size_t n = disc.n_unknowns();
    std::array<Vec, 2> V{disc.pack(z0), disc.pack(z1)};
    // orthonormalize the constraint directions
    {
        const double n0 = norm2(V[0]);
        for (double& v : V[0]) v /= n0;
        const double p = dot(V[0], V[1]);
        for (std::size_t i = 0; i < n; ++i) V[1][i] -= p * V[0][i];
        const double n1 = norm2(V[1]);
        for (double& v : V[1]) v /= n1;
    }
    std::array<Vec, 2> AiV{apply_inverse(V[0]), apply_inverse(V[1])};
    double G[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) G[a][b] = dot(V[a], AiV[b]);
    const double det = G[0][0] * G[1][1] - G[0][1] * G[1][0];

    // constrained inverse iteration: x ← A⁻¹(x − Vμ) with Vᵀx = 0
    auto constrained_solve = [&](const Vec& b) {
        Vec y = apply_inverse(b);
        const double r0 = dot(V[0], y), r1 = dot(V[1], y);
        const double m0 = (G[1][1] * r0 - G[0][1] * r1) / det;
        const double m1 = (-G[1][0] * r0 + G[0][0] * r1) / det;
        for (std::size_t i = 0; i < n; ++i) y[i] -= m0 * AiV[0][i] + m1 * AiV[1][i];
        return y;
    };
    auto rayleigh = [&](const Vec& x) {
        const Vec jx = J * x;
        return norm2(jx) / norm2(x);
    };
    auto iterate = [&](bool constrained, int& its) {
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
        if (constrained) {
            for (int a = 0; a < 2; ++a) {
                const double p = dot(V[a], x);
                for (std::size_t i = 0; i < n; ++i) x[i] -= p * V[a][i];
            }
        }
        double sigma = rayleigh(x), prev = 0.0;
        for (its = 0; its < max_iters; ++its) {
            x = constrained ? constrained_solve(x) : apply_inverse(x);
            const double nx = norm2(x);
            for (double& v : x) v /= nx;
            prev = sigma;
            sigma = rayleigh(x);
            if (std::abs(sigma - prev) <= tol * sigma) return sigma;
        }
        throw EigenIterationFailure("nondegeneracy_spectrum: inverse iteration did not converge (sigma = " +
                                    std::to_string(sigma) + ")");
    };
    int its_free = 0;
    rep.smallest_sv = iterate(false, its_free);
    rep.smallest_sv_constrained = iterate(true, rep.iterations);
    return rep;
}

DecayExponents decay_fit(const TravelingWave& wave) {
    const HalfPlaneGrid& g = wave.grid;
    const double L = std::min(g.L1, g.L2);
    if (!(wave.d_c > 0.0) || L < 8.0 * wave.d_c)
        throw InsufficientRange("decay_fit: grid half-widths must be at least 8 d_c");
    DecayExponents de;
    de.r_min = 2.0 * wave.d_c;
    de.r_max = 0.8 * L;
    const int nb = 24;
    const double lr0 = std::log(de.r_min), lr1 = std::log(de.r_max);
    std::vector<double> mS(nb, 0.0), mP(nb, 0.0), mU(nb, 0.0), rsum(nb, 0.0), cnt(nb, 0.0);
    const CVec& U = wave.field;
    for (std::size_t i = 0; i + 1 < g.n1; ++i)
        for (std::size_t j = 1; j + 1 < g.n2; ++j) {
            const double r = std::hypot(g.y1(i), g.y2(j));
            if (r < de.r_min || r > de.r_max) continue;
            const int b = std::min(nb - 1, static_cast<int>((std::log(r) - lr0) / (lr1 - lr0) * nb));
            const Stencil s = stencil(g, i, j);
            const std::size_t k = g.index(i, j);
            const cd g1 = i == 0 ? cd(0.0) : (U[s.right] - U[s.left]) / (2.0 * g.h);
            const cd g2 = (U[s.up] - U[s.down]) / (2.0 * g.h);
            const cd u = U[k];
            const double m = std::abs(u);
            const double gs = std::hypot(std::real(std::conj(u) * g1), std::real(std::conj(u) * g2)) / m;
            const double gp = std::hypot(std::imag(std::conj(u) * g1), std::imag(std::conj(u) * g2)) / (m * m);
            mS[b] = std::max(mS[b], gs);
            mP[b] = std::max(mP[b], gp);
            mU[b] = std::max(mU[b], std::abs(u - 1.0));
            rsum[b] += r;
            cnt[b] += 1.0;
        }
    std::vector<double> lr, lS, lP, lU;
    for (int b = 0; b < nb; ++b) {
        if (cnt[b] == 0.0 || mS[b] <= 0.0 || mP[b] <= 0.0 || mU[b] <= 0.0) continue;
        lr.push_back(std::log(rsum[b] / cnt[b]));
        lS.push_back(std::log(mS[b]));
        lP.push_back(std::log(mP[b]));
        lU.push_back(std::log(mU[b]));
    }
    if (lr.size() < 5) throw InsufficientRange("decay_fit: fewer than five populated radial bins");
    de.grad_S = fit_slope(lr, lS);
    de.grad_phi = fit_slope(lr, lP);
    de.U_minus_1 = fit_slope(lr, lU);
    return de;
}

}  // namespace gpob
