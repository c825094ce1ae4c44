// Acceptance run: criteria 1-12, one pass/fail line each.
// Usage: gpob_acceptance [N ...]   (no arguments runs all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gpob/errors.hpp"
#include "gpob/nucleation.hpp"

using namespace gpob;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) mx += std::log(x[k]), my += std::log(y[k]);
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
        sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
    }
    return sxy / sxx;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::shared_ptr<const Grid2D> disk_grid(std::size_t nr, std::size_t nt, double r_far, bool cluster) {
    AngularClustering cl;
    if (cluster) cl.centers = {0.0, pi};
    return std::make_shared<const Grid2D>(build_exterior_grid(ObstacleShape::disk(1.0), nr, nt, r_far, 1.05, cl));
}

const VortexProfile& profile() {
    static const VortexProfile p = solve_gl_profile();
    return p;
}

const FlowSolution& disk_flow_02() {
    static const FlowSolution f = solve_potential_flow(disk_grid(128, 256, 20.0, false), {0.2, 0.05});
    return f;
}

/// Branch from c = 0.06 on L = 40, h = 0.2 (reused by criteria 10-12).
const WaveBranch& diagnostic_branch() {
    static const WaveBranch br = [] {
        ContinuationConfig cc;
        cc.initial_step = 0.03;
        cc.max_step = 0.03;
        cc.min_step = 0.005;
        return continuation_in_c(0.06, 1.3, HalfPlaneGrid::make(40.0, 40.0, 0.2), profile(), cc);
    }();
    return br;
}

// RK4 shooting for S'' = −S'/r + S/r² − S(1 − S²), S ≈ a r − a r³/8 near 0.
int shoot(double a) {
    const double h = 1e-3;
    double r = 1e-3, s = a * r - a * r * r * r / 8, v = a - 3 * a * r * r / 8;
    auto f = [](double r, double s, double v) { return -v / r + s / (r * r) - s * (1 - s * s); };
    while (r < 20.0) {
        const double k1s = v, k1v = f(r, s, v);
        const double k2s = v + 0.5 * h * k1v, k2v = f(r + 0.5 * h, s + 0.5 * h * k1s, v + 0.5 * h * k1v);
        const double k3s = v + 0.5 * h * k2v, k3v = f(r + 0.5 * h, s + 0.5 * h * k2s, v + 0.5 * h * k2v);
        const double k4s = v + h * k3v, k4v = f(r + h, s + h * k3s, v + h * k3v);
        s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
        r += h;
        if (s > 1.0) return 1;
        if (v < 0.0) return -1;
    }
    return 0;
}

Outcome c1_flow_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = disk_grid(128, 256, 40.0, false);
    const double delta = 0.01;
    const FlowSolution s = solve_potential_flow(g, {delta, 0.1});
    double emax = 0, pmax = 0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        const double ex = incompressible_disk_potential(delta, 1.0, g->x1(k), g->x2(k));
        emax = std::max(emax, std::abs(s.phi[k] - ex));
        pmax = std::max(pmax, std::abs(ex));
    }
    double worst_speed = 0;
    for (double th : {0.0, pi}) {
        const std::size_t j = static_cast<std::size_t>(std::lround(th / (2 * pi) * g->n_angular())) % g->n_angular();
        worst_speed = std::max(worst_speed, std::abs(std::sqrt(s.speed2[g->index(0, j)]) / (2 * delta) - 1.0));
    }
    const double t = seconds_since(t0);
    return {emax / pmax <= 3e-4 && worst_speed <= 0.02 && t <= 30,
            fmt("rel Linf %.2e (<= 3e-4), boundary speed dev %.2f%% (<= 2%%), %.1fs (<= 30s)", emax / pmax,
                100 * worst_speed, t)};
}

Outcome c2_sonic_limit() {
    const auto t0 = std::chrono::steady_clock::now();
    ContinuationConfig cc;
    cc.initial_step = 0.05;
    cc.max_step = 0.05;
    cc.min_step = 0.0025;
    const SonicReport r = sonic_continuation(disk_grid(128, 256, 20.0, false), 0.35, cc);
    bool subsonic = true, increasing = true;
    double prev = -1, prev_delta = -1;
    for (const auto& s : r.samples) {
        if (!s.converged) continue;
        subsonic = subsonic && s.max_boundary_speed2 < kSonicSpeed2;
        if (s.delta > prev_delta) {
            increasing = increasing && s.max_boundary_speed2 > prev;
            prev = s.max_boundary_speed2;
            prev_delta = s.delta;
        }
    }
    const double t = seconds_since(t0);
    const bool ok = r.bracketed && r.delta_lo > 0.20 && r.delta_hi < 0.29 && r.delta_hi - r.delta_lo <= 0.005 + 1e-12 &&
                    subsonic && increasing && t <= 300;
    return {ok, fmt("delta* in [%.4f, %.4f] (width %.4f), subsonic %s, increasing %s, %.1fs (<= 300s)", r.delta_lo,
                    r.delta_hi, r.delta_hi - r.delta_lo, subsonic ? "yes" : "no", increasing ? "yes" : "no", t)};
}

Outcome c3_speed_map() {
    const double top = std::abs(local_mach_speed(1.0 / 3.0) - std::sqrt(2.0));
    const double zero = local_mach_speed(0.0);
    bool mono = true;
    double prev = -1;
    for (int k = 0; k <= 1000; ++k) {
        const double v = local_mach_speed(k / 3000.0);
        mono = mono && v > prev;
        prev = v;
    }
    return {top <= 1e-12 && zero == 0.0 && mono,
            fmt("|c(1/3) - sqrt2| = %.1e, c(0) = %g, monotone %s", top, zero, mono ? "yes" : "no")};
}

Outcome c4_boundary_layer() {
    const auto t0 = std::chrono::steady_clock::now();
    const FlowSolution& f = disk_flow_02();
    const std::vector<double> eps{0.2, 0.1, 0.05};
    std::vector<double> sup;
    double rate_ratio = 0;
    for (double e : eps) {
        const BoundaryLayerField L = solve_rho1(f, e);
        double m = 0;
        for (double v : L.rho1) m = std::max(m, std::abs(v));
        sup.push_back(m);
        if (e == 0.05) rate_ratio = L.decay_rate / L.expected_rate;
    }
    const double slope = loglog_slope(eps, sup);
    const double t = seconds_since(t0);
    return {std::abs(rate_ratio - 1) <= 0.15 && std::abs(slope - 1) <= 0.2 && t <= 120,
            fmt("decay rate / (sqrt2 rho/eps) = %.3f (within 15%%), |rho1| slope %.3f (1 +- 0.2), %.1fs (<= 120s)",
                rate_ratio, slope, t)};
}

Outcome c5_vortex_free() {
    const auto t0 = std::chrono::steady_clock::now();
    const FlowSolution& f = disk_flow_02();
    const std::vector<double> eps{0.2, 0.1, 0.05};
    std::vector<double> r2;
    double worst = 0;
    for (double e : eps) {
        const VortexFreeSolution vf = assemble_vortex_free(f, solve_rho1(f, e), e, true);
        r2.push_back(vf.rho2_norm);
        const ResidualReport rep = madelung_residual(*f.grid, vf.rho_eps, vf.phi_eps, e);
        worst = std::max({worst, rep.weighted_norms.at("int_S1"), rep.weighted_norms.at("int_S2")});
    }
    const double slope = loglog_slope(eps, r2);
    const double t = seconds_since(t0);
    return {slope >= 1.5 && worst <= 1e-9 && t <= 300,
            fmt("|rho2| slope %.3f (>= 1.5), Madelung residual %.1e (<= 1e-9), %.1fs (<= 300s)", slope, worst, t)};
}

Outcome c6_gl_profile() {
    double lo = 0.5, hi = 0.7;
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (shoot(mid) > 0 ? hi : lo) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    const VortexProfile& p = profile();
    const bool ok = std::abs(p.slope_at_0 - 0.5827) <= 0.001 && std::abs(oracle - 0.5827) <= 0.001 &&
                    std::abs(p.slope_at_0 - oracle) <= 1e-6 && std::abs(p.far_coefficient - 0.5) <= 0.05;
    return {ok, fmt("slope %.6f, shooting %.6f (0.5827 +- 0.001), far coefficient %.4f (0.5 +- 0.05)", p.slope_at_0,
                    oracle, p.far_coefficient)};
}

Outcome c7_wave_branch() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = HalfPlaneGrid::make(40.0, 40.0, 0.2);
    std::string failed;
    double worst_2cd_lo = 1e9, worst_2cd_hi = -1e9;
    std::optional<TravelingWave> w03;
    for (double c : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}) {
        const auto cl = FarFieldClosure::pair_phase(1.0 / c);
        try {
            TravelingWave w = solve_traveling_wave(c, wave_seed(profile(), 1.0 / c, g, cl), g, default_wave_newton(),
                                                   true, cl);
            worst_2cd_lo = std::min(worst_2cd_lo, 2 * c * w.d_c);
            worst_2cd_hi = std::max(worst_2cd_hi, 2 * c * w.d_c);
            if (c == 0.3) w03 = std::move(w);
        } catch (const Error& e) {
            failed += fmt("%s%.2f", failed.empty() ? "" : ",", c);
        }
    }
    DecayExponents ex{};
    bool decay_ok = false;
    if (w03) {
        ex = decay_fit(*w03);
        decay_ok = ex.grad_S <= -2.5 && ex.grad_phi <= -1.7 && ex.U_minus_1 <= -0.9;
    }
    ContinuationConfig cc;
    cc.initial_step = 0.03;
    cc.max_step = 0.03;
    cc.min_step = 0.005;
    std::string sweep;
    bool end_ok = false;
    try {
        const WaveBranch br = continuation_in_c(0.05, 1.3, g, profile(), cc);
        end_ok = br.status == BranchStatus::BranchEnd && br.c_end_observed < std::sqrt(2.0);
        sweep = fmt("sweep from 0.05 ends at c = %.4f", br.c_end_observed);
    } catch (const Error& e) {
        sweep = std::string("sweep from 0.05: ") + e.kind();
    }
    const WaveBranch& diag = diagnostic_branch();
    const double t = seconds_since(t0);
    const bool oracle_ok = worst_2cd_lo >= 0.8 && worst_2cd_hi <= 1.2;
    return {failed.empty() && oracle_ok && decay_ok && end_ok && t <= 600,
            fmt("no convergence at c = {%s}; 2cd in [%.3f, %.3f] (want [0.8, 1.2]); decay (%.2f, %.2f, %.2f); %s; "
                "diagnostic sweep from 0.06 ends at c = %.4f (%s); %.1fs",
                failed.c_str(), worst_2cd_lo, worst_2cd_hi, ex.grad_S, ex.grad_phi, ex.U_minus_1, sweep.c_str(),
                diag.c_end_observed, diag.termination.c_str(), t)};
}

Outcome c8_nondegeneracy() {
    const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.1);
    const auto cl = FarFieldClosure::pair_phase(1 / 0.3);
    const TravelingWave w =
        solve_traveling_wave(0.3, wave_seed(profile(), 1 / 0.3, g, cl), g, default_wave_newton(), true, cl);
    const SpectralReport r = nondegeneracy_spectrum(w);
    const double h2 = g.h * g.h;
    const bool ok = r.kernel_residual_gauge <= 5 * h2 && r.kernel_residual_translation <= 5 * h2 &&
                    r.smallest_sv_constrained > 10 * std::max(r.kernel_residual_gauge, r.kernel_residual_translation);
    return {ok, fmt("kernel residuals %.2e, %.2e (<= 5h^2 = %.2e), constrained sigma_min %.2e", r.kernel_residual_gauge,
                    r.kernel_residual_translation, 5 * h2, r.smallest_sv_constrained)};
}

Outcome c9_reduced_curve() {
    const double eps = 0.1;
    std::vector<double> ds, ds2;
    for (int k = 1; k <= 10; ++k) {
        ds.push_back(0.3 * k / eps);
        ds2.push_back(0.6 * k / eps);
    }
    const ReducedCurve a = reduced_speed_curve(eps, ds, HalfPlaneGrid::make(120.0, 120.0, 0.25), profile());
    const ReducedCurve b = reduced_speed_curve(eps / 2, ds2, HalfPlaneGrid::make(240.0, 240.0, 0.25), profile());
    const double ratio = b.d_star / a.d_star;
    const bool ok = std::abs(a.interaction_slope + 1) <= 0.15 && a.c1 > 0 && a.c2 > 0 && b.c1 > 0 && b.c2 > 0 &&
                    std::abs(ratio / 2 - 1) <= 0.2;
    return {ok, fmt("slope %.3f (-1 +- 0.15), c1 %.4f, c2 %.4f, d*(eps/2)/d*(eps) = %.3f (2 within 20%%)",
                    a.interaction_slope, a.c1, a.c2, ratio)};
}

/// Cyclic zeros of samples v at angles th by linear interpolation.
std::vector<double> zeros_of(const std::vector<double>& th, const std::vector<double>& v) {
    std::vector<double> z;
    const std::size_t n = v.size();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t m = (k + 1) % n;
        const double t0 = th[k], t1 = m ? th[m] : th[m] + 2 * pi;
        if (v[k] == 0.0) z.push_back(t0);
        else if (v[k] * v[m] < 0) z.push_back(std::fmod(t0 + (t1 - t0) * v[k] / (v[k] - v[m]), 2 * pi));
    }
    return z;
}

double angle_gap(double a, double b) {
    const double d = std::fmod(std::abs(a - b), 2 * pi);
    return std::min(d, 2 * pi - d);
}

Outcome c10_lambda_law() {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps = 0.1;
    const auto g = std::make_shared<const Grid2D>(
        build_exterior_grid(ObstacleShape::ellipse(2.0, 1.0), 128, 512, 20.0, 1.05));
    const FlowSolution f = solve_potential_flow(g, {0.1, eps});
    const VortexFreeSolution vf = assemble_vortex_free(f, solve_rho1(f, eps), eps, false);
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < g->n_angular(); j += 2) cols.push_back(j);
    const ProjectionDiagnostics d = lambda_projections(vf, f, diagnostic_branch().waves, cols);
    const BoundaryExtrema ext = boundary_extrema(f);

    const double cell = 2 * pi / g->n_angular();
    const std::vector<double> z = zeros_of(d.boundary_points, d.lambda1);
    std::size_t matched = 0;
    for (const auto& e : ext.trace.extrema)
        if (std::any_of(z.begin(), z.end(), [&](double t) { return angle_gap(t, e.theta) <= 2 * cell; })) ++matched;
    std::size_t stray = 0;
    for (double t : z)
        if (std::none_of(ext.trace.extrema.begin(), ext.trace.extrema.end(),
                         [&](const Extremum& e) { return angle_gap(t, e.theta) <= 2 * cell; }))
            ++stray;

    std::size_t tested = 0, agree = 0;
    std::vector<double> ratios;
    for (const auto& p : d.points) {
        if (std::abs(p.tangential_derivative) <= 3 * d.noise_floor) continue;
        ++tested;
        if ((p.lambda1 > 0) == (p.tangential_derivative > 0)) ++agree;
        if (p.gram_condition <= 1e3 && std::abs(p.c - p.c_wave) < 0.02)
            ratios.push_back(p.lambda1 / (eps * p.tangential_derivative));
    }
    double spread = std::numeric_limits<double>::infinity();
    double med = 0;
    if (!ratios.empty()) {
        med = median(ratios);
        spread = 0;
        for (double r : ratios) spread = std::max(spread, std::abs(r / med - 1));
    }
    const double t = seconds_since(t0);
    const bool ok = matched == ext.trace.extrema.size() && stray == 0 && agree == tested && d.A0_estimate > 0 &&
                    spread <= 0.25;
    return {ok, fmt("zeros %zu, extrema matched %zu/%zu, stray zeros %zu; sign agreement %zu/%zu; A0 %.3f; "
                    "ratio median %.3g, spread %.2f over %zu points (<= 0.25); %.1fs",
                    z.size(), matched, ext.trace.extrema.size(), stray, agree, tested, d.A0_estimate, med, spread,
                    ratios.size(), t)};
}

Outcome c11_two_solutions() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = disk_grid(128, 256, 20.0, true);
    const FlowSolution f = solve_potential_flow(g, {0.2, 0.1});
    std::vector<double> eps_used, core_dist;
    std::string detail;
    bool ok = true;
    for (double eps : {0.1, 0.15}) {
        const VortexFreeSolution vf = assemble_vortex_free(f, solve_rho1(f, eps), eps, false);
        const NucleationReport r =
            nucleation_report(f, vf, diagnostic_branch().waves, eps, BoundaryCondition::Neumann);
        if (!r.vortex_branch || r.observed_sites.empty()) {
            ok = false;
            detail += fmt("eps %.2f: no vortex branch (%s); ", eps, r.vortex_failure.c_str());
            continue;
        }
        eps_used.push_back(eps);
        core_dist.push_back(r.core_to_boundary);
        if (eps == 0.1) {
            ok = ok && r.distinctness > 1e-2 && r.core_modulus < 0.3 && r.core_to_site <= 5 * eps &&
                 r.vortex_free.min_modulus > 0.6;
            detail += fmt("eps 0.1: L2 distance %.3f (> 1e-2), core |u| %.3f (< 0.3), core to site %.3f (<= 0.5), "
                          "vortex-free min|u| %.3f (> 0.6); ",
                          r.distinctness, r.core_modulus, r.core_to_site, r.vortex_free.min_modulus);
        }
        detail += fmt("eps %.2f: core distance %.4f; ", eps, r.core_to_boundary);
    }
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (eps_used.size() == 2) slope = loglog_slope(eps_used, core_dist);
    const double t = seconds_since(t0);
    ok = ok && std::abs(slope - 1) <= 0.3 && t <= 900;
    return {ok, detail + fmt("distance slope %.3f (1 +- 0.3); %.1fs (<= 900s)", slope, t)};
}

Outcome c12_dirichlet() {
    const double eps = 0.1;
    const auto g = disk_grid(128, 256, 20.0, true);
    const FlowSolution f = solve_potential_flow(g, {0.2, eps});
    const VortexFreeSolution vf = assemble_vortex_free(f, solve_rho1(f, eps), eps, false);
    const NucleationReport r = nucleation_report(f, vf, diagnostic_branch().waves, eps, BoundaryCondition::Dirichlet);
    const auto maxima = boundary_extrema(f).trace.maxima();
    const std::size_t j = maxima.front().index;
    const double b = std::sqrt(f.speed2[g->index(0, j)]);
    const DirichletLayer layer = dirichlet_layer(b, 25.0);
    double worst = 0;
    for (std::size_t i = 0; i < g->n_radial() && g->normal_distance(i, j) <= 5 * eps; ++i) {
        const double s = g->normal_distance(i, j);
        worst = std::max(worst, std::abs(std::abs(r.vortex_free.u[g->index(i, j)]) - layer(s / eps)) / layer.plateau);
    }
    const double tol = default_gp_newton().abs_tol;
    return {worst <= 0.10 && std::abs(r.lambda0) <= 10 * tol,
            fmt("layer deviation %.2f%% (<= 10%%), lambda0 %.1e (<= %.0e)%s", 100 * worst, std::abs(r.lambda0),
                10 * tol, r.vortex_branch ? "" : ", at the vortex-free branch")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, c1_flow_oracle},   {2, c2_sonic_limit},   {3, c3_speed_map},      {4, c4_boundary_layer},
        {5, c5_vortex_free},   {6, c6_gl_profile},    {7, c7_wave_branch},    {8, c8_nondegeneracy},
        {9, c9_reduced_curve}, {10, c10_lambda_law},  {11, c11_two_solutions}, {12, c12_dirichlet},
    };
    std::set<int> only;
    for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));

    int failures = 0;
    for (const auto& [n, run] : criteria) {
        if (!only.empty() && !only.count(n)) continue;
        Outcome o;
        try {
            o = run();
        } catch (const Error& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %2d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
