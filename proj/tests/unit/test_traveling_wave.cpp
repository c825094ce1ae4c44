#include <cmath>

#include "doctest.h"
#include "gpob/errors.hpp"
#include "gpob/traveling_wave.hpp"

using namespace gpob;

namespace {

const VortexProfile& profile() {
    static const VortexProfile p = solve_gl_profile();
    return p;
}

/// c = 0.3 on a 20 × 20 box at h = 0.2.
const TravelingWave& wave_small() {
    static const TravelingWave w = [] {
        const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.2);
        const auto cl = FarFieldClosure::pair_phase(1 / 0.3);
        return solve_traveling_wave(0.3, wave_seed(profile(), 1 / 0.3, g, cl), g, default_wave_newton(), true, cl);
    }();
    return w;
}

double sup_norm(const CVec& v) {
    double m = 0.0;
    for (const auto& z : v) m = std::max(m, std::abs(z));
    return m;
}

}  // namespace

TEST_CASE("constant seed collapses to U = 1") {
    const auto g = HalfPlaneGrid::make(10.0, 10.0, 0.25);
    const CVec one(g.size(), 1.0);
    const auto w = solve_traveling_wave(0.3, one, g, default_wave_newton(), false);
    CHECK(w.vortices.empty());
    CHECK(w.residual_norm == 0.0);
    CHECK(w.newton_iterations == 0);
    for (const auto& z : w.field) CHECK(z == std::complex<double>(1.0, 0.0));
    CHECK_THROWS_AS(solve_traveling_wave(0.3, one, g), VortexEscape);
    CHECK_THROWS_AS(solve_traveling_wave(std::sqrt(2.0), one, g), InvalidArgument);
    CHECK_THROWS_AS(solve_traveling_wave(0.0, one, g), InvalidArgument);
}

TEST_CASE("wave at c = 0.3") {
    const auto& w = wave_small();
    const auto& g = w.grid;
    CHECK(w.residual_norm <= 1e-10);
    CHECK(sup_norm(traveling_wave_residual(g, w.c, w.field)) <= 1e-10);
    REQUIRE(w.vortices.size() == 1);
    CHECK(w.vortices[0].winding == 1);
    CHECK(std::abs(w.vortices[0].position[1]) < 1e-9);
    CHECK(w.d_c == doctest::Approx(w.vortices[0].position[0]));
    CHECK(w.c * w.d_c > 0.9);
    CHECK(w.c * w.d_c < 1.2);
    CHECK(w.momentum < 0.0);

    SUBCASE("reflection symmetry in y2") {
        double err = 0.0;
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j < g.n2; ++j)
                err = std::max(err, std::abs(w.field[g.index(i, j)] - std::conj(w.field[g.index(i, g.n2 - 1 - j)])));
        CHECK(err < 1e-12);
    }
    SUBCASE("amplitude and phase split") {
        for (std::size_t k = 0; k < g.size(); k += 37) {
            CHECK(w.S[k] == doctest::Approx(std::abs(w.field[k])));
            CHECK(std::abs(std::polar(w.S[k], w.phi[k]) - w.field[k]) < 1e-12);
        }
    }
    SUBCASE("gauge orbit") {
        const auto r0 = traveling_wave_residual(g, w.c, w.field);
        for (double alpha : {0.4, 2.0, -1.3}) {
            CVec rot(w.field);
            const auto e = std::polar(1.0, alpha);
            for (auto& z : rot) z *= e;
            const auto r1 = traveling_wave_residual(g, w.c, rot);
            double err = 0.0;
            for (std::size_t k = 0; k < r0.size(); ++k) err = std::max(err, std::abs(std::abs(r1[k]) - std::abs(r0[k])));
            CHECK(err <= 1e-12);
        }
    }
    SUBCASE("translation in y2") {
        CVec shifted(w.field);
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 0; j + 1 < g.n2; ++j) shifted[g.index(i, j)] = w.field[g.index(i, j + 1)];
        const auto r0 = traveling_wave_residual(g, w.c, w.field);
        const auto r1 = traveling_wave_residual(g, w.c, shifted);
        double err = 0.0;
        for (std::size_t i = 0; i + 2 < g.n1; ++i)
            for (std::size_t j = 2; j + 3 < g.n2; ++j)
                err = std::max(err, std::abs(r1[g.index(i, j)] - r0[g.index(i, j + 1)]));
        CHECK(err <= 1e-12);
    }
}

TEST_CASE("discretization Jacobian") {
    const auto g = HalfPlaneGrid::make(8.0, 8.0, 0.25);
    const auto cl = FarFieldClosure::pair_phase(2.5);
    CVec U = wave_seed(profile(), 2.5, g, cl);
    for (std::size_t k = 0; k < U.size(); ++k) U[k] *= std::polar(1.0 + 0.05 * std::sin(0.37 * k), 0.1 * std::cos(0.11 * k));
    for (bool reflect : {false, true}) {
        const TravelingWaveDiscretization disc(g, 0.4, cl, reflect);
        const Vec x = disc.pack(U);
        const double err = jacobian_consistency([&](const Vec& v) { return disc.residual(v); },
                                                [&](const Vec& v) { return disc.jacobian(v); }, x);
        CHECK(err < 1e-6);
    }
    // unpack restores the closure data on the outer edges
    const TravelingWaveDiscretization disc(g, 0.4, cl);
    const CVec back = disc.unpack(disc.pack(U));
    CHECK(back[g.index(g.n1 - 1, 3)] == cl.value(g.y1(g.n1 - 1), g.y2(3)));
    CHECK(back[g.index(4, 0)] == cl.value(g.y1(4), g.y2(0)));
    CHECK(back[g.index(5, 7)] == U[g.index(5, 7)]);
    // linearized operator against the matrix on a full-size direction
    CVec z(g.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = {std::sin(0.3 * k), std::cos(0.7 * k)};
    for (std::size_t k = 0; k < z.size(); ++k)
        if (disc.slot(k) == TravelingWaveDiscretization::npos) z[k] = 0.0;
    const Vec Jz = disc.jacobian(disc.pack(U)) * disc.pack(z);
    const CVec Lz = linearized_apply(g, 0.4, U, z);
    double err = 0.0;
    for (std::size_t s = 0; s < disc.n_unknowns(); s += 2)
        err = std::max(err, std::abs(std::complex<double>(Jz[s], Jz[s + 1]) - Lz[disc.node(s)]));
    CHECK(err < 1e-10);
}

TEST_CASE("far-field closure") {
    CHECK(FarFieldClosure::unit().value(3.0, -2.0) == std::complex<double>(1.0, 0.0));
    const auto cl = FarFieldClosure::pair_phase(4.0);
    for (double t = 0.0; t < 6.0; t += 0.7) {
        const double y1 = 30 * std::cos(t), y2 = 30 * std::sin(t);
        CHECK(std::abs(cl.value(y1, y2)) == doctest::Approx(1.0));
        CHECK(cl.value(y1, y2) == cl.value(-y1, y2));
        CHECK(std::abs(cl.value(y1, -y2) - std::conj(cl.value(y1, y2))) < 1e-14);
    }
}

TEST_CASE("short branch in c") {
    const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.2);
    ContinuationConfig cc;
    cc.initial_step = 0.05;
    cc.max_step = 0.05;
    cc.min_step = 0.005;
    const auto br = continuation_in_c(0.3, 0.45, g, profile(), cc);
    CHECK(br.status == BranchStatus::Completed);
    REQUIRE(br.waves.size() >= 3);
    CHECK(br.waves.back().c == doctest::Approx(0.45));
    for (std::size_t k = 1; k < br.waves.size(); ++k) {
        CHECK(br.waves[k].d_c < br.waves[k - 1].d_c);
        CHECK(br.waves[k].momentum > br.waves[k - 1].momentum);
        CHECK(br.waves[k].residual_norm <= 1e-10);
    }
    CHECK(br.small_c_bound > 0.9);
    CHECK(br.small_c_bound < 1.2);

    CHECK_THROWS_AS(continuation_in_c(0.4, 0.3, g, profile(), cc), InvalidArgument);
    NewtonConfig starved = default_wave_newton();
    starved.max_iters = 1;
    CHECK_THROWS_AS(continuation_in_c(0.3, 0.4, g, profile(), cc, starved), SeedFailure);
}

TEST_CASE("branch ends below the sound speed") {
    const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.2);
    ContinuationConfig cc;
    cc.initial_step = 0.1;
    cc.max_step = 0.1;
    cc.min_step = 0.005;
    const auto br = continuation_in_c(0.5, 1.3, g, profile(), cc);
    CHECK(br.status == BranchStatus::BranchEnd);
    CHECK(br.c_end_observed < std::sqrt(2.0));
    CHECK(br.c_failed > br.c_end_observed);
    CHECK(br.c_failed - br.c_end_observed <= 0.0051);
    for (const auto& w : br.waves) CHECK(w.vortices.size() == 1);
}

TEST_CASE("nondegeneracy at c = 0.3") {
    const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.1);
    const auto cl = FarFieldClosure::pair_phase(1 / 0.3);
    const auto w = solve_traveling_wave(0.3, wave_seed(profile(), 1 / 0.3, g, cl), g, default_wave_newton(), true, cl);
    const auto rep = nondegeneracy_spectrum(w);
    const double h2 = g.h * g.h;
    CHECK(rep.kernel_residual_gauge <= 5 * h2);
    CHECK(rep.kernel_residual_gauge < 1e-10);
    CHECK(rep.kernel_residual_translation <= 5 * h2);
    CHECK(rep.smallest_sv_constrained > 0.0);
    CHECK(rep.smallest_sv_constrained > 10 * rep.kernel_residual_gauge);
    CHECK(rep.smallest_sv_constrained > 10 * rep.kernel_residual_translation);
    CHECK(rep.smallest_sv <= rep.smallest_sv_constrained * (1 + 1e-6));
}

TEST_CASE("far-field decay at c = 0.3") {
    const auto g = HalfPlaneGrid::make(40.0, 40.0, 0.2);
    const auto cl = FarFieldClosure::pair_phase(1 / 0.3);
    const auto w = solve_traveling_wave(0.3, wave_seed(profile(), 1 / 0.3, g, cl), g, default_wave_newton(), true, cl);
    const auto e = decay_fit(w);
    CHECK(e.grad_S <= -2.5);
    CHECK(e.grad_phi <= -1.7);
    CHECK(e.U_minus_1 <= -0.9);
    CHECK(e.r_min == doctest::Approx(2 * w.d_c));
    CHECK_THROWS_AS(decay_fit(wave_small()), InsufficientRange);
}

TEST_CASE("reduced speed curve") {
    const auto& p = profile();
    const double eps = 0.1;
    std::vector<double> ds;
    for (int k = 1; k <= 10; ++k) ds.push_back(0.3 * k / eps);
    const auto g1 = HalfPlaneGrid::make(120.0, 120.0, 0.25);
    const auto rc = reduced_speed_curve(eps, ds, g1, p);
    CHECK(rc.c1 > 0.0);
    CHECK(rc.c2 > 0.0);
    CHECK(rc.fit_residual <= 0.1);
    CHECK(std::abs(rc.interaction_slope + 1.0) <= 0.15);
    for (std::size_t k = 0; k < ds.size(); ++k)
        CHECK(rc.c_proj[k] == doctest::Approx(eps * rc.speed_coeff[k] - rc.interaction[k]));
    CHECK(projected_speed(eps, ds[3], g1, p) == doctest::Approx(rc.c_proj[3]));

    // c_proj increases through its root with slope close to c₂/d*²
    const double dd = 0.05 * rc.d_star;
    const double slope =
        (projected_speed(eps, rc.d_star + dd, g1, p) - projected_speed(eps, rc.d_star - dd, g1, p)) / (2 * dd);
    CHECK(slope > 0.0);
    CHECK(std::abs(slope / (rc.c2 / (rc.d_star * rc.d_star)) - 1.0) <= 0.3);

    // halving ε moves the root out like 1/ε
    const auto g2 = HalfPlaneGrid::make(240.0, 240.0, 0.25);
    CHECK(projected_speed(eps / 2, rc.d_star, g2, p) < 0.0);
    CHECK(projected_speed(eps / 2, 3 * rc.d_star, g2, p) > 0.0);
    std::vector<double> ds2;
    for (double d : ds) ds2.push_back(2 * d);
    const auto rc2 = reduced_speed_curve(eps / 2, ds2, g2, p);
    CHECK(std::abs(rc2.d_star / rc.d_star - 2.0) <= 0.4);

    CHECK_THROWS_AS(reduced_speed_curve(0.0, ds, g1, p), InvalidArgument);
    CHECK_THROWS_AS(reduced_speed_curve(eps, {10.0}, g1, p), InvalidArgument);
}
