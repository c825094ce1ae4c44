#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gpob/errors.hpp"
#include "gpob/nucleation.hpp"

using namespace gpob;

namespace {

using cd = std::complex<double>;

std::shared_ptr<const Grid2D> disk_grid(std::size_t nr, std::size_t nt, double stretch) {
    AngularClustering cl;
    cl.centers = {0.0, std::numbers::pi};
    return std::make_shared<const Grid2D>(build_exterior_grid(ObstacleShape::disk(1.0), nr, nt, 20.0, stretch, cl));
}

const FlowSolution& disk_flow() {
    static const FlowSolution f = solve_potential_flow(disk_grid(128, 256, 1.05), {0.2, 0.1});
    return f;
}

const VortexFreeSolution& disk_vortex_free() {
    static const VortexFreeSolution vf = [] {
        const auto& f = disk_flow();
        return assemble_vortex_free(f, solve_rho1(f, 0.1), 0.1, false);
    }();
    return vf;
}

const std::vector<TravelingWave>& waves() {
    static const std::vector<TravelingWave> w = [] {
        const auto g = HalfPlaneGrid::make(20.0, 20.0, 0.2);
        const auto cl = FarFieldClosure::pair_phase(1 / 0.3);
        const auto p = solve_gl_profile();
        return std::vector<TravelingWave>{
            solve_traveling_wave(0.3, wave_seed(p, 1 / 0.3, g, cl), g, default_wave_newton(), true, cl)};
    }();
    return w;
}

}  // namespace

TEST_CASE("boundary condition names") {
    CHECK(boundary_condition_from_string(to_string(BoundaryCondition::Neumann)) == BoundaryCondition::Neumann);
    CHECK(boundary_condition_from_string("dirichlet") == BoundaryCondition::Dirichlet);
    CHECK_THROWS_AS(boundary_condition_from_string("robin"), InvalidArgument);
}

TEST_CASE("delta = 0 with seed 1 is exactly u = 1") {
    const auto g = disk_grid(48, 64, 1.08);
    const auto f = solve_potential_flow(g, {0.0, 0.1});
    const auto s = gp_exterior_solve(f, 0.5, CVec(g->size(), 1.0), BoundaryCondition::Neumann);
    CHECK(s.newton_iterations == 0);
    CHECK(s.residual_norm == 0.0);
    CHECK(s.vortices.empty());
    for (const auto& z : s.u) CHECK(z == cd(1.0, 0.0));
}

TEST_CASE("GP Jacobian matches finite differences") {
    const auto g = disk_grid(24, 32, 1.15);
    const auto f = solve_potential_flow(g, {0.15, 0.1});
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-0.2, 0.2);
    for (auto bc : {BoundaryCondition::Neumann, BoundaryCondition::Dirichlet}) {
        const GPDiscretization d(f, 0.3, bc);
        Vec x = d.pack_u(dirichlet_seed(f, 0.3));
        for (auto& v : x) v += U(rng);
        const double err = jacobian_consistency([&](const Vec& y) { return d.residual(y); },
                                                [&](const Vec& y) { return d.jacobian(y); }, x);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("pack and unpack are inverse") {
    const auto g = disk_grid(16, 32, 1.2);
    const auto f = solve_potential_flow(g, {0.1, 0.1});
    const GPDiscretization d(f, 0.2, BoundaryCondition::Neumann);
    const CVec u = dirichlet_seed(f, 0.2);
    const CVec back = d.unpack_u(d.pack_u(u));
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(std::abs(back[k] - u[k]) < 1e-14);
    CHECK_THROWS_AS(d.pack_u(CVec(3)), InvalidArgument);
}

TEST_CASE("resolution guard") {
    const auto g = std::make_shared<const Grid2D>(build_exterior_grid(ObstacleShape::disk(1.0), 64, 8, 20.0, 1.05));
    CHECK_THROWS_AS(check_gp_resolution(*g, 0.01), UnderResolved);
    CHECK_NOTHROW(check_gp_resolution(*g, 1.0));
    CHECK_THROWS_AS(check_gp_resolution(*g, 1.0, 0.0), UnderResolved);
    const auto f = solve_potential_flow(g, {0.0, 0.1});
    CHECK_THROWS_AS(gp_exterior_solve(f, 0.01, CVec(g->size(), 1.0), BoundaryCondition::Neumann), UnderResolved);
}

TEST_CASE("vortex-free branch at delta = 0.2, eps = 0.1") {
    const auto& f = disk_flow();
    const auto& vf = disk_vortex_free();
    const auto s = gp_exterior_solve(f, 0.1, vf.u, BoundaryCondition::Neumann);
    CHECK(s.residual_norm <= default_gp_newton().abs_tol);
    CHECK(s.vortices.empty());
    CHECK(s.far_winding == 0);
    const double min_rho = *std::min_element(f.amplitude.begin(), f.amplitude.end());
    CHECK(s.min_modulus >= 0.8 * min_rho);
    const GPDiscretization d(f, 0.1, BoundaryCondition::Neumann);
    double r = 0.0;
    for (const auto& z : gp_residual(d, s.u)) r = std::max(r, std::abs(z));
    CHECK(r < 1e-9);

    SUBCASE("gauge covariance") {
        const double alpha = 0.7;
        FlowSolution rotated = f;
        for (auto& p : rotated.phi) p += 0.1 * alpha;
        CVec seed = vf.u;
        for (auto& z : seed) z *= std::polar(1.0, alpha);
        const auto t = gp_exterior_solve(rotated, 0.1, seed, BoundaryCondition::Neumann);
        CHECK(t.newton_iterations == s.newton_iterations);
        double dev = 0.0;
        for (std::size_t k = 0; k < s.u.size(); ++k)
            dev = std::max(dev, std::abs(t.u[k] - std::polar(1.0, alpha) * s.u[k]));
        CHECK(dev < 1e-10);
    }
}

TEST_CASE("Dirichlet vortex-free branch follows the 1-D layer at delta = 0") {
    const auto g = disk_grid(128, 256, 1.05);
    const auto f = solve_potential_flow(g, {0.0, 0.1});
    const double eps = 0.1;
    const auto s = gp_exterior_solve(f, eps, dirichlet_seed(f, eps), BoundaryCondition::Dirichlet);
    CHECK(s.vortices.empty());
    const auto layer = dirichlet_layer(0.0, 20.0);
    double worst = 0.0;
    for (std::size_t i = 0; g->normal_distance(i, 0) <= 5 * eps; ++i) {
        const double sd = g->normal_distance(i, 0);
        worst = std::max(worst, std::abs(std::abs(s.u[g->index(i, 0)]) - layer(sd / eps)));
    }
    CHECK(worst < 0.05);
    for (std::size_t j = 0; j < g->n_angular(); ++j) CHECK(s.u[g->index(0, j)] == cd(0.0, 0.0));
}

TEST_CASE("local frame and coordinates") {
    const auto& f = disk_flow();
    const auto& g = *f.grid;
    const auto fr = local_frame(f, 0);
    CHECK(fr.x0[0] == doctest::Approx(1.0));
    CHECK(fr.normal[0] == doctest::Approx(1.0));
    CHECK(fr.b * fr.b == doctest::Approx(f.speed2[0]));
    CHECK(fr.c > 0.8);
    CHECK(fr.c < 1.0);
    CHECK(fr.c == doctest::Approx(local_mach_speed(fr.b * fr.b)));
    const auto y = frame_coordinates(g, fr, 0.1);
    CHECK(y[0][0] == 0.0);
    CHECK(y[0][1] == 0.0);
    const std::size_t k = g.index(5, 0);
    CHECK(y[k][0] == doctest::Approx(g.normal_distance(5, 0) / 0.1));
    CHECK(std::abs(y[g.index(0, 1)][1]) == doctest::Approx(g.boundary_arc(0) / 0.1));
    // the two neighbours of column 0 sit on opposite sides
    CHECK(y[g.index(0, 1)][1] * y[g.index(0, g.n_angular() - 1)][1] < 0.0);
    CHECK_THROWS_AS(local_frame(f, g.n_angular()), InvalidArgument);
}

TEST_CASE("nearest wave") {
    const auto& w = waves();
    bool ext = true;
    CHECK(&nearest_wave(w, 0.31, &ext) == &w[0]);
    CHECK_FALSE(ext);
    nearest_wave(w, 0.9, &ext);
    CHECK(ext);
    CHECK_THROWS_AS(nearest_wave({}, 0.3), InvalidArgument);
}

TEST_CASE("vortex seed") {
    const auto& f = disk_flow();
    const auto& vf = disk_vortex_free();
    const auto s = seed_vortex_branch(vf, f, waves(), 0);
    CHECK(s.extrapolated_seed);
    CHECK(s.c_used == doctest::Approx(0.3));
    const auto& g = *f.grid;
    // far from x₀ the seed is u_ε
    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::hypot(g.x1(k) - 1.0, g.x2(k)) > 6.0) CHECK(std::abs(std::abs(s.u[k]) / std::abs(vf.u[k]) - 1.0) < 0.01);
    const auto v = detect_vortices(g, s.u);
    REQUIRE(v.size() == 1);
    CHECK(v[0].winding == 1);
    CHECK(std::abs(v[0].position[1]) < 1e-6);
    CHECK(std::hypot(v[0].position[0] - s.predicted_core[0], v[0].position[1] - s.predicted_core[1]) < 0.05);

    FlowSolution sonic = f;
    sonic.speed2[0] = 0.34;
    CHECK_THROWS_AS(seed_vortex_branch(vf, sonic, waves(), 0), SpeedOutOfRange);
}

TEST_CASE("A0 quadrature is positive") {
    const auto& w = waves()[0];
    const auto [K, M] = a0_parts(w);
    CHECK(K > 0.0);
    CHECK(M > 0.0);
    CHECK(a0_quadrature(w, 0.9) == doctest::Approx(2 * K + M / 0.81));
}

TEST_CASE("disk projections respect the symmetry axes") {
    const auto& f = disk_flow();
    const auto& g = *f.grid;
    const std::size_t nj = g.n_angular();
    const std::vector<std::size_t> cols = {0, 10, nj - 10, nj / 2 - 10, nj / 2 + 10};
    const auto d = lambda_projections(disk_vortex_free(), f, waves(), cols);
    REQUIRE(d.points.size() == cols.size());
    const double scale = std::abs(d.lambda1[1]);
    CHECK(scale > 0.0);
    CHECK(std::abs(d.lambda1[0]) < 1e-8 * std::max(1.0, scale));
    // mirror images across the x₁ axis
    CHECK(d.lambda1[2] == doctest::Approx(-d.lambda1[1]).epsilon(1e-6));
    CHECK(d.tangential_derivative[2] == doctest::Approx(-d.tangential_derivative[1]).epsilon(1e-6));
    CHECK(d.lambda1[3] == doctest::Approx(-d.lambda1[4]).epsilon(1e-6));
    CHECK(d.A0_estimate > 0.0);
    for (const auto& p : d.points) CHECK(p.gram_condition < 1e12);
}

TEST_CASE("L2 distance") {
    const auto g = disk_grid(8, 16, 1.3);
    const CVec a(g->size(), 1.0);
    CHECK(l2_distance(*g, a, a) == 0.0);
    CHECK(l2_distance(*g, a, CVec(g->size(), 0.0)) > 0.0);
    CHECK_THROWS_AS(l2_distance(*g, a, CVec(2)), InvalidArgument);
}
