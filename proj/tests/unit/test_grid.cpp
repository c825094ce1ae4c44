#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "gpob/errors.hpp"
#include "gpob/grid.hpp"

using namespace gpob;
using std::numbers::pi;

namespace {

Vec sample(const Grid2D& g, double (*f)(double, double)) {
    Vec v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) v[k] = f(g.x1(k), g.x2(k));
    return v;
}

double sc(double x, double y) { return std::sin(x) * std::cos(y); }
double r2(double x, double y) { return x * x + y * y; }

double interior_laplacian_error(const Grid2D& g) {
    const Vec f = sample(g, sc);
    const Vec lf = laplacian(g, f);
    double e = 0.0;
    for (std::size_t i = 1; i + 1 < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            e = std::max(e, std::abs(lf[k] + 2.0 * sc(g.x1(k), g.x2(k))));
        }
    return e;
}

double divgrad_error(const Grid2D& g, double (*f)(double, double), double (*lap)(double, double)) {
    const Vec v = sample(g, f);
    const Vec d = divergence(g, gradient(g, v));
    double e = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) e = std::max(e, std::abs(d[k] - lap(g.x1(k), g.x2(k))));
    return e;
}

double four(double, double) { return 4.0; }
double minus2sc(double x, double y) { return -2.0 * sc(x, y); }

}  // namespace

TEST_CASE("disk grid constructor contract") {
    const auto g = build_exterior_grid(ObstacleShape::disk(1.0), 8, 8, 10.0, 1.0);
    CHECK(g.size() == 64);
    for (std::size_t j = 0; j < 8; ++j) CHECK(g.radius(g.index(0, j)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.radius(g.index(7, 3)) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK_THROWS_AS(build_exterior_grid(ObstacleShape::disk(1.0), 8, 8, 1.0, 1.0), BadGeometry);
    CHECK_THROWS_AS(build_exterior_grid(ObstacleShape::ellipse(2.0, 1.0), 8, 8, 1.5, 1.0), BadGeometry);
    CHECK_THROWS_AS(ObstacleShape::disk(-1.0).validate(), BadGeometry);
}

TEST_CASE("ellipse boundary nodes lie on the ellipse") {
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{1.0, 2.0}, std::pair{1.5, 0.7}}) {
        AngularClustering cl;
        cl.centers = {0.4};
        const auto g = build_exterior_grid(ObstacleShape::ellipse(a, b), 20, 37, 12.0, 1.07, cl);
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(0, j);
            const double e = std::pow(g.x1(k) / a, 2) + std::pow(g.x2(k) / b, 2);
            CHECK(std::abs(e - 1.0) < 1e-12);
            // normal is perpendicular to the boundary tangent of the implicit curve
            const Vec2 n = g.boundary_normal(j);
            const double gx = g.x1(k) / (a * a), gy = g.x2(k) / (b * b);
            const double gn = std::hypot(gx, gy);
            CHECK(std::abs(n[0] - gx / gn) < 1e-12);
            CHECK(std::abs(n[1] - gy / gn) < 1e-12);
        }
    }
}

TEST_CASE("geometric radial spacing") {
    const auto g = build_exterior_grid(ObstacleShape::disk(1.0), 64, 16, 10.0, 1.1);
    for (std::size_t i = 1; i + 1 < 64; ++i) {
        const double r0 = g.xi(i - 1), r1 = g.xi(i), r2v = g.xi(i + 1);
        CHECK(std::abs((r2v - r1) / (r1 - r0) - 1.1) < 1e-10);
    }
}

TEST_CASE("angular clustering concentrates nodes near the centre") {
    AngularClustering cl;
    cl.centers = {0.0};
    const auto g = build_exterior_grid(ObstacleShape::disk(1.0), 16, 256, 10.0, 1.0, cl);
    for (std::size_t j = 0; j + 1 < 256; ++j) CHECK(g.theta(j + 1) > g.theta(j));
    CHECK(g.theta(0) == 0.0);
    const double inner = g.theta(1) - g.theta(0);
    const double outer = g.theta(129) - g.theta(128);
    CHECK(outer / inner == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("gradient is exact on linear functions and zero on constants") {
    AngularClustering cl;
    cl.centers = {1.0};
    for (const auto& shape : {ObstacleShape::disk(1.0), ObstacleShape::ellipse(2.0, 1.0)}) {
        const auto g = build_exterior_grid(shape, 24, 48, 15.0, 1.08, cl);
        Vec f(g.size()), c(g.size(), 3.7);
        for (std::size_t k = 0; k < g.size(); ++k) f[k] = g.x2(k);
        const auto d = gradient(g, f);
        const auto z = gradient(g, c);
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(std::abs(d.c1[k]) < 1e-10);
            CHECK(std::abs(d.c2[k] - 1.0) < 1e-10);
            CHECK(z.c1[k] == 0.0);
            CHECK(z.c2[k] == 0.0);
        }
        const Vec dv = divergence(g, VectorField{Vec(g.size(), 2.0), Vec(g.size(), -1.0)});
        for (double v : dv) CHECK(std::abs(v) < 1e-10);
    }
}

TEST_CASE("divergence of gradient: exact on r^2, second order in the interior") {
    const auto g1 = build_exterior_grid(ObstacleShape::disk(1.0), 33, 64, 5.0, 1.0);
    const auto g2 = build_exterior_grid(ObstacleShape::disk(1.0), 65, 128, 5.0, 1.0);
    // quadratics are reproduced by both the central and the one-sided stencils
    CHECK(divgrad_error(g1, r2, four) < 1e-10);
    CHECK(divgrad_error(g2, r2, four) < 1e-10);
    auto err = [](const Grid2D& g, bool interior) {
        const Vec d = divergence(g, gradient(g, sample(g, sc)));
        double e = 0.0;
        for (std::size_t i = 0; i < g.n_radial(); ++i) {
            const bool inner = i >= 2 && i + 3 <= g.n_radial();
            if (inner != interior) continue;
            for (std::size_t j = 0; j < g.n_angular(); ++j) {
                const std::size_t k = g.index(i, j);
                e = std::max(e, std::abs(d[k] - minus2sc(g.x1(k), g.x2(k))));
            }
        }
        return e;
    };
    const auto g3 = build_exterior_grid(ObstacleShape::disk(1.0), 129, 256, 5.0, 1.0);
    CHECK(std::log2(err(g2, true) / err(g3, true)) > 1.9);
    // nested one-sided stencils lose one order on the two outermost rows
    CHECK(std::log2(err(g1, false) / err(g2, false)) > 0.9);
}

TEST_CASE("compact Laplacian converges at second order on interior rows") {
    for (const auto& shape : {ObstacleShape::disk(1.0), ObstacleShape::ellipse(2.0, 1.0)}) {
        const auto g1 = build_exterior_grid(shape, 65, 128, 6.0, 1.0);
        const auto g2 = build_exterior_grid(shape, 129, 256, 6.0, 1.0);
        const auto g3 = build_exterior_grid(shape, 257, 512, 6.0, 1.0);
        const double e1 = interior_laplacian_error(g1), e2 = interior_laplacian_error(g2),
                     e3 = interior_laplacian_error(g3);
        CHECK(std::log2(e1 / e2) > 1.9);
        CHECK(std::log2(e2 / e3) > 1.9);
    }
}

TEST_CASE("pure Neumann flux operator annihilates constants") {
    AngularClustering cl;
    cl.centers = {2.0};
    const auto g = build_exterior_grid(ObstacleShape::ellipse(2.0, 1.0), 20, 40, 10.0, 1.05, cl);
    Vec kappa(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) kappa[k] = 1.0 + 0.3 * std::sin(g.x1(k));
    const auto a = flux_operator_matrix(g, kappa);
    for (std::size_t r = 0; r < a.n_rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) s += a.values()[k];
        CHECK(std::abs(s) < 1e-12);
    }
    // matrix and matrix-free forms agree
    Vec f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = std::cos(g.x2(k)) * g.x1(k);
    const Vec m = a * f, d = flux_operator(g, kappa, f);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(m[k] - d[k]) < 1e-10 * (1 + std::abs(d[k])));
    // area-weighted sum of the conservative form vanishes (discrete divergence theorem)
    const Vec c = flux_operator(g, kappa, f, FluxForm::Conservative);
    double total = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        total += g.cell_area(k) * c[k];
        scale += g.cell_area(k) * std::abs(c[k]);
    }
    CHECK(std::abs(total) < 1e-11 * scale);
}

TEST_CASE("free-stream preserving Laplacian is exact on linear functions") {
    AngularClustering cl;
    cl.centers = {0.5};
    for (const auto& g : {build_exterior_grid(ObstacleShape::disk(1.0), 24, 48, 30.0, 1.1),
                          build_exterior_grid(ObstacleShape::ellipse(1.0, 3.0), 24, 48, 30.0, 1.1, cl)}) {
        Vec f(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) f[k] = 0.7 * g.x1(k) - 1.3 * g.x2(k) + 2.0;
        const Vec lf = laplacian(g, f);
        const Vec lc = laplacian(g, f, FluxForm::Conservative);
        double worst = 0.0, conservative = 0.0;
        for (std::size_t i = 1; i + 1 < g.n_radial(); ++i)
            for (std::size_t j = 0; j < g.n_angular(); ++j) {
                worst = std::max(worst, std::abs(lf[g.index(i, j)]));
                conservative = std::max(conservative, std::abs(lc[g.index(i, j)]));
            }
        CHECK(worst < 1e-11);
        CHECK(conservative > 1e-6);
        Vec kappa(g.size(), 1.0);
        const Vec m = flux_operator_matrix(g, kappa) * f;
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(m[k] - lf[k]) < 1e-11);
    }
}

TEST_CASE("operators commute with the periodic index wrap") {
    const auto g = build_exterior_grid(ObstacleShape::disk(1.0), 12, 32, 6.0, 1.1);
    Vec f(g.size()), fs(g.size());
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 32; ++j) {
            f[g.index(i, j)] = std::sin(3.0 * g.theta(j)) * g.xi(i) + 0.1 * j;
        }
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 32; ++j) fs[g.index(i, j)] = f[g.index(i, g.jp(j))];
    const Vec a = laplacian(g, f), b = laplacian(g, fs);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(b[g.index(i, j)] - a[g.index(i, g.jp(j))]) < 1e-12);
}

TEST_CASE("boundary trace extrema") {
    SUBCASE("cos^2 on 360 nodes") {
        Vec th(360), v(360);
        for (int j = 0; j < 360; ++j) {
            th[j] = 2 * pi * j / 360.0;
            v[j] = std::pow(std::cos(th[j]), 2);
        }
        const auto tr = boundary_trace(th, v);
        const auto mx = tr.maxima(), mn = tr.minima();
        REQUIRE(mx.size() == 2);
        REQUIRE(mn.size() == 2);
        CHECK(mx[0].theta == doctest::Approx(0.0));
        CHECK(mx[1].theta == doctest::Approx(pi));
        CHECK(mn[0].theta == doctest::Approx(pi / 2));
        CHECK(mn[1].theta == doctest::Approx(3 * pi / 2));
    }
    SUBCASE("constant") {
        Vec th(10), v(10, 0.5);
        for (int j = 0; j < 10; ++j) th[j] = j;
        const auto tr = boundary_trace(th, v);
        CHECK(tr.is_constant);
        CHECK(tr.extrema.empty());
    }
    SUBCASE("analytic disk speed trace") {
        const double delta = 0.1;
        Vec th(256), v(256);
        for (int j = 0; j < 256; ++j) {
            th[j] = 2 * pi * j / 256.0;
            v[j] = std::pow(2 * delta * std::cos(th[j]), 2);
        }
        const auto tr = boundary_trace(th, v);
        CHECK(tr.maxima().front().value == doctest::Approx(0.04).epsilon(1e-12));
        CHECK(tr.maxima().front().theta == 0.0);
    }
    SUBCASE("plateaus report their smallest angle, noise is merged by prominence") {
        Vec th(12), v{0, 1, 1, 1, 0, 0, 0.5, 0.5000001, 0.5, 0, 0, 0};
        for (int j = 0; j < 12; ++j) th[j] = j;
        const auto raw = boundary_trace(th, v);
        REQUIRE(raw.maxima().size() == 2);
        CHECK(raw.maxima()[0].index == 1);
        const auto clean = boundary_trace(th, v, 1e-3);
        CHECK(clean.maxima().size() == 2);
        const auto merged = boundary_trace(th, Vec{0, 1, 0.9999, 1.00001, 0, 0, 0, 0, 0, 0, 0, 0}, 1e-3);
        REQUIRE(merged.maxima().size() == 1);
        CHECK(merged.maxima()[0].index == 3);
        CHECK(merged.minima().size() == 1);
    }
}

TEST_CASE("tangential derivative of the disk trace") {
    const auto g = build_exterior_grid(ObstacleShape::disk(1.0), 8, 400, 6.0, 1.0);
    Vec t(400);
    for (std::size_t j = 0; j < 400; ++j) t[j] = std::cos(g.theta(j));
    const Vec d = tangential_derivative(g, t);
    for (std::size_t j = 0; j < 400; ++j) CHECK(std::abs(d[j] + std::sin(g.theta(j))) < 1e-4);
}

TEST_CASE("binary dump round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string p1 = (dir / "gpob_rt_real.f64").string(), p2 = (dir / "gpob_rt_cplx.c64").string();
    Vec v{1.0, -2.5, 1e-300, 3.14159265358979, std::nextafter(1.0, 2.0), -0.0};
    write_field_binary(p1, 2, 3, v);
    const auto d = read_field_binary(p1);
    CHECK(!d.is_complex);
    CHECK(d.n_radial == 2);
    CHECK(d.n_angular == 3);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(std::memcmp(&v[k], &d.real[k], sizeof(double)) == 0);
    CVec c{{1, 2}, {-3, 4e-10}};
    write_field_binary(p2, 1, 2, c);
    const auto e = read_field_binary(p2);
    CHECK(e.is_complex);
    CHECK(e.cplx == c);
    CHECK(std::filesystem::file_size(p1) == 4 + 4 + 4 + 4 + 1 + 6 * 8);
    CHECK_THROWS_AS(read_field_binary((dir / "gpob_missing_file.f64").string()), IoError);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}
