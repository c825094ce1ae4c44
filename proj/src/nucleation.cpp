#include "gpob/nucleation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gpob/errors.hpp"
#include "gpob/parallel.hpp"

namespace gpob {

namespace {

using cd = std::complex<double>;

std::size_t ring_of(const Grid2D& g, std::size_t k) { return k / g.n_angular(); }

bool dirichlet_node(const GPDiscretization& d, std::size_t k) {
    const std::size_t i = ring_of(*d.grid, k);
    return i + 1 == d.grid->n_radial() || (d.bc == BoundaryCondition::Dirichlet && i == 0);
}

double angular_distance(double a, double b) {
    const double two_pi = 2.0 * std::numbers::pi;
    double d = std::fmod(std::abs(a - b), two_pi);
    return std::min(d, two_pi - d);
}

/// Cumulative boundary arc length per column (arc[0] = 0) and the perimeter.
std::pair<Vec, double> arc_table(const Grid2D& g) {
    const std::size_t nj = g.n_angular();
    Vec arc(nj, 0.0);
    for (std::size_t j = 1; j < nj; ++j) arc[j] = arc[j - 1] + g.boundary_arc(j - 1);
    return {arc, arc.back() + g.boundary_arc(nj - 1)};
}

int ring_winding(const Grid2D& g, const CVec& u, std::size_t i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < g.n_angular(); ++j)
        sum += std::arg(u[g.index(i, g.jp(j))] * std::conj(u[g.index(i, j)]));
    return static_cast<int>(std::lround(sum / (2.0 * std::numbers::pi)));
}

/// ∇ of a complex nodal field.
std::pair<CVec, CVec> complex_gradient(const Grid2D& g, const CVec& f) {
    Vec re(f.size()), im(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        re[k] = f[k].real();
        im[k] = f[k].imag();
    }
    const VectorField gr = gradient(g, re), gi = gradient(g, im);
    CVec d1(f.size()), d2(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        d1[k] = {gr.c1[k], gi.c1[k]};
        d2[k] = {gr.c2[k], gi.c2[k]};
    }
    return {d1, d2};
}

double boundary_distance(const Grid2D& g, const Vec2& p) {
    double best = 1e300;
    for (std::size_t j = 0; j < g.n_angular(); ++j) {
        const std::size_t k = g.index(0, j);
        best = std::min(best, std::hypot(p[0] - g.x1(k), p[1] - g.x2(k)));
    }
    return best;
}

}  // namespace

std::string to_string(BoundaryCondition bc) { return bc == BoundaryCondition::Neumann ? "neumann" : "dirichlet"; }

BoundaryCondition boundary_condition_from_string(const std::string& s) {
    if (s == "neumann") return BoundaryCondition::Neumann;
    if (s == "dirichlet") return BoundaryCondition::Dirichlet;
    throw InvalidArgument("unknown boundary condition '" + s + "'");
}

GPDiscretization::GPDiscretization(const FlowSolution& flow, double eps, BoundaryCondition bc_)
    : grid(flow.grid), epsilon(eps), bc(bc_), phi(flow.phi) {
    if (!grid) throw InvalidArgument("flow solution has no grid");
    if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
    const Grid2D& g = *grid;
    const VectorField gp = gradient(g, phi);
    grad1 = gp.c1;
    grad2 = gp.c2;
    lap = laplacian(g, phi);
    speed2.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) speed2[k] = grad1[k] * grad1[k] + grad2[k] * grad2[k];
    far.resize(g.n_angular());
    for (std::size_t j = 0; j < g.n_angular(); ++j) far[j] = flow.amplitude[g.index(g.n_radial() - 1, j)];
}

Vec GPDiscretization::pack_u(const CVec& u) const {
    if (u.size() != grid->size()) throw InvalidArgument("field size does not match the grid");
    CVec w(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) w[k] = u[k] * std::polar(1.0, -phi[k] / epsilon);
    return interleave(w);
}

CVec GPDiscretization::unpack_u(const Vec& x) const {
    CVec u = deinterleave(x);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] *= std::polar(1.0, phi[k] / epsilon);
    return u;
}

Vec GPDiscretization::residual(const Vec& x) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), nj = g.n_angular();
    Vec re(N), im(N);
    for (std::size_t k = 0; k < N; ++k) {
        re[k] = x[2 * k];
        im[k] = x[2 * k + 1];
    }
    const Vec lre = laplacian(g, re), lim = laplacian(g, im);
    const VectorField gre = gradient(g, re), gim = gradient(g, im);
    const double e2 = epsilon * epsilon;
    Vec r(2 * N);
    for (std::size_t k = 0; k < N; ++k) {
        const cd w(re[k], im[k]);
        cd f;
        if (dirichlet_node(*this, k)) {
            f = ring_of(g, k) == 0 && bc == BoundaryCondition::Dirichlet ? w : w - far[k % nj];
        } else {
            const cd adv = grad1[k] * cd(gre.c1[k], gim.c1[k]) + grad2[k] * cd(gre.c2[k], gim.c2[k]);
            f = e2 * cd(lre[k], lim[k]) + cd(0.0, epsilon) * (2.0 * adv + lap[k] * w) +
                (1.0 - speed2[k] - std::norm(w)) * w;
        }
        r[2 * k] = f.real();
        r[2 * k + 1] = f.imag();
    }
    return r;
}

SparseMatrix GPDiscretization::jacobian(const Vec& x) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    const SparseMatrix L = flux_operator_matrix(g, Vec(N, 1.0));
    const double e2 = epsilon * epsilon;
    TripletBuilder t(2 * N, 2 * N);
    t.reserve(N * 40);
    // complex coefficient a + ib on unknown l in row k
    auto add = [&](std::size_t k, std::size_t l, double a, double b) {
        t.add(2 * k, 2 * l, a);
        t.add(2 * k, 2 * l + 1, -b);
        t.add(2 * k + 1, 2 * l, b);
        t.add(2 * k + 1, 2 * l + 1, a);
    };
    for (std::size_t i = 0; i < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            if (dirichlet_node(*this, k)) {
                add(k, k, 1.0, 0.0);
                continue;
            }
            for (std::size_t p = L.row_ptr()[k]; p < L.row_ptr()[k + 1]; ++p)
                add(k, L.col_idx()[p], e2 * L.values()[p], 0.0);
            const GradientStencil st = gradient_stencil(g, i, j);
            for (int s = 0; s < st.n; ++s)
                add(k, st.node[s], 0.0, 2.0 * epsilon * (grad1[k] * st.w1[s] + grad2[k] * st.w2[s]));
            const double a = x[2 * k], b = x[2 * k + 1];
            add(k, k, 1.0 - speed2[k], epsilon * lap[k]);
            t.add(2 * k, 2 * k, -(3 * a * a + b * b));
            t.add(2 * k, 2 * k + 1, -2 * a * b);
            t.add(2 * k + 1, 2 * k, -2 * a * b);
            t.add(2 * k + 1, 2 * k + 1, -(a * a + 3 * b * b));
        }
    return t.build();
}

CVec gp_residual(const GPDiscretization& disc, const CVec& u) {
    const Vec r = disc.residual(disc.pack_u(u));
    CVec out(u.size(), 0.0);
    for (std::size_t k = 0; k < u.size(); ++k)
        if (!dirichlet_node(disc, k)) out[k] = cd(r[2 * k], r[2 * k + 1]) * std::polar(1.0, disc.phi[k] / disc.epsilon);
    return out;
}

NewtonConfig default_gp_newton() {
    NewtonConfig c;
    c.abs_tol = 1e-9;
    c.max_iters = 40;
    c.linear_kind = LinearSolverKind::DirectLU;
    return c;
}

void check_gp_resolution(const Grid2D& g, double epsilon, std::optional<double> sector, int min_cells) {
    const int rings = cells_within(g, epsilon);
    if (rings < min_cells)
        throw UnderResolved("only " + std::to_string(rings) + " rings within epsilon of the boundary");
    if (!sector) return;
    for (std::size_t j = 0; j < g.n_angular(); ++j)
        if (angular_distance(g.theta(j), *sector) < 0.3 && g.boundary_arc(j) > epsilon / min_cells)
            throw UnderResolved("boundary arc " + std::to_string(g.boundary_arc(j)) +
                                " exceeds epsilon/" + std::to_string(min_cells) + " in the nucleation sector");
}

GPSolution gp_exterior_solve(const FlowSolution& flow, double epsilon, const CVec& seed, BoundaryCondition bc,
                             const NewtonConfig& cfg, std::optional<double> sector) {
    const GPDiscretization disc(flow, epsilon, bc);
    const Grid2D& g = *disc.grid;
    check_gp_resolution(g, epsilon, sector);
    const NewtonResult nr = newton_solve([&](const Vec& x) { return disc.residual(x); },
                                         [&](const Vec& x) { return disc.jacobian(x); }, disc.pack_u(seed), cfg);
    GPSolution s;
    s.grid = disc.grid;
    s.epsilon = epsilon;
    s.delta = flow.delta;
    s.bc = bc;
    s.u = disc.unpack_u(nr.x);
    s.residual_norm = nr.residual_norm;
    s.newton_iterations = nr.iterations;
    const std::size_t i0 = bc == BoundaryCondition::Dirichlet ? 1 : 0;
    s.vortices = detect_vortices(make_lattice(g, i0), s.u);
    s.min_modulus = 1e300;
    for (std::size_t k = g.index(i0, 0); k < g.size(); ++k) s.min_modulus = std::min(s.min_modulus, std::abs(s.u[k]));
    s.far_winding = ring_winding(g, s.u, g.n_radial() - 2);
    return s;
}

CVec dirichlet_seed(const FlowSolution& flow, double epsilon) {
    const Grid2D& g = *flow.grid;
    CVec u(g.size());
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            const double r = flow.amplitude[k];
            const double m = r * std::tanh(r * g.normal_distance(i, j) / (std::numbers::sqrt2 * epsilon));
            u[k] = std::polar(m, flow.phi[k] / epsilon);
        }
    return u;
}

LocalFrame local_frame(const FlowSolution& flow, std::size_t column) {
    const Grid2D& g = *flow.grid;
    if (column >= g.n_angular()) throw InvalidArgument("boundary column out of range");
    LocalFrame f;
    f.column = column;
    f.theta = g.theta(column);
    const std::size_t k = g.index(0, column);
    f.x0 = {g.x1(k), g.x2(k)};
    f.normal = g.boundary_normal(column);
    const Vec2 tau = g.boundary_tangent(column);
    const GradientStencil st = gradient_stencil(g, 0, column);
    double g1 = 0.0, g2 = 0.0;
    for (int s = 0; s < st.n; ++s) {
        g1 += st.w1[s] * flow.phi[st.node[s]];
        g2 += st.w2[s] * flow.phi[st.node[s]];
    }
    f.orientation = g1 * tau[0] + g2 * tau[1] < 0.0 ? -1.0 : 1.0;
    f.flow_dir = {f.orientation * tau[0], f.orientation * tau[1]};
    const double b2 = flow.speed2[k];
    f.b = std::sqrt(b2);
    f.rho_bar = b2 < 1.0 ? std::sqrt(1.0 - b2) : 0.0;
    f.c = b2 < 1.0 ? local_mach_speed(b2) : std::numeric_limits<double>::infinity();
    return f;
}

std::vector<Vec2> frame_coordinates(const Grid2D& g, const LocalFrame& f, double epsilon) {
    const auto [arc, perimeter] = arc_table(g);
    std::vector<Vec2> y(g.size());
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            double t = arc[j] - arc[f.column];
            if (t > 0.5 * perimeter) t -= perimeter;
            if (t <= -0.5 * perimeter) t += perimeter;
            y[g.index(i, j)] = {g.normal_distance(i, j) / epsilon, f.orientation * t / epsilon};
        }
    return y;
}

const TravelingWave& nearest_wave(const std::vector<TravelingWave>& waves, double c, bool* extrapolated,
                                  double tolerance) {
    if (waves.empty()) throw InvalidArgument("no traveling waves available");
    std::size_t best = 0;
    for (std::size_t k = 1; k < waves.size(); ++k)
        if (std::abs(waves[k].c - c) < std::abs(waves[best].c - c)) best = k;
    if (extrapolated) *extrapolated = std::abs(waves[best].c - c) > tolerance;
    return waves[best];
}

VortexSeed seed_vortex_branch(const CVec& base, const FlowSolution& flow, const std::vector<TravelingWave>& waves,
                              std::size_t column, double epsilon) {
    const Grid2D& g = *flow.grid;
    VortexSeed s;
    s.frame = local_frame(flow, column);
    if (!(s.frame.c < std::sqrt(2.0)))
        throw SpeedOutOfRange("local speed " + std::to_string(s.frame.c) + " at theta = " +
                              std::to_string(s.frame.theta) + " is not subsonic");
    const TravelingWave& w = nearest_wave(waves, s.frame.c, &s.extrapolated_seed);
    s.c_used = w.c;
    const auto y = frame_coordinates(g, s.frame, epsilon);
    const double rb = s.frame.rho_bar;
    s.u.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) s.u[k] = base[k] * sample_wave(w, rb * y[k][0], rb * y[k][1]);
    const double off = epsilon * w.d_c / rb;
    s.predicted_core = {s.frame.x0[0] + off * s.frame.normal[0], s.frame.x0[1] + off * s.frame.normal[1]};
    return s;
}

VortexSeed seed_vortex_branch(const VortexFreeSolution& vf, const FlowSolution& flow,
                              const std::vector<TravelingWave>& waves, std::size_t column) {
    if (vf.grid != flow.grid) throw InvalidArgument("vortex-free solution and flow must share a grid");
    return seed_vortex_branch(vf.u, flow, waves, column, vf.epsilon);
}

std::pair<double, double> a0_parts(const TravelingWave& wave) {
    const HalfPlaneGrid& g = wave.grid;
    const CVec d2 = wave_d2(wave);
    double kinetic = 0.0, moment = 0.0;
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            const std::size_t k = g.index(i, j);
            const double w = (i == 0 ? 0.5 : 1.0) * g.h * g.h;
            const cd U = wave.field[k];
            kinetic += w * std::norm(d2[k]);
            // S(1 − S²)∂₂S = (1 − S²) Re(Ū ∂₂U)
            moment += w * g.y2(j) * (1.0 - std::norm(U)) * (std::conj(U) * d2[k]).real();
        }
    return {kinetic, moment};
}

double a0_quadrature(const TravelingWave& wave, double rho_bar) {
    const auto [k, m] = a0_parts(wave);
    return 2.0 * k + m / (rho_bar * rho_bar);
}

namespace {

struct Projection {
    double lambda0, lambda1, condition;
};

/// Least-squares coefficients of S against Z₀, Z₁ with weights `area`.
Projection project(const CVec& S, const CVec& Z0, const CVec& Z1, const Vec& area) {
    double g00 = 0, g01 = 0, g11 = 0, r0 = 0, r1 = 0;
    for (std::size_t k = 0; k < S.size(); ++k) {
        if (area[k] == 0.0) continue;
        g00 += area[k] * std::norm(Z0[k]);
        g11 += area[k] * std::norm(Z1[k]);
        g01 += area[k] * (Z0[k] * std::conj(Z1[k])).real();
        r0 += area[k] * (S[k] * std::conj(Z0[k])).real();
        r1 += area[k] * (S[k] * std::conj(Z1[k])).real();
    }
    const double tr = g00 + g11, det = g00 * g11 - g01 * g01;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
    Projection p;
    p.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (!(p.condition < 1e12)) throw GramSingular("Gram matrix condition " + std::to_string(p.condition));
    p.lambda0 = (g11 * r0 - g01 * r1) / det;
    p.lambda1 = (g00 * r1 - g01 * r0) / det;
    return p;
}

constexpr double kWeightRadius = 60.0;  ///< |y| beyond which 1/(1 + |y|⁴) < 1e−7

}  // namespace

ProjectionDiagnostics lambda_projections(const VortexFreeSolution& vf, const FlowSolution& flow,
                                         const std::vector<TravelingWave>& waves,
                                         const std::vector<std::size_t>& columns) {
    if (vf.grid != flow.grid) throw InvalidArgument("vortex-free solution and flow must share a grid");
    const Grid2D& g = *flow.grid;
    const std::size_t N = g.size(), nj = g.n_angular();
    const double eps = vf.epsilon;

    Vec log_rho(N);
    for (std::size_t k = 0; k < N; ++k) log_rho[k] = std::log(vf.rho_eps[k]);
    const VectorField glr = gradient(g, log_rho), gphi = gradient(g, vf.phi_eps);
    const VectorField h1 = gradient(g, gphi.c1), h2 = gradient(g, gphi.c2);
    const Vec trace = boundary_values(g, flow.speed2);
    const Vec dtrace = tangential_derivative(g, trace);

    ProjectionDiagnostics out;
    for (std::size_t j = 0; j < nj; ++j)
        out.noise_floor = std::max(out.noise_floor,
                                   std::abs(dtrace[j] - 0.5 * (dtrace[g.jm(j)] + dtrace[g.jp(j)])));

    std::vector<ProjectionPoint> pts(columns.size());
    parallel_for(columns.size(), [&](std::size_t idx) {
        const std::size_t col = columns[idx];
        const LocalFrame f = local_frame(flow, col);
        if (!(f.c < std::sqrt(2.0))) throw SpeedOutOfRange("supersonic boundary point");
        const TravelingWave& wave = nearest_wave(waves, f.c);
        const auto y = frame_coordinates(g, f, eps);
        CVec W(N, 1.0);
        Vec area(N, 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            const double r = std::hypot(y[k][0], y[k][1]);
            if (r > kWeightRadius + 10.0) continue;
            W[k] = sample_wave(wave, f.rho_bar * y[k][0], f.rho_bar * y[k][1]);
            if (r <= kWeightRadius && ring_of(g, k) + 1 < g.n_radial()) area[k] = g.cell_area(k);
        }
        const auto [d1, d2] = complex_gradient(g, W);
        CVec S(N, 0.0), Z0(N, 0.0), Z1(N, 0.0);
        const double rb2 = f.rho_bar * f.rho_bar;
        for (std::size_t k = 0; k < N; ++k) {
            if (area[k] == 0.0) continue;
            // ∇_y = ε∇_x
            const cd w1 = eps * d1[k], w2 = eps * d2[k];
            const double v1 = gphi.c1[k] - f.b * f.flow_dir[0], v2 = gphi.c2[k] - f.b * f.flow_dir[1];
            const double rho2 = vf.rho_eps[k] * vf.rho_eps[k];
            S[k] = 2.0 * eps * (glr.c1[k] * w1 + glr.c2[k] * w2) + cd(0.0, 2.0) * (v1 * w1 + v2 * w2) +
                   (rho2 - rb2) * W[k] * (1.0 - std::norm(W[k]));
            const double r2 = y[k][0] * y[k][0] + y[k][1] * y[k][1];
            const double wt = 1.0 / (1.0 + r2 * r2);
            Z0[k] = cd(0.0, 1.0) * W[k] * wt;
            Z1[k] = (f.flow_dir[0] * w1 + f.flow_dir[1] * w2) * wt;
        }
        const Projection p = project(S, Z0, Z1, area);
        double p1 = 0.0, strain = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            if (area[k] == 0.0) continue;
            const cd z1 = eps * (f.flow_dir[0] * d1[k] + f.flow_dir[1] * d2[k]);
            const cd n1 = eps * (f.normal[0] * d1[k] + f.normal[1] * d2[k]);
            p1 += area[k] * (S[k] * std::conj(z1)).real();
            strain += area[k] * y[k][0] * (cd(0.0, 1.0) * n1 * std::conj(z1)).real();
        }
        const std::size_t k0 = g.index(0, col);
        const double phi_nn = f.normal[0] * (h1.c1[k0] * f.normal[0] + h1.c2[k0] * f.normal[1]) +
                              f.normal[1] * (h2.c1[k0] * f.normal[0] + h2.c2[k0] * f.normal[1]);
        const auto [K, M] = a0_parts(wave);
        ProjectionPoint& pt = pts[idx];
        pt.column = col;
        pt.theta = f.theta;
        pt.c = f.c;
        pt.c_wave = wave.c;
        pt.lambda0 = p.lambda0;
        pt.lambda1 = f.orientation * p.lambda1;
        pt.tangential_derivative = dtrace[col];
        pt.a0 = a0_quadrature(wave, f.rho_bar);
        pt.gram_condition = p.condition;
        pt.p1 = f.orientation * p1 / (eps * eps);
        pt.p1_asymptotic = -eps * dtrace[col] * (K + M) / rb2;
        pt.p1_strain = f.orientation * 2.0 * eps * phi_nn * strain / (eps * eps);
    });
    std::vector<double> a0s;
    for (const auto& pt : pts) {
        a0s.push_back(pt.a0);
        out.points.push_back(pt);
        out.boundary_points.push_back(pt.theta);
        out.lambda0.push_back(pt.lambda0);
        out.lambda1.push_back(pt.lambda1);
        out.tangential_derivative.push_back(pt.tangential_derivative);
    }
    if (!a0s.empty()) {
        std::nth_element(a0s.begin(), a0s.begin() + a0s.size() / 2, a0s.end());
        out.A0_estimate = a0s[a0s.size() / 2];
    }
    return out;
}

double lambda0_at_solution(const GPSolution& sol, const FlowSolution& flow, std::size_t column) {
    const Grid2D& g = *sol.grid;
    const GPDiscretization disc(flow, sol.epsilon, sol.bc);
    const CVec R = gp_residual(disc, sol.u);
    const LocalFrame f = local_frame(flow, column);
    const auto y = frame_coordinates(g, f, sol.epsilon);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double r2 = y[k][0] * y[k][0] + y[k][1] * y[k][1];
        const double wt = 1.0 / (1.0 + r2 * r2);
        const cd z0 = cd(0.0, 1.0) * sol.u[k] * wt;
        num += g.cell_area(k) * (R[k] * std::conj(z0)).real();
        den += g.cell_area(k) * std::norm(z0);
    }
    return den > 0.0 ? num / den : 0.0;
}

double l2_distance(const Grid2D& g, const CVec& a, const CVec& b) {
    if (a.size() != g.size() || b.size() != g.size()) throw InvalidArgument("field size does not match the grid");
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += g.cell_area(k) * std::norm(a[k] - b[k]);
    return std::sqrt(s);
}

NucleationReport nucleation_report(const FlowSolution& flow, const VortexFreeSolution& vf,
                                   const std::vector<TravelingWave>& waves, double epsilon, BoundaryCondition bc,
                                   const NewtonConfig& cfg) {
    if (vf.grid != flow.grid) throw InvalidArgument("vortex-free solution and flow must share a grid");
    const Grid2D& g = *flow.grid;
    NucleationReport rep;
    rep.epsilon = epsilon;
    rep.delta = flow.delta;
    rep.bc = bc;
    const CVec free_seed = bc == BoundaryCondition::Neumann ? vf.u : dirichlet_seed(flow, epsilon);
    rep.vortex_free = gp_exterior_solve(flow, epsilon, free_seed, bc, cfg);

    const BoundaryExtrema ext = boundary_extrema(flow);
    rep.predicted_sites = ext.trace.extrema;
    const auto maxima = ext.trace.maxima();
    if (ext.trace.is_constant || maxima.empty()) {
        rep.degenerate = true;
        rep.lambda0 = lambda0_at_solution(rep.vortex_free, flow, 0);
        return rep;
    }
    const std::size_t column = maxima.front().index;
    try {
        rep.seed = seed_vortex_branch(rep.vortex_free.u, flow, waves, column, epsilon);
        rep.vortex_branch = gp_exterior_solve(flow, epsilon, rep.seed->u, bc, cfg, rep.seed->frame.theta);
    } catch (const Error& e) {
        rep.vortex_failure = e.what();
    }
    if (!rep.vortex_branch) {
        rep.lambda0 = lambda0_at_solution(rep.vortex_free, flow, column);
        return rep;
    }
    const GPSolution& vb = *rep.vortex_branch;
    rep.distinctness = l2_distance(g, rep.vortex_free.u, vb.u);
    rep.observed_sites = vb.vortices;
    rep.lambda0 = lambda0_at_solution(vb, flow, column);
    double best = 1e300;
    for (const auto& v : vb.vortices) {
        const double d = std::hypot(v.position[0] - rep.seed->predicted_core[0],
                                    v.position[1] - rep.seed->predicted_core[1]);
        if (d < best) {
            best = d;
            rep.core_to_site = d;
            rep.core_modulus = v.core_min;
            rep.core_to_boundary = boundary_distance(g, v.position);
        }
    }
    return rep;
}

}  // namespace gpob
