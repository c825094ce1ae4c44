#include "gpob/boundary_layers.hpp"

#include <algorithm>
#include <cmath>

#include "gpob/errors.hpp"
#include "gpob/linear_solver.hpp"

namespace gpob {

int cells_within(const Grid2D& g, double epsilon) {
    int worst = -1;
    for (std::size_t j = 0; j < g.n_angular(); ++j) {
        int c = 0;
        for (std::size_t i = 1; i < g.n_radial() && g.normal_distance(i, j) <= epsilon; ++i) ++c;
        worst = worst < 0 ? c : std::min(worst, c);
    }
    return worst;
}

void check_layer_resolution(const Grid2D& g, double epsilon, int min_cells) {
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    const int c = cells_within(g, epsilon);
    if (c < min_cells)
        throw UnderResolved("only " + std::to_string(c) + " radial cells within eps = " + std::to_string(epsilon) +
                            " of the boundary (need " + std::to_string(min_cells) + ")");
}

NewtonConfig default_layer_newton() {
    NewtonConfig c;
    c.linear_tol = 1e-11;
    c.linear_kind = LinearSolverKind::Auto;
    return c;
}

namespace {

double boundary_normal_derivative(const Grid2D& g, std::span<const double> f, std::size_t j) {
    const std::size_t k = g.index(0, j);
    return diff_q(g, f, 0, j) / std::hypot(g.dx1_dq(k), g.dx2_dq(k));
}

std::size_t first_max_column(const FlowSolution& flow) {
    const Grid2D& g = *flow.grid;
    std::size_t best = 0;
    for (std::size_t j = 1; j < g.n_angular(); ++j)
        if (flow.speed2[j] > flow.speed2[best]) best = j;
    return best;
}

}  // namespace

std::pair<double, double> fit_layer_decay(const FlowSolution& flow, const Vec& rho1, double epsilon, std::size_t j,
                                          LayerRhs source) {
    const Grid2D& g = *flow.grid;
    const double outer_sign = source == LayerRhs::PlusLaplacian ? -1.0 : 1.0;
    const Vec lap = laplacian(g, flow.amplitude);
    std::vector<double> s, y;
    double sign = 0.0;
    for (std::size_t i = 1; i + 1 < g.n_radial() && g.normal_distance(i, j) <= 2.0 * epsilon; ++i) {
        const std::size_t k = g.index(i, j);
        const double a = flow.amplitude[k];
        const double v = rho1[k] - outer_sign * epsilon * epsilon * lap[k] / (2.0 * a * a);
        if (sign == 0.0) sign = v > 0 ? 1.0 : -1.0;
        if (v * sign <= 0.0) break;
        s.push_back(g.normal_distance(i, j));
        y.push_back(std::log(std::abs(v)));
    }
    if (s.size() < 3) throw UnderResolved("fewer than three layer samples for the decay fit");
    const double n = static_cast<double>(s.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t t = 0; t < s.size(); ++t) {
        sx += s[t];
        sy += y[t];
        sxx += s[t] * s[t];
        sxy += s[t] * y[t];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    return {sign * std::exp(icpt), -slope};
}

BoundaryLayerField solve_rho1(const FlowSolution& flow, double epsilon, const NewtonConfig& cfg,
                              std::optional<std::size_t> fit_column, LayerRhs source) {
    if (!flow.grid) throw InvalidArgument("solve_rho1: flow has no grid");
    cfg.validate();
    const Grid2D& g = *flow.grid;
    check_layer_resolution(g, epsilon);
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    const double e2 = epsilon * epsilon;

    const Vec ones(N, 1.0);
    const SparseMatrix L = flux_operator_matrix(g, ones);
    const Vec lap = laplacian(g, flow.amplitude);
    TripletBuilder tb(N, N);
    tb.reserve(L.nnz() + N);
    Vec rhs(N, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        if (k / nj == ni - 1) {
            tb.add(k, k, 1.0);
            continue;
        }
        for (std::size_t p = L.row_ptr()[k]; p < L.row_ptr()[k + 1]; ++p) tb.add(k, L.col_idx()[p], e2 * L.values()[p]);
        tb.add(k, k, -2.0 * flow.amplitude[k] * flow.amplitude[k]);
        // ring 0 carries the Neumann flux datum of ρ^δ, which always enters with −
        rhs[k] = (source == LayerRhs::PlusLaplacian && k >= nj ? e2 : -e2) * lap[k];
    }
    const SparseMatrix A = tb.build();

    BoundaryLayerField out;
    out.grid = flow.grid;
    out.epsilon = epsilon;
    out.source = source;
    if (norm_inf(rhs) == 0.0) {
        out.rho1.assign(N, 0.0);
    } else {
        LinearSolverOptions lo;
        lo.kind = cfg.linear_kind;
        lo.tol = cfg.linear_tol;
        lo.max_iters = cfg.linear_max_iters;
        out.rho1 = solve_sparse_linear(A, rhs, lo);
    }
    Vec r = A * out.rho1;
    for (std::size_t k = 0; k < N; ++k) r[k] = (r[k] - rhs[k]) * (k / nj == ni - 1 ? 1.0 : g.cell_area(k));
    out.residual_norm = norm2(r);

    const std::size_t j = fit_column ? *fit_column : first_max_column(flow);
    if (j >= nj) throw InvalidArgument("fit column out of range");
    out.fit_column = j;
    const double a0 = flow.amplitude[g.index(0, j)];
    out.expected_rate = std::sqrt(2.0) * a0 / epsilon;
    out.expected_amplitude = epsilon * boundary_normal_derivative(g, flow.amplitude, j) / (std::sqrt(2.0) * a0);
    if (flow.delta != 0.0) {
        const auto [amp, rate] = fit_layer_decay(flow, out.rho1, epsilon, j, source);
        out.decay_amplitude = amp;
        out.decay_rate = rate;
    }
    return out;
}

ResidualReport madelung_residual(const Grid2D& g, std::span<const double> rho, std::span<const double> phi,
                                 double epsilon, double sigma) {
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    if (rho.size() != N || phi.size() != N) throw InvalidArgument("madelung_residual: size mismatch");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(sigma > 0.0 && sigma < 1.0)) throw InvalidArgument("sigma must lie in (0,1)");
    ResidualReport rep;
    rep.sigma = sigma;
    const Vec lap = laplacian(g, rho);
    const Vec s2 = grad_squared(g, phi);
    Vec r2(N);
    for (std::size_t k = 0; k < N; ++k) r2[k] = rho[k] * rho[k];
    rep.S2 = flux_operator(g, r2, phi);
    rep.S1.resize(N);
    for (std::size_t k = 0; k < N; ++k) rep.S1[k] = epsilon * epsilon * lap[k] + rho[k] * (1.0 - rho[k] * rho[k] - s2[k]);
    for (std::size_t j = 0; j < nj; ++j) {
        rep.S1[g.index(ni - 1, j)] = 0.0;
        rep.S2[g.index(ni - 1, j)] = 0.0;
    }
    double sup1 = 0, sup2 = 0, l2a = 0, l2b = 0, l4b = 0, wl2 = 0, i1 = 0, i2 = 0;
    const double e2 = epsilon * epsilon;
    for (std::size_t k = 0; k < N; ++k) {
        const double a = g.cell_area(k), dy = a / e2;
        const double v1 = rep.S1[k], v2 = epsilon * rep.S2[k];
        sup1 = std::max(sup1, std::abs(v1));
        sup2 = std::max(sup2, std::abs(rep.S2[k]));
        l2a += dy * v1 * v1;
        l2b += dy * v2 * v2;
        l4b += dy * v2 * v2 * v2 * v2;
        const double y2 = (g.x1(k) * g.x1(k) + g.x2(k) * g.x2(k)) / e2;
        wl2 += dy * std::pow(1.0 + y2, sigma) * v1 * v1;
        i1 += a * a * v1 * v1;
        i2 += a * a * rep.S2[k] * rep.S2[k];
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const double c = rho[g.index(i, j)];
            d2 = std::max(d2, std::abs(rho[g.index(i, g.jp(j))] - 2.0 * c + rho[g.index(i, g.jm(j))]));
            if (i > 0 && i + 1 < ni) d2 = std::max(d2, std::abs(rho[g.index(i + 1, j)] - 2.0 * c + rho[g.index(i - 1, j)]));
        }
    auto& w = rep.weighted_norms;
    w["sup_S1"] = sup1;
    w["sup_S2"] = sup2;
    w["l2_S1"] = std::sqrt(l2a);
    w["l2_eS2"] = std::sqrt(l2b);
    w["l4_eS2"] = std::pow(l4b, 0.25);
    w["wl2_S1"] = std::sqrt(wl2);
    w["int_S1"] = std::sqrt(i1);
    w["int_S2"] = std::sqrt(i2);
    w["d2_rho"] = d2;
    w["star_star_1"] = w["l2_S1"];
    w["star_star_2"] = w["l2_eS2"] + w["l4_eS2"];
    return rep;
}

Vec interleave_fields(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("interleave_fields: size mismatch");
    Vec x(2 * a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        x[2 * k] = a[k];
        x[2 * k + 1] = b[k];
    }
    return x;
}

MadelungFields madelung_from_u(const Grid2D& g, const CVec& u, double epsilon) {
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    if (u.size() != N) throw InvalidArgument("madelung_from_u: size mismatch");
    MadelungFields m;
    m.rho.resize(N);
    m.phi.resize(N);
    for (std::size_t k = 0; k < N; ++k) m.rho[k] = std::abs(u[k]);
    m.phi[0] = epsilon * std::arg(u[0]);
    for (std::size_t j = 1; j < nj; ++j) m.phi[j] = m.phi[j - 1] + epsilon * std::arg(u[j] * std::conj(u[j - 1]));
    for (std::size_t i = 1; i < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j), km = g.index(i - 1, j);
            m.phi[k] = m.phi[km] + epsilon * std::arg(u[k] * std::conj(u[km]));
        }
    return m;
}

namespace {

void split_state(const Vec& x, Vec& rho, Vec& phi) {
    const std::size_t N = x.size() / 2;
    rho.resize(N);
    phi.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        rho[k] = x[2 * k];
        phi[k] = x[2 * k + 1];
    }
}

}  // namespace

Vec MadelungDiscretization::residual(const Vec& state) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    if (state.size() != 2 * N) throw InvalidArgument("Madelung state size mismatch");
    Vec rho, phi;
    split_state(state, rho, phi);
    const Vec s2 = grad_squared(g, phi);
    const double e2 = epsilon * epsilon;
    Vec r(2 * N, 0.0);
    for (std::size_t i = 0; i + 1 < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            const double a = g.cell_area(k);
            double f1 = 0.0, f2 = 0.0;
            visit_faces(g, i, j, [&](std::size_t n, double c) {
                f1 += c * (rho[n] - rho[k]);
                f2 += c * 0.5 * (rho[k] * rho[k] + rho[n] * rho[n]) * (phi[n] - phi[k]);
            });
            if (i > 0) {
                const DefectStencil d = defect_stencil(g, i, j);
                double gr = 0.0, gp = 0.0;
                for (int t = 0; t < 4; ++t) {
                    gr += d.w[t] * rho[d.node[t]];
                    gp += d.w[t] * phi[d.node[t]];
                }
                f1 -= a * gr;
                f2 -= a * rho[k] * rho[k] * gp;
            }
            r[2 * k] = e2 * f1 + a * rho[k] * (1.0 - rho[k] * rho[k] - s2[k]);
            r[2 * k + 1] = f2;
        }
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t k = g.index(ni - 1, j);
        r[2 * k] = rho[k] - rho_far[j];
        r[2 * k + 1] = phi[k] - phi_far[j];
    }
    return r;
}

SparseMatrix MadelungDiscretization::jacobian(const Vec& state) const {
    const Grid2D& g = *grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    Vec rho, phi;
    split_state(state, rho, phi);
    const VectorField grad = gradient(g, phi);
    const double e2 = epsilon * epsilon;
    TripletBuilder tb(2 * N, 2 * N);
    tb.reserve(40 * N);
    for (std::size_t i = 0; i + 1 < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            const std::size_t R1 = 2 * k, R2 = 2 * k + 1;
            const double a = g.cell_area(k);
            double self1 = 0.0, self2 = 0.0, drk = 0.0;
            visit_faces(g, i, j, [&](std::size_t n, double c) {
                tb.add(R1, 2 * n, e2 * c);
                self1 -= e2 * c;
                const double kf = c * 0.5 * (rho[k] * rho[k] + rho[n] * rho[n]);
                tb.add(R2, 2 * n + 1, kf);
                self2 -= kf;
                const double dp = c * (phi[n] - phi[k]);
                tb.add(R2, 2 * n, dp * rho[n]);
                drk += dp * rho[k];
            });
            const double s2 = grad.c1[k] * grad.c1[k] + grad.c2[k] * grad.c2[k];
            tb.add(R1, R1, self1 + a * (1.0 - 3.0 * rho[k] * rho[k] - s2));
            tb.add(R2, R2, self2);
            const GradientStencil gs = gradient_stencil(g, i, j);
            for (int t = 0; t < gs.n; ++t)
                tb.add(R1, 2 * gs.node[t] + 1,
                       -2.0 * a * rho[k] * (grad.c1[k] * gs.w1[t] + grad.c2[k] * gs.w2[t]));
            if (i > 0) {
                const DefectStencil d = defect_stencil(g, i, j);
                double gp = 0.0;
                for (int t = 0; t < 4; ++t) {
                    tb.add(R1, 2 * d.node[t], -e2 * a * d.w[t]);
                    tb.add(R2, 2 * d.node[t] + 1, -a * rho[k] * rho[k] * d.w[t]);
                    gp += d.w[t] * phi[d.node[t]];
                }
                drk -= 2.0 * a * rho[k] * gp;
            }
            tb.add(R2, R1, drk);
        }
    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t k = g.index(ni - 1, j);
        tb.add(2 * k, 2 * k, 1.0);
        tb.add(2 * k + 1, 2 * k + 1, 1.0);
    }
    return tb.build();
}

NewtonConfig default_polish_newton() {
    NewtonConfig c;
    c.abs_tol = 1e-10;
    c.max_iters = 30;
    c.linear_tol = 1e-9;
    c.linear_kind = LinearSolverKind::Auto;
    return c;
}

VortexFreeSolution assemble_vortex_free(const FlowSolution& flow, const BoundaryLayerField& layer, double epsilon,
                                        bool polish, const NewtonConfig& cfg) {
    if (!flow.grid || layer.grid != flow.grid) throw InvalidArgument("flow and layer must share a grid");
    if (layer.epsilon != epsilon) throw InvalidArgument("layer was computed at a different epsilon");
    const Grid2D& g = *flow.grid;
    const std::size_t N = g.size(), ni = g.n_radial(), nj = g.n_angular();
    VortexFreeSolution out;
    out.grid = flow.grid;
    out.epsilon = epsilon;
    out.delta = flow.delta;
    Vec rho1(N);
    for (std::size_t k = 0; k < N; ++k) rho1[k] = flow.amplitude[k] + layer.rho1[k];
    out.rho_eps = rho1;
    out.phi_eps = flow.phi;
    if (polish) {
        MadelungDiscretization disc{flow.grid, epsilon, Vec(nj), Vec(nj)};
        for (std::size_t j = 0; j < nj; ++j) {
            disc.rho_far[j] = rho1[g.index(ni - 1, j)];
            disc.phi_far[j] = flow.phi[g.index(ni - 1, j)];
        }
        const NewtonResult nr = newton_solve([&](const Vec& x) { return disc.residual(x); },
                                             [&](const Vec& x) { return disc.jacobian(x); },
                                             interleave_fields(rho1, flow.phi), cfg);
        split_state(nr.x, out.rho_eps, out.phi_eps);
        out.residual_norm = nr.residual_norm;
        out.newton_iterations = nr.iterations;
        out.polished = true;
    } else {
        const MadelungDiscretization disc{flow.grid, epsilon, Vec(nj, 0.0), Vec(nj, 0.0)};
        Vec r = disc.residual(interleave_fields(rho1, flow.phi));
        for (std::size_t j = 0; j < nj; ++j) r[2 * g.index(ni - 1, j)] = r[2 * g.index(ni - 1, j) + 1] = 0.0;
        out.residual_norm = norm2(r);
    }
    const double min_flow = *std::min_element(flow.amplitude.begin(), flow.amplitude.end());
    const double min_eps = *std::min_element(out.rho_eps.begin(), out.rho_eps.end());
    if (min_eps < 0.5 * min_flow)
        throw VortexContamination("min rho_eps = " + std::to_string(min_eps) + " below half the flow minimum");
    out.u.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        out.rho2_norm = std::max(out.rho2_norm, std::abs(out.rho_eps[k] - rho1[k]));
        out.phi2_norm = std::max(out.phi2_norm, std::abs(out.phi_eps[k] - flow.phi[k]) / epsilon);
        out.u[k] = std::polar(out.rho_eps[k], out.phi_eps[k] / epsilon);
    }
    return out;
}

double DirichletLayer::operator()(double yy) const {
    return plateau * std::tanh(std::sqrt(0.5 * (1.0 - b * b)) * yy);
}

DirichletLayer dirichlet_layer(double b, double L, std::size_t n) {
    if (!(b * b < 1.0) || !std::isfinite(b)) throw DomainError("dirichlet_layer needs b^2 < 1");
    const double m2 = 1.0 - b * b;
    if (!(L >= 20.0 / std::sqrt(m2))) throw InvalidArgument("layer length L must be at least 20/sqrt(1-b^2)");
    if (n < 3) throw InvalidArgument("need at least 3 samples");
    DirichletLayer d;
    d.b = b;
    d.L = L;
    d.plateau = std::sqrt(m2);
    const double k = std::sqrt(0.5 * m2);
    const double h = L / static_cast<double>(n - 1);
    d.y.resize(n);
    d.profile.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.y[i] = h * static_cast<double>(i);
        d.profile[i] = d(d.y[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        // ρ₀'' = −2 m k² tanh sech²
        const double t = std::tanh(k * d.y[i]);
        const double pp = -2.0 * d.plateau * k * k * t * (1.0 - t * t);
        const double r0 = d.profile[i];
        d.closed_form_error = std::max(d.closed_form_error, std::abs(pp + r0 * (m2 - r0 * r0)));
        if (i > 0 && i + 1 < n) {
            const double fd = (d.profile[i + 1] - 2.0 * r0 + d.profile[i - 1]) / (h * h);
            d.fd_residual = std::max(d.fd_residual, std::abs(fd + r0 * (m2 - r0 * r0)));
        }
    }
    return d;
}

}  // namespace gpob
