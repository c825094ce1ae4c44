#include "gpob/gl_vortex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gpob/errors.hpp"

namespace gpob {

namespace {

using std::numbers::pi;

/// Chebyshev–Lobatto differentiation matrix on ascending nodes t_k = −cos(πk/N).
Eigen::MatrixXd cheb_matrix(const Vec& t) {
    const std::size_t n = t.size();
    const std::size_t N = n - 1;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    auto c = [&](std::size_t k) { return (k == 0 || k == N) ? 2.0 : 1.0; };
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            D(i, j) = c(i) / c(j) * sign / (t[i] - t[j]);
            row += D(i, j);
        }
        D(i, i) = -row;
    }
    return D;
}

double barycentric(const Vec& r, const Vec& f, double x) {
    const std::size_t N = r.size() - 1;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k <= N; ++k) {
        const double dx = x - r[k];
        if (dx == 0.0) return f[k];
        double w = (k % 2 == 0) ? 1.0 : -1.0;
        if (k == 0 || k == N) w *= 0.5;
        num += w / dx * f[k];
        den += w / dx;
    }
    return num / den;
}

double wrapped_arg(std::complex<double> to, std::complex<double> from) {
    return std::arg(to * std::conj(from));
}

}  // namespace

double VortexProfile::operator()(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= radius()) return 1.0 - far_coefficient / (r * r);
    return barycentric(r_nodes, S0, r);
}

double VortexProfile::derivative(double r) const {
    if (r <= 0.0) return slope_at_0;
    if (r >= radius()) return 2.0 * far_coefficient / (r * r * r);
    return barycentric(r_nodes, dS0, r);
}

VortexProfile solve_gl_profile(double R_prof, std::size_t n) {
    if (R_prof < 40.0) throw InvalidArgument("solve_gl_profile: R_prof must be >= 40");
    if (n < 400) throw InvalidArgument("solve_gl_profile: n must be >= 400");
    const std::size_t N = n - 1;
    Vec t(n), r(n);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = -std::cos(pi * static_cast<double>(k) / static_cast<double>(N));
        r[k] = 0.5 * R_prof * (1.0 + t[k]);
    }
    r[0] = 0.0;
    const Eigen::MatrixXd D1 = cheb_matrix(t) * (2.0 / R_prof);
    const Eigen::MatrixXd D2 = D1 * D1;

    Eigen::VectorXd S(n);
    for (std::size_t k = 0; k < n; ++k) S[k] = std::tanh(r[k] / std::sqrt(2.0));

    auto residual = [&](const Eigen::VectorXd& s) {
        const Eigen::VectorXd s1 = D1 * s, s2 = D2 * s;
        Eigen::VectorXd F(n);
        F[0] = s[0];
        for (std::size_t k = 1; k < N; ++k)
            F[k] = s2[k] + s1[k] / r[k] - s[k] / (r[k] * r[k]) + s[k] * (1.0 - s[k] * s[k]);
        F[N] = R_prof * s1[N] - 2.0 * (1.0 - s[N]);
        return F;
    };

    VortexProfile p;
    Eigen::VectorXd F = residual(S);
    int it = 0;
    for (; it < 50 && F.lpNorm<Eigen::Infinity>() > 1e-11; ++it) {
        Eigen::MatrixXd J = D2;
        for (std::size_t k = 1; k < N; ++k) {
            J.row(k) += D1.row(k) / r[k];
            J(k, k) += -1.0 / (r[k] * r[k]) + 1.0 - 3.0 * S[k] * S[k];
        }
        J.row(0).setZero();
        J(0, 0) = 1.0;
        J.row(N) = R_prof * D1.row(N);
        J(N, N) += 2.0;
        const Eigen::VectorXd step = J.partialPivLu().solve(F);
        const double f0 = F.norm();
        double lambda = 1.0;
        Eigen::VectorXd trial = S - step;
        Eigen::VectorXd Ft = residual(trial);
        while (Ft.norm() > f0 && lambda > 1e-4) {
            lambda *= 0.5;
            trial = S - lambda * step;
            Ft = residual(trial);
        }
        if (Ft.norm() > f0 && f0 < 1e-8) break;  // roundoff floor
        S = trial;
        F = Ft;
        if (lambda * step.lpNorm<Eigen::Infinity>() < 1e-13) {
            ++it;
            break;
        }
    }
    p.residual_norm = F.lpNorm<Eigen::Infinity>();
    if (p.residual_norm > 1e-8) throw NonConvergence(it, p.residual_norm, "solve_gl_profile");
    p.newton_iterations = it;

    const Eigen::VectorXd dS = D1 * S;
    p.r_nodes = r;
    p.S0.assign(S.data(), S.data() + n);
    p.S0[0] = 0.0;
    p.dS0.assign(dS.data(), dS.data() + n);
    p.slope_at_0 = dS[0];

    // (1 − S₀)r² = β + γ/r² on [R/4, R]
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (r[k] < 0.25 * R_prof) continue;
        const double x = 1.0 / (r[k] * r[k]), y = (1.0 - S[k]) * r[k] * r[k];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1.0;
    }
    const double gamma = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    p.far_coefficient = (sy - gamma * sx) / m;
    return p;
}

HalfPlaneGrid HalfPlaneGrid::make(double L1, double L2, double h) {
    if (!(h > 0.0) || !(L1 > 0.0) || !(L2 > 0.0)) throw InvalidArgument("HalfPlaneGrid: L1, L2, h must be positive");
    const double m1 = std::round(L1 / h), m2 = std::round(L2 / h);
    if (std::abs(m1 * h - L1) > 1e-9 * L1 || std::abs(m2 * h - L2) > 1e-9 * L2)
        throw InvalidArgument("HalfPlaneGrid: L1 and L2 must be multiples of h");
    HalfPlaneGrid g;
    g.L1 = L1;
    g.L2 = L2;
    g.h = h;
    g.n1 = static_cast<std::size_t>(m1) + 1;
    g.n2 = 2 * static_cast<std::size_t>(m2) + 1;
    return g;
}

std::complex<double> vortex_plus(const VortexProfile& p, double y1, double y2) {
    const double r = std::hypot(y1, y2);
    if (r == 0.0) return 0.0;
    const double a = r < 1e-8 ? p.slope_at_0 : p(r) / r;
    return {a * y1, a * y2};
}

std::complex<double> vortex_plus_dy1(const VortexProfile& p, double y1, double y2) {
    const double r = std::hypot(y1, y2);
    if (r < 1e-8) return p.slope_at_0;
    const double c = y1 / r, s = y2 / r;
    const std::complex<double> e(c, s);
    return e * std::complex<double>(p.derivative(r) * c, -p(r) * s / r);
}

double cutoff_eta(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    const double t = 2.0 - s;
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

std::complex<double> pair_value(const VortexProfile& p, double d, double y1, double y2) {
    return vortex_plus(p, y1 - d, y2) * std::conj(vortex_plus(p, y1 + d, y2));
}

PairAnsatz pair_ansatz(const VortexProfile& p, double d, const HalfPlaneGrid& g) {
    if (!(d > 0.0)) throw InvalidArgument("pair_ansatz: d must be positive");
    PairAnsatz a;
    a.d = d;
    a.field.resize(g.size());
    a.d_derivative.resize(g.size());
    a.eta.resize(g.size());
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            const double y1 = g.y1(i), y2 = g.y2(j);
            const std::size_t k = g.index(i, j);
            const auto wm = vortex_plus(p, y1 - d, y2), wp = vortex_plus(p, y1 + d, y2);
            a.field[k] = wm * std::conj(wp);
            a.d_derivative[k] =
                -vortex_plus_dy1(p, y1 - d, y2) * std::conj(wp) + wm * std::conj(vortex_plus_dy1(p, y1 + d, y2));
            a.eta[k] = cutoff_eta(std::hypot(y1 - d, y2)) + cutoff_eta(std::hypot(y1 + d, y2));
        }
    return a;
}

Lattice make_lattice(const HalfPlaneGrid& g) {
    Lattice l;
    l.n1 = g.n1;
    l.n2 = g.n2;
    l.index = [g](std::size_t i, std::size_t j) { return g.index(i, j); };
    l.position = [g](std::size_t i, std::size_t j) { return Vec2{g.y1(i), g.y2(j)}; };
    return l;
}

Lattice make_lattice(const Grid2D& g, std::size_t i_begin) {
    Lattice l;
    l.n1 = g.n_radial();
    l.n2 = g.n_angular();
    l.i_begin = i_begin;
    l.periodic2 = true;
    const Grid2D* gp = &g;
    l.index = [gp](std::size_t i, std::size_t j) { return gp->index(i, j); };
    l.position = [gp](std::size_t i, std::size_t j) {
        const std::size_t k = gp->index(i, j);
        return Vec2{gp->x1(k), gp->x2(k)};
    };
    return l;
}

Lattice make_lattice(double x0, double y0, double h, std::size_t n1, std::size_t n2) {
    Lattice l;
    l.n1 = n1;
    l.n2 = n2;
    l.index = [n2](std::size_t i, std::size_t j) { return i * n2 + j; };
    l.position = [=](std::size_t i, std::size_t j) {
        return Vec2{x0 + static_cast<double>(i) * h, y0 + static_cast<double>(j) * h};
    };
    return l;
}

int contour_winding(const Lattice& lat, const CVec& field, std::size_t i0, std::size_t i1, std::size_t j0,
                    std::size_t j1) {
    auto at = [&](std::size_t i, std::size_t j) { return field[lat.index(i, lat.periodic2 ? j % lat.n2 : j)]; };
    double sum = 0.0;
    auto step = [&](std::size_t ia, std::size_t ja, std::size_t ib, std::size_t jb) {
        sum += wrapped_arg(at(ib, jb), at(ia, ja));
    };
    for (std::size_t i = i0; i < i1; ++i) step(i, j0, i + 1, j0);
    for (std::size_t j = j0; j < j1; ++j) step(i1, j, i1, j + 1);
    for (std::size_t i = i1; i > i0; --i) step(i, j1, i - 1, j1);
    for (std::size_t j = j1; j > j0; --j) step(i0, j, i0, j - 1);
    return static_cast<int>(std::lround(sum / (2.0 * pi)));
}

VortexSet detect_vortices(const Lattice& lat, const CVec& field, double threshold) {
    const std::size_t n1 = lat.n1, n2 = lat.n2;
    const std::size_t np2 = lat.periodic2 ? n2 : n2 - 1;
    auto wrap = [&](std::size_t j) { return lat.periodic2 ? j % n2 : j; };
    auto val = [&](std::size_t i, std::size_t j) { return field[lat.index(i, wrap(j))]; };

    for (std::size_t i = lat.i_begin; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            if (std::abs(val(i, j)) < 1e-6)
                throw AmbiguousCore("detect_vortices: |field| < 1e-6 on a plaquette corner");

    // plaquette windings
    std::vector<int> wind((n1 - 1) * np2, 0);
    std::vector<std::size_t> marked;
    for (std::size_t i = lat.i_begin; i + 1 < n1; ++i)
        for (std::size_t j = 0; j < np2; ++j) {
            const auto a = val(i, j), b = val(i + 1, j), c = val(i + 1, j + 1), d = val(i, j + 1);
            const double s = wrapped_arg(b, a) + wrapped_arg(c, b) + wrapped_arg(d, c) + wrapped_arg(a, d);
            const int w = static_cast<int>(std::lround(s / (2.0 * pi)));
            if (w != 0) {
                wind[i * np2 + j] = w;
                marked.push_back(i * np2 + j);
            }
        }

    // cluster marks that touch (8-neighbourhood)
    std::vector<std::size_t> parent(wind.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t m : marked) {
        const std::size_t i = m / np2, j = m % np2;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
                const long ii = static_cast<long>(i) + di;
                long jj = static_cast<long>(j) + dj;
                if (ii < static_cast<long>(lat.i_begin) || ii + 1 >= static_cast<long>(n1)) continue;
                if (lat.periodic2)
                    jj = (jj + static_cast<long>(np2)) % static_cast<long>(np2);
                else if (jj < 0 || jj >= static_cast<long>(np2))
                    continue;
                const std::size_t o = static_cast<std::size_t>(ii) * np2 + static_cast<std::size_t>(jj);
                if (wind[o] != 0) parent[find(o)] = find(m);
            }
    }

    std::vector<std::size_t> roots;
    for (std::size_t m : marked)
        if (std::find(roots.begin(), roots.end(), find(m)) == roots.end()) roots.push_back(find(m));

    VortexSet out;
    for (std::size_t root : roots) {
        int w = 0;
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t m : marked) {
            if (find(m) != root) continue;
            w += wind[m];
            const std::size_t i = m / np2, j = m % np2;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b) {
                    const double v = std::abs(val(i + a, j + b));
                    if (v < best) {
                        best = v;
                        bi = i + a;
                        bj = wrap(j + b);
                    }
                }
        }
        if (w == 0 || best >= threshold) continue;

        Vortex v;
        v.winding = w;
        v.core_min = best;
        v.position = lat.position(bi, bj);
        const bool interior_i = bi > lat.i_begin && bi + 1 < n1;
        const bool interior_j = lat.periodic2 || (bj > 0 && bj + 1 < n2);
        if (interior_i && interior_j) {
            // least-squares quadratic of |u|² on the 3×3 patch
            Eigen::Matrix<double, 9, 6> A;
            Eigen::Matrix<double, 9, 1> f;
            int row = 0;
            for (int p = -1; p <= 1; ++p)
                for (int q = -1; q <= 1; ++q) {
                    const std::size_t ii = bi + static_cast<std::size_t>(p + 1) - 1;
                    const std::size_t jj = wrap(bj + static_cast<std::size_t>(q + 1) + (lat.periodic2 ? n2 : 0) - 1);
                    A.row(row) << 1.0, p, q, p * p, q * q, p * q;
                    f[row] = std::norm(val(ii, jj));
                    ++row;
                }
            const Eigen::Matrix<double, 6, 1> c = A.colPivHouseholderQr().solve(f);
            Eigen::Matrix2d H;
            H << 2 * c[3], c[5], c[5], 2 * c[4];
            if (H.determinant() > 0 && H(0, 0) > 0) {
                const Eigen::Vector2d s = H.ldlt().solve(Eigen::Vector2d(-c[1], -c[2]));
                if (std::abs(s[0]) <= 1.0 && std::abs(s[1]) <= 1.0) {
                    const Vec2 P = lat.position(bi, bj);
                    const Vec2 Pi = s[0] >= 0 ? lat.position(bi + 1, bj) : lat.position(bi - 1, bj);
                    const std::size_t jn = s[1] >= 0 ? wrap(bj + 1) : wrap(bj + (lat.periodic2 ? n2 : 0) - 1);
                    const Vec2 Pj = lat.position(bi, jn);
                    const double sp = std::abs(s[0]), sq = std::abs(s[1]);
                    v.position = {P[0] + sp * (Pi[0] - P[0]) + sq * (Pj[0] - P[0]),
                                  P[1] + sp * (Pi[1] - P[1]) + sq * (Pj[1] - P[1])};
                }
            }
        }
        out.push_back(v);
    }
    return out;
}

VortexSet detect_vortices(const HalfPlaneGrid& g, const CVec& field, double threshold) {
    return detect_vortices(make_lattice(g), field, threshold);
}

VortexSet detect_vortices(const Grid2D& g, const CVec& field, double threshold) {
    return detect_vortices(make_lattice(g), field, threshold);
}

}  // namespace gpob
