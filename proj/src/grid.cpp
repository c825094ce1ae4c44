#include "gpob/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "gpob/errors.hpp"

namespace gpob {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double log_cosh(double x) {
    const double ax = std::abs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

bool is_round(const ObstacleShape& s) {
    return s.kind == ShapeKind::Disk || std::abs(s.semi_axis_a - s.semi_axis_b) <= 1e-14 * s.semi_axis_a;
}

}  // namespace

void ObstacleShape::validate() const {
    if (!(semi_axis_a > 0.0 && semi_axis_b > 0.0) || !std::isfinite(semi_axis_a) || !std::isfinite(semi_axis_b))
        throw BadGeometry("semi-axes must be positive");
    if (kind == ShapeKind::Disk && semi_axis_a != semi_axis_b) throw BadGeometry("disk needs equal semi-axes");
}

std::string ObstacleShape::name() const { return kind == ShapeKind::Disk ? "disk" : "ellipse"; }

Grid2D::Grid2D(ObstacleShape shape, std::size_t n_radial, std::size_t n_angular, double r_far, double radial_stretch,
               AngularClustering clustering)
    : shape_(shape), ni_(n_radial), nj_(n_angular), r_far_(r_far), stretch_(radial_stretch),
      clustering_(std::move(clustering)) {
    shape_.validate();
    if (r_far_ <= shape_.max_semi_axis()) throw BadGeometry("R_far must exceed the obstacle size");
    if (ni_ < 3 || nj_ < 4) throw InvalidArgument("grid too small");
    if (!(stretch_ >= 1.0)) throw InvalidArgument("radial_stretch must be >= 1");
    if (clustering_.enabled() && !(clustering_.factor > 0.0 && clustering_.half_width > 0.0 &&
                                   clustering_.shoulder > 0.0))
        throw InvalidArgument("bad angular clustering parameters");

    const double a = shape_.semi_axis_a, b = shape_.semi_axis_b;
    if (is_round(shape_)) {
        xi0_ = a;
        xi_far_ = r_far_;
    } else {
        const double big = std::max(a, b), small = std::min(a, b);
        focal_ = std::sqrt(big * big - small * small);
        xi0_ = std::atanh(small / big);
        xi_far_ = std::acosh(r_far_ / focal_);
    }
    const double span = xi_far_ - xi0_;
    const double nm1 = static_cast<double>(ni_ - 1);
    dxi0_ = stretch_ == 1.0 ? span / nm1 : span * (stretch_ - 1.0) / (std::pow(stretch_, nm1) - 1.0);
    density_total_ = density_integral(kTwoPi);

    xi_.resize(ni_);
    for (std::size_t i = 0; i < ni_; ++i) xi_[i] = xi_of_q(static_cast<double>(i));
    xi_[0] = xi0_;
    xi_[ni_ - 1] = xi_far_;
    theta_.resize(nj_);
    for (std::size_t j = 0; j < nj_; ++j) theta_[j] = theta_of_eta(static_cast<double>(j));

    const std::size_t n = size();
    x1_.resize(n);
    x2_.resize(n);
    area_.resize(n);
    jac_.resize(n);
    hq_.resize(n);
    he_.resize(n);
    fq_.assign(n, 0.0);
    fe_.resize(n);
    dist_.resize(n);
    for (std::size_t i = 0; i < ni_; ++i) {
        const double q = static_cast<double>(i);
        const double qh = q + 0.5;
        for (std::size_t j = 0; j < nj_; ++j) {
            const std::size_t k = index(i, j);
            const double th = theta_[j];
            const Vec2 p = map(xi_[i], th);
            x1_[k] = p[0];
            x2_[k] = p[1];
            const double dxi = dxi_dq(q), dth = dtheta_deta(th);
            hq_[k] = h_xi(xi_[i], th) * dxi;
            he_[k] = h_theta(xi_[i], th) * dth;
            jac_[k] = hq_[k] * he_[k];
            area_[k] = jac_[k] * ((i == 0 || i + 1 == ni_) ? 0.5 : 1.0);
            if (i + 1 < ni_) {
                const double xh = xi_of_q(qh);
                fq_[k] = (h_theta(xh, th) * dth) / (h_xi(xh, th) * dxi_dq(qh));
            }
            const double thh = theta_of_eta(static_cast<double>(j) + 0.5);
            const double dthh = dtheta_deta(thh);
            fe_[k] = (h_xi(xi_[i], thh) * dxi) / (h_theta(xi_[i], thh) * dthh);
        }
    }
    for (std::size_t j = 0; j < nj_; ++j) {
        dist_[index(0, j)] = 0.0;
        for (std::size_t i = 1; i < ni_; ++i) {
            const std::size_t k = index(i, j), km = index(i - 1, j);
            dist_[k] = dist_[km] + std::hypot(x1_[k] - x1_[km], x2_[k] - x2_[km]);
        }
    }
    mq1_.resize(n);
    mq2_.resize(n);
    me1_.resize(n);
    me2_.resize(n);
    mjac_.resize(n);
    for (std::size_t i = 0; i < ni_; ++i)
        for (std::size_t j = 0; j < nj_; ++j) {
            const std::size_t k = index(i, j);
            mq1_[k] = diff_q(*this, x1_, i, j);
            mq2_[k] = diff_q(*this, x2_, i, j);
            me1_[k] = diff_eta(*this, x1_, i, j);
            me2_[k] = diff_eta(*this, x2_, i, j);
            mjac_[k] = mq1_[k] * me2_[k] - me1_[k] * mq2_[k];
            if (!(mjac_[k] > 0.0) || !(jac_[k] > 0.0)) throw BadGeometry("non-positive metric Jacobian");
        }
    ell1_.assign(n, 0.0);
    ell2_.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < ni_; ++i)
        for (std::size_t j = 0; j < nj_; ++j) {
            const std::size_t k = index(i, j);
            double s1 = 0.0, s2 = 0.0;
            auto face = [&](std::size_t kn, double c) {
                s1 += c * (x1_[kn] - x1_[k]);
                s2 += c * (x2_[kn] - x2_[k]);
            };
            face(index(i + 1, j), fq_[k]);
            face(index(i - 1, j), fq_[index(i - 1, j)]);
            face(index(i, jp(j)), fe_[k]);
            face(index(i, jm(j)), fe_[index(i, jm(j))]);
            ell1_[k] = s1 / area_[k];
            ell2_[k] = s2 / area_[k];
        }
}

double Grid2D::xi_of_q(double q) const {
    if (stretch_ == 1.0) return xi0_ + dxi0_ * q;
    return xi0_ + dxi0_ * (std::pow(stretch_, q) - 1.0) / (stretch_ - 1.0);
}

double Grid2D::dxi_dq(double q) const {
    if (stretch_ == 1.0) return dxi0_;
    return dxi0_ * std::pow(stretch_, q) * std::log(stretch_) / (stretch_ - 1.0);
}

double Grid2D::density(double theta) const {
    if (!clustering_.enabled()) return 1.0;
    double g = 1.0;
    for (double c : clustering_.centers)
        for (int img = -1; img <= 1; ++img) {
            const double t = theta - c - kTwoPi * img;
            g += (clustering_.factor - 1.0) * 0.5 *
                 (1.0 + std::tanh((clustering_.half_width - std::abs(t)) / clustering_.shoulder));
        }
    return g;
}

double Grid2D::density_integral(double theta) const {
    if (!clustering_.enabled()) return theta;
    const double w = clustering_.half_width, s = clustering_.shoulder;
    // G(t) = ∫₀ᵗ ½(1 + tanh((w − |τ|)/s)) dτ, odd in t
    auto G = [&](double t) {
        const double at = std::abs(t);
        const double v = 0.5 * (at - s * log_cosh((w - at) / s) + s * log_cosh(w / s));
        return t < 0 ? -v : v;
    };
    double F = theta;
    for (double c : clustering_.centers)
        for (int img = -1; img <= 1; ++img) {
            const double off = c + kTwoPi * img;
            F += (clustering_.factor - 1.0) * (G(theta - off) - G(-off));
        }
    return F;
}

double Grid2D::theta_of_eta(double eta) const {
    const double target = eta / static_cast<double>(nj_) * density_total_;
    if (!clustering_.enabled() || eta == 0.0) return target;
    double lo = 0.0, hi = kTwoPi;
    double t = target / density_total_ * kTwoPi;
    for (int it = 0; it < 100; ++it) {
        const double f = density_integral(t) - target;
        if (f > 0) hi = t; else lo = t;
        double tn = t - f / density(t);
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) < 1e-15) {
            t = tn;
            break;
        }
        t = tn;
    }
    return t;
}

double Grid2D::dtheta_deta(double theta) const {
    return density_total_ / (static_cast<double>(nj_) * density(theta));
}

double Grid2D::h_xi(double xi, double theta) const {
    if (is_round(shape_)) return 1.0;
    const double sh = std::sinh(xi);
    const double tr = shape_.semi_axis_a > shape_.semi_axis_b ? std::sin(theta) : std::cos(theta);
    return focal_ * std::sqrt(sh * sh + tr * tr);
}

double Grid2D::h_theta(double xi, double theta) const {
    if (is_round(shape_)) return xi;
    return h_xi(xi, theta);
}

Vec2 Grid2D::map(double xi, double theta) const {
    if (is_round(shape_)) return {xi * std::cos(theta), xi * std::sin(theta)};
    if (shape_.semi_axis_a > shape_.semi_axis_b)
        return {focal_ * std::cosh(xi) * std::cos(theta), focal_ * std::sinh(xi) * std::sin(theta)};
    return {focal_ * std::sinh(xi) * std::cos(theta), focal_ * std::cosh(xi) * std::sin(theta)};
}

double Grid2D::radius(std::size_t k) const { return std::hypot(x1_[k], x2_[k]); }

Vec2 Grid2D::boundary_normal(std::size_t j) const {
    const double th = theta_[j], xi = xi0_;
    Vec2 d;
    if (is_round(shape_))
        d = {std::cos(th), std::sin(th)};
    else if (shape_.semi_axis_a > shape_.semi_axis_b)
        d = {std::sinh(xi) * std::cos(th), std::cosh(xi) * std::sin(th)};
    else
        d = {std::cosh(xi) * std::cos(th), std::sinh(xi) * std::sin(th)};
    const double nrm = std::hypot(d[0], d[1]);
    return {d[0] / nrm, d[1] / nrm};
}

Vec2 Grid2D::boundary_tangent(std::size_t j) const {
    const Vec2 n = boundary_normal(j);
    return {-n[1], n[0]};
}

double Grid2D::min_first_spacing() const {
    double m = INFINITY;
    for (std::size_t j = 0; j < nj_; ++j) m = std::min(m, dist_[index(1, j)]);
    return m;
}

double Grid2D::boundary_arc(std::size_t j) const {
    const std::size_t a = index(0, j), b = index(0, jp(j));
    return std::hypot(x1_[b] - x1_[a], x2_[b] - x2_[a]);
}

Grid2D build_exterior_grid(const ObstacleShape& shape, std::size_t n_radial, std::size_t n_angular, double r_far,
                           double radial_stretch, const AngularClustering& clustering) {
    shape.validate();
    if (r_far <= shape.max_semi_axis()) throw BadGeometry("R_far must exceed the semi-axes");
    return Grid2D(shape, n_radial, n_angular, r_far, radial_stretch, clustering);
}

QStencil q_stencil(const Grid2D& g, std::size_t i) {
    const std::size_t n = g.n_radial();
    if (i == 0) return {{0, 1, 2}, {-1.5, 2.0, -0.5}};
    if (i + 1 == n) return {{n - 1, n - 2, n - 3}, {1.5, -2.0, 0.5}};
    return {{i - 1, i, i + 1}, {-0.5, 0.0, 0.5}};
}

double diff_q(const Grid2D& g, std::span<const double> f, std::size_t i, std::size_t j) {
    // written in differences so that constants differentiate to exactly zero
    const std::size_t n = g.n_radial();
    if (i == 0) {
        const double f0 = f[g.index(0, j)];
        return 2.0 * (f[g.index(1, j)] - f0) - 0.5 * (f[g.index(2, j)] - f0);
    }
    if (i + 1 == n) {
        const double f0 = f[g.index(n - 1, j)];
        return -2.0 * (f[g.index(n - 2, j)] - f0) + 0.5 * (f[g.index(n - 3, j)] - f0);
    }
    return 0.5 * (f[g.index(i + 1, j)] - f[g.index(i - 1, j)]);
}

double diff_eta(const Grid2D& g, std::span<const double> f, std::size_t i, std::size_t j) {
    return 0.5 * (f[g.index(i, g.jp(j))] - f[g.index(i, g.jm(j))]);
}

VectorField gradient(const Grid2D& g, std::span<const double> f) {
    if (f.size() != g.size()) throw InvalidArgument("gradient: field size mismatch");
    VectorField out{Vec(g.size()), Vec(g.size())};
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            const double fq = diff_q(g, f, i, j), fe = diff_eta(g, f, i, j);
            const double J = g.discrete_jacobian(k);
            out.c1[k] = (g.dx2_deta(k) * fq - g.dx2_dq(k) * fe) / J;
            out.c2[k] = (-g.dx1_deta(k) * fq + g.dx1_dq(k) * fe) / J;
        }
    return out;
}

Vec divergence(const Grid2D& g, const VectorField& F) {
    if (F.c1.size() != g.size() || F.c2.size() != g.size()) throw InvalidArgument("divergence: size mismatch");
    Vec G1(g.size()), G2(g.size()), out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        G1[k] = g.dx2_deta(k) * F.c1[k] - g.dx1_deta(k) * F.c2[k];
        G2[k] = -g.dx2_dq(k) * F.c1[k] + g.dx1_dq(k) * F.c2[k];
    }
    for (std::size_t i = 0; i < g.n_radial(); ++i)
        for (std::size_t j = 0; j < g.n_angular(); ++j) {
            const std::size_t k = g.index(i, j);
            out[k] = (diff_q(g, G1, i, j) + diff_eta(g, G2, i, j)) / g.discrete_jacobian(k);
        }
    return out;
}

Vec grad_squared(const Grid2D& g, std::span<const double> f) {
    const VectorField d = gradient(g, f);
    Vec s(g.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = d.c1[k] * d.c1[k] + d.c2[k] * d.c2[k];
    return s;
}

GradientStencil gradient_stencil(const Grid2D& g, std::size_t i, std::size_t j) {
    GradientStencil gs;
    const std::size_t p = g.index(i, j);
    const double J = g.discrete_jacobian(p);
    const QStencil qs = q_stencil(g, i);
    for (int s = 0; s < 3; ++s) {
        if (qs.weight[s] == 0.0) continue;
        const double w = qs.weight[s] / J;
        gs.node[gs.n] = g.index(qs.ring[s], j);
        gs.w1[gs.n] = g.dx2_deta(p) * w;
        gs.w2[gs.n++] = -g.dx1_deta(p) * w;
    }
    const double de = 0.5 / J;
    gs.node[gs.n] = g.index(i, g.jp(j));
    gs.w1[gs.n] = -g.dx2_dq(p) * de;
    gs.w2[gs.n++] = g.dx1_dq(p) * de;
    gs.node[gs.n] = g.index(i, g.jm(j));
    gs.w1[gs.n] = g.dx2_dq(p) * de;
    gs.w2[gs.n++] = -g.dx1_dq(p) * de;
    return gs;
}

DefectStencil defect_stencil(const Grid2D& g, std::size_t i, std::size_t j) {
    if (i == 0 || i + 1 >= g.n_radial()) throw InvalidArgument("defect_stencil: interior rings only");
    const std::size_t k = g.index(i, j);
    const Vec2 l = g.freestream_defect(k);
    const double J = g.discrete_jacobian(k);
    const double cq = 0.5 * (g.dx2_deta(k) * l[0] - g.dx1_deta(k) * l[1]) / J;
    const double ce = 0.5 * (-g.dx2_dq(k) * l[0] + g.dx1_dq(k) * l[1]) / J;
    return {{g.index(i + 1, j), g.index(i - 1, j), g.index(i, g.jp(j)), g.index(i, g.jm(j))}, {cq, -cq, ce, -ce}};
}

namespace {

/// Interior-ring coefficients c_q, c_η with ∇_h f·ℓ = c_q (f_{i+1} − f_{i−1}) + c_η (f_{j+1} − f_{j−1}).
std::pair<double, double> defect_weights(const Grid2D& g, std::size_t k) {
    const Vec2 l = g.freestream_defect(k);
    const double J = g.discrete_jacobian(k);
    return {0.5 * (g.dx2_deta(k) * l[0] - g.dx1_deta(k) * l[1]) / J,
            0.5 * (-g.dx2_dq(k) * l[0] + g.dx1_dq(k) * l[1]) / J};
}

template <class T, class K>
std::vector<T> flux_apply(const Grid2D& g, K kappa, std::span<const T> f, FluxForm form) {
    const std::size_t ni = g.n_radial(), nj = g.n_angular();
    std::vector<T> out(g.size());
    for (std::size_t i = 0; i < ni; ++i) {
        const double w = (i == 0 || i + 1 == ni) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            T s{};
            if (i + 1 < ni) {
                const std::size_t kn = g.index(i + 1, j);
                s += g.face_q(i, j) * 0.5 * (kappa(k) + kappa(kn)) * (f[kn] - f[k]);
            }
            if (i > 0) {
                const std::size_t kn = g.index(i - 1, j);
                s -= g.face_q(i - 1, j) * 0.5 * (kappa(k) + kappa(kn)) * (f[k] - f[kn]);
            }
            const std::size_t kp = g.index(i, g.jp(j)), km = g.index(i, g.jm(j));
            s += w * g.face_eta(i, j) * 0.5 * (kappa(k) + kappa(kp)) * (f[kp] - f[k]);
            s -= w * g.face_eta(i, g.jm(j)) * 0.5 * (kappa(k) + kappa(km)) * (f[k] - f[km]);
            out[k] = s / g.cell_area(k);
            if (form == FluxForm::FreestreamPreserving && i > 0 && i + 1 < ni) {
                const auto [cq, ce] = defect_weights(g, k);
                out[k] -= kappa(k) * (cq * (f[g.index(i + 1, j)] - f[g.index(i - 1, j)]) + ce * (f[kp] - f[km]));
            }
        }
    }
    return out;
}

}  // namespace

Vec flux_operator(const Grid2D& g, std::span<const double> kappa, std::span<const double> f, FluxForm form) {
    if (kappa.size() != g.size() || f.size() != g.size()) throw InvalidArgument("flux_operator: size mismatch");
    return flux_apply<double>(g, [&](std::size_t k) { return kappa[k]; }, f, form);
}

SparseMatrix flux_operator_matrix(const Grid2D& g, std::span<const double> kappa, FluxForm form) {
    if (kappa.size() != g.size()) throw InvalidArgument("flux_operator_matrix: size mismatch");
    const std::size_t ni = g.n_radial(), nj = g.n_angular();
    TripletBuilder tb(g.size(), g.size());
    tb.reserve(5 * g.size());
    for (std::size_t i = 0; i < ni; ++i) {
        const double w = (i == 0 || i + 1 == ni) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t k = g.index(i, j);
            const double inv = 1.0 / g.cell_area(k);
            auto link = [&](std::size_t kn, double c) {
                tb.add(k, kn, c * inv);
                tb.add(k, k, -c * inv);
            };
            if (i + 1 < ni) {
                const std::size_t kn = g.index(i + 1, j);
                link(kn, g.face_q(i, j) * 0.5 * (kappa[k] + kappa[kn]));
            }
            if (i > 0) {
                const std::size_t kn = g.index(i - 1, j);
                link(kn, g.face_q(i - 1, j) * 0.5 * (kappa[k] + kappa[kn]));
            }
            const std::size_t kp = g.index(i, g.jp(j)), km = g.index(i, g.jm(j));
            link(kp, w * g.face_eta(i, j) * 0.5 * (kappa[k] + kappa[kp]));
            link(km, w * g.face_eta(i, g.jm(j)) * 0.5 * (kappa[k] + kappa[km]));
            if (form == FluxForm::FreestreamPreserving && i > 0 && i + 1 < ni) {
                const auto [cq, ce] = defect_weights(g, k);
                tb.add(k, g.index(i + 1, j), -kappa[k] * cq);
                tb.add(k, g.index(i - 1, j), kappa[k] * cq);
                tb.add(k, kp, -kappa[k] * ce);
                tb.add(k, km, kappa[k] * ce);
            }
        }
    }
    return tb.build();
}

Vec laplacian(const Grid2D& g, std::span<const double> f, FluxForm form) {
    if (f.size() != g.size()) throw InvalidArgument("laplacian: size mismatch");
    return flux_apply<double>(g, [](std::size_t) { return 1.0; }, f, form);
}

CVec laplacian(const Grid2D& g, const CVec& f, FluxForm form) {
    if (f.size() != g.size()) throw InvalidArgument("laplacian: size mismatch");
    return flux_apply<std::complex<double>>(g, [](std::size_t) { return 1.0; }, std::span<const std::complex<double>>(f),
                                            form);
}

double ring_flux(const Grid2D& g, std::span<const double> kappa, std::span<const double> f, std::size_t ring) {
    if (ring + 1 >= g.n_radial()) throw InvalidArgument("ring_flux: ring out of range");
    double s = 0.0;
    for (std::size_t j = 0; j < g.n_angular(); ++j) {
        const std::size_t k = g.index(ring, j), kn = g.index(ring + 1, j);
        s += g.face_q(ring, j) * 0.5 * (kappa[k] + kappa[kn]) * (f[kn] - f[k]);
    }
    return s;
}

Vec tangential_derivative(const Grid2D& g, std::span<const double> trace) {
    if (trace.size() != g.n_angular()) throw InvalidArgument("tangential_derivative: size mismatch");
    Vec d(trace.size());
    for (std::size_t j = 0; j < trace.size(); ++j)
        d[j] = 0.5 * (trace[g.jp(j)] - trace[g.jm(j)]) / g.h_eta(g.index(0, j));
    return d;
}

Vec boundary_values(const Grid2D& g, std::span<const double> f) {
    if (f.size() != g.size()) throw InvalidArgument("boundary_values: size mismatch");
    return Vec(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(g.n_angular()));
}

std::vector<Extremum> BoundaryTrace::maxima() const {
    std::vector<Extremum> out;
    for (const auto& e : extrema)
        if (e.kind == ExtremumKind::Max) out.push_back(e);
    return out;
}

std::vector<Extremum> BoundaryTrace::minima() const {
    std::vector<Extremum> out;
    for (const auto& e : extrema)
        if (e.kind == ExtremumKind::Min) out.push_back(e);
    return out;
}

BoundaryTrace boundary_trace(std::span<const double> angles, std::span<const double> values, double prominence) {
    if (angles.size() != values.size()) throw InvalidArgument("boundary_trace: size mismatch");
    BoundaryTrace tr;
    tr.angles.assign(angles.begin(), angles.end());
    tr.values.assign(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) {
        tr.is_constant = true;
        return tr;
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mx - *mn <= prominence || *mx == *mn) {
        tr.is_constant = true;
        return tr;
    }
    // runs of equal values, periodic; start at a run boundary
    std::size_t start = 0;
    while (values[start] == values[(start + n - 1) % n]) ++start;
    struct Run {
        std::size_t first_index;  // smallest index in the run
        double value;
    };
    std::vector<Run> runs;
    for (std::size_t c = 0; c < n;) {
        const std::size_t k0 = (start + c) % n;
        std::size_t len = 1, smallest = k0;
        while (c + len < n && values[(start + c + len) % n] == values[k0]) {
            smallest = std::min(smallest, (start + c + len) % n);
            ++len;
        }
        runs.push_back({smallest, values[k0]});
        c += len;
    }
    const std::size_t nr = runs.size();
    for (std::size_t r = 0; r < nr; ++r) {
        const double v = runs[r].value, p = runs[(r + nr - 1) % nr].value, q = runs[(r + 1) % nr].value;
        if (v > p && v > q)
            tr.extrema.push_back({runs[r].first_index, angles[runs[r].first_index], v, ExtremumKind::Max});
        else if (v < p && v < q)
            tr.extrema.push_back({runs[r].first_index, angles[runs[r].first_index], v, ExtremumKind::Min});
    }
    std::sort(tr.extrema.begin(), tr.extrema.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });

    // merge shallow neighbouring max/min pairs
    auto& ex = tr.extrema;
    while (prominence > 0.0 && ex.size() > 2) {
        const std::size_t m = ex.size();
        std::size_t best = 0;
        double best_gap = INFINITY;
        for (std::size_t e = 0; e < m; ++e) {
            const double gap = std::abs(ex[e].value - ex[(e + 1) % m].value);
            if (gap < best_gap) {
                best_gap = gap;
                best = e;
            }
        }
        if (best_gap >= prominence) break;
        const std::size_t e0 = best, e1 = (best + 1) % m;
        const std::size_t before = (e0 + m - 1) % m, after = (e1 + 1) % m;
        // the survivors on either side absorb the removed pair
        auto absorb = [&](std::size_t keep, std::size_t gone) {
            const bool better = ex[keep].kind == ExtremumKind::Max ? ex[gone].value > ex[keep].value
                                                                   : ex[gone].value < ex[keep].value;
            if (better) ex[keep] = ex[gone];
        };
        if (ex[before].kind == ex[e1].kind) absorb(before, e1);
        if (ex[after].kind == ex[e0].kind) absorb(after, e0);
        std::vector<Extremum> kept;
        for (std::size_t e = 0; e < m; ++e)
            if (e != e0 && e != e1) kept.push_back(ex[e]);
        ex = std::move(kept);
        std::sort(ex.begin(), ex.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });
    }
    return tr;
}

namespace {

template <class T>
void put_le(std::ofstream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::ifstream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw IoError("truncated field dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

void write_header(std::ofstream& os, std::size_t ni, std::size_t nj, bool cplx) {
    os.write("GPOB", 4);
    put_le<std::uint32_t>(os, 1);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ni));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(nj));
    put_le<std::uint8_t>(os, cplx ? 1 : 0);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    return os;
}

}  // namespace

void write_field_binary(const std::string& path, std::size_t n_radial, std::size_t n_angular,
                        std::span<const double> values) {
    if (values.size() != n_radial * n_angular) throw InvalidArgument("write_field_binary: size mismatch");
    auto os = open_out(path);
    write_header(os, n_radial, n_angular, false);
    for (double v : values) put_le<double>(os, v);
    if (!os) throw IoError("write failed: " + path);
}

void write_field_binary(const std::string& path, std::size_t n_radial, std::size_t n_angular, const CVec& values) {
    if (values.size() != n_radial * n_angular) throw InvalidArgument("write_field_binary: size mismatch");
    auto os = open_out(path);
    write_header(os, n_radial, n_angular, true);
    for (const auto& v : values) {
        put_le<double>(os, v.real());
        put_le<double>(os, v.imag());
    }
    if (!os) throw IoError("write failed: " + path);
}

FieldDump read_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GPOB", 4) != 0) throw IoError("bad magic in " + path);
    if (get_le<std::uint32_t>(is) != 1) throw IoError("unsupported dump version in " + path);
    FieldDump d;
    d.n_radial = get_le<std::uint32_t>(is);
    d.n_angular = get_le<std::uint32_t>(is);
    d.is_complex = get_le<std::uint8_t>(is) != 0;
    const std::size_t n = d.n_radial * d.n_angular;
    if (d.is_complex) {
        d.cplx.resize(n);
        for (auto& v : d.cplx) {
            const double re = get_le<double>(is);
            const double im = get_le<double>(is);
            v = {re, im};
        }
    } else {
        d.real.resize(n);
        for (auto& v : d.real) v = get_le<double>(is);
    }
    return d;
}

}  // namespace gpob
