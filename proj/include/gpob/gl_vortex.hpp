#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "gpob/grid.hpp"
#include "gpob/sparse.hpp"

namespace gpob {

/// Degree-one Ginzburg–Landau profile: S₀'' + S₀'/r − S₀/r² + S₀(1 − S₀²) = 0,
/// S₀(0) = 0, S₀ → 1. Stored on Chebyshev–Lobatto nodes of [0, R].
struct VortexProfile {
    Vec r_nodes, S0;
    Vec dS0;  ///< S₀' on the nodes (spectral derivative)
    double slope_at_0 = 0.0;
    double far_coefficient = 0.0;  ///< β in 1 − S₀ ≈ β/r²
    double residual_norm = 0.0;    ///< sup of the collocation residual
    int newton_iterations = 0;

    double radius() const { return r_nodes.back(); }
    /// S₀(r) by barycentric interpolation, continued by 1 − β/r² past R.
    double operator()(double r) const;
    double derivative(double r) const;
};

VortexProfile solve_gl_profile(double R_prof = 40.0, std::size_t n = 401);

/// Uniform grid of the half-plane {0 ≤ y₁ ≤ L1, |y₂| ≤ L2}. Node k = i·n2 + j
/// with y₁ = i·h and y₂ = −L2 + j·h.
struct HalfPlaneGrid {
    double L1 = 0.0, L2 = 0.0, h = 0.0;
    std::size_t n1 = 0, n2 = 0;

    static HalfPlaneGrid make(double L1, double L2, double h);
    std::size_t size() const { return n1 * n2; }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n2 + j; }
    double y1(std::size_t i) const { return static_cast<double>(i) * h; }
    double y2(std::size_t j) const { return -L2 + static_cast<double>(j) * h; }
};

/// w⁺(y) = S₀(|y|) e^{iθ} and its y₁-derivative.
std::complex<double> vortex_plus(const VortexProfile& p, double y1, double y2);
std::complex<double> vortex_plus_dy1(const VortexProfile& p, double y1, double y2);

/// η̃(s) = 1 on s ≤ 1, 0 on s ≥ 2, quintic smoothstep in between.
double cutoff_eta(double s);

struct PairAnsatz {
    double d = 0.0;
    CVec field;  ///< V_d on the half-plane nodes
    CVec d_derivative;  ///< ∂V_d/∂d
    Vec eta;  ///< η_d = η̃(|y − de₁|) + η̃(|y + de₁|)
    double cutoff_radius = 1.0;
};

/// V_d(y) = w⁺(y − de₁)·conj(w⁺(y + de₁)), even in y₁.
PairAnsatz pair_ansatz(const VortexProfile& p, double d, const HalfPlaneGrid& g);
std::complex<double> pair_value(const VortexProfile& p, double d, double y1, double y2);

struct Vortex {
    Vec2 position{};
    int winding = 0;
    double core_min = 0.0;
};
using VortexSet = std::vector<Vortex>;

/// Structured lattice for plaquette winding counts: rows i ∈ [i_begin, n1),
/// columns j ∈ [0, n2), optionally periodic in j.
struct Lattice {
    std::size_t n1 = 0, n2 = 0;
    std::size_t i_begin = 0;
    bool periodic2 = false;
    std::function<std::size_t(std::size_t, std::size_t)> index;
    std::function<Vec2(std::size_t, std::size_t)> position;
};

Lattice make_lattice(const HalfPlaneGrid& g);
/// `i_begin = 1` skips the boundary ring (used when u = 0 on ∂Ω).
Lattice make_lattice(const Grid2D& g, std::size_t i_begin = 0);
/// Uniform Cartesian lattice with origin (x0, y0), row index along x.
Lattice make_lattice(double x0, double y0, double h, std::size_t n1, std::size_t n2);

/// Plaquette phase circulation. Throws AmbiguousCore when |field| < 1e−6 on a
/// plaquette corner.
VortexSet detect_vortices(const Lattice& lat, const CVec& field, double threshold = 0.5);
VortexSet detect_vortices(const HalfPlaneGrid& g, const CVec& field, double threshold = 0.5);
VortexSet detect_vortices(const Grid2D& g, const CVec& field, double threshold = 0.5);

/// Winding of the field around the boundary of the index rectangle
/// [i0, i1] × [j0, j1] (counter-clockwise in index space).
int contour_winding(const Lattice& lat, const CVec& field, std::size_t i0, std::size_t i1, std::size_t j0,
                    std::size_t j1);

}  // namespace gpob
