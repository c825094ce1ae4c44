#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpob/boundary_layers.hpp"
#include "gpob/traveling_wave.hpp"

namespace gpob {

enum class BoundaryCondition { Neumann, Dirichlet };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_condition_from_string(const std::string& s);

/// ε²Δu + u(1 − |u|²) = 0 in the gauge u = e^{iΦ^δ/ε} w:
///   ε²Δw + iε(2∇Φ^δ·∇w + ΔΦ^δ w) + (1 − |∇Φ^δ|² − |w|²) w = 0,
/// with ∂w/∂ν = 0 (Neumann) or w = 0 (Dirichlet) on ∂Ω and w = ρ^δ on the far
/// ring. Unknowns are (Re w, Im w) on every non-Dirichlet node.
struct GPDiscretization {
    std::shared_ptr<const Grid2D> grid;
    double epsilon = 0.0;
    BoundaryCondition bc = BoundaryCondition::Neumann;
    Vec phi;                 ///< reference phase Φ^δ
    Vec grad1, grad2, lap;   ///< ∇Φ^δ and ΔΦ^δ
    Vec speed2;              ///< |∇Φ^δ|²
    CVec far;                ///< w on the far ring, per column

    GPDiscretization(const FlowSolution& flow, double epsilon, BoundaryCondition bc);

    std::size_t n_unknowns() const { return 2 * grid->size(); }
    /// Pointwise residual on every node; Dirichlet rows carry w − datum.
    Vec residual(const Vec& x) const;
    SparseMatrix jacobian(const Vec& x) const;

    Vec pack_u(const CVec& u) const;   ///< u ↦ interleaved w
    CVec unpack_u(const Vec& x) const; ///< interleaved w ↦ u
};

/// Full residual ε²Δu + u(1 − |u|²) on the nodes where the equation holds
/// (zero on the far ring, and on ∂Ω for Dirichlet).
CVec gp_residual(const GPDiscretization& disc, const CVec& u);

struct GPSolution {
    std::shared_ptr<const Grid2D> grid;
    double epsilon = 0.0;
    double delta = 0.0;
    BoundaryCondition bc = BoundaryCondition::Neumann;
    CVec u;
    double residual_norm = 0.0;
    int newton_iterations = 0;
    VortexSet vortices;  ///< cores in the fluid (ring 0 skipped for Dirichlet)
    double min_modulus = 0.0;  ///< over the fluid (ring 0 skipped for Dirichlet)
    int far_winding = 0;  ///< phase winding along the far ring
};

NewtonConfig default_gp_newton();

/// Throws UnderResolved unless the grid has at least `min_cells` rings within
/// ε of ∂Ω on every column and, when `sector` is given, boundary arcs of at
/// most ε/min_cells on the columns with |θ − sector| < 0.3.
void check_gp_resolution(const Grid2D& g, double epsilon, std::optional<double> sector = std::nullopt,
                         int min_cells = 6);

GPSolution gp_exterior_solve(const FlowSolution& flow, double epsilon, const CVec& seed, BoundaryCondition bc,
                             const NewtonConfig& cfg = default_gp_newton(),
                             std::optional<double> sector = std::nullopt);

/// Vortex-free seed for the Dirichlet problem: ρ^δ tanh(ρ^δ s/(√2 ε)) e^{iΦ^δ/ε},
/// s the distance to ∂Ω along the grid lines.
CVec dirichlet_seed(const FlowSolution& flow, double epsilon);

/// Blow-up frame at boundary column j: y = (s, t)/ε with s the distance to ∂Ω
/// along the grid line and t the signed arc length along ∂Ω, oriented along
/// ∇Φ^δ(x₀).
struct LocalFrame {
    std::size_t column = 0;
    double theta = 0.0;
    Vec2 x0{};
    Vec2 normal{};     ///< into the fluid
    Vec2 flow_dir{};   ///< unit tangent along ∇Φ^δ(x₀)
    double b = 0.0;    ///< |∇Φ^δ(x₀)|
    double rho_bar = 1.0;  ///< √(1 − b²)
    double c = 0.0;    ///< local_mach_speed(b²)
    double orientation = 1.0;  ///< +1 when flow_dir is the increasing-θ tangent
};

LocalFrame local_frame(const FlowSolution& flow, std::size_t column);
/// (y₁, y₂) of every node in the frame, with ε the blow-up scale. t wraps
/// into (−P/2, P/2] for perimeter P.
std::vector<Vec2> frame_coordinates(const Grid2D& g, const LocalFrame& f, double epsilon);

/// Wave of the branch closest in c to `c` (the last wave when c is beyond the
/// branch). `extrapolated` is set when |Δc| exceeds `tolerance`.
const TravelingWave& nearest_wave(const std::vector<TravelingWave>& waves, double c, bool* extrapolated = nullptr,
                                  double tolerance = 0.02);

struct VortexSeed {
    CVec u;
    LocalFrame frame;
    double c_used = 0.0;
    bool extrapolated_seed = false;
    Vec2 predicted_core{};  ///< x₀ + ε d_c/ρ̄ · ν
};

/// u_ε(x) U_c(ρ̄ y(x)) with the half-plane wave reflected across the tangent
/// line and U = 1 outside the wave box. Throws SpeedOutOfRange when the local
/// speed is not below √2.
VortexSeed seed_vortex_branch(const VortexFreeSolution& vf, const FlowSolution& flow,
                              const std::vector<TravelingWave>& waves, std::size_t column);
/// Same with an explicit vortex-free base field in place of u_ε.
VortexSeed seed_vortex_branch(const CVec& base, const FlowSolution& flow, const std::vector<TravelingWave>& waves,
                              std::size_t column, double epsilon);

struct ProjectionPoint {
    std::size_t column = 0;
    double theta = 0.0;
    double c = 0.0;        ///< local speed
    double c_wave = 0.0;   ///< speed of the wave used
    double lambda0 = 0.0, lambda1 = 0.0;
    double tangential_derivative = 0.0;  ///< ∂_τ|∇Φ^δ|² along the increasing-θ tangent
    double a0 = 0.0;       ///< A₀ quadrature for the wave used
    double gram_condition = 0.0;
    /// Re∫𝕊[W] ∂W̄/∂y₂ dy (unweighted), along the increasing-θ tangent
    double p1 = 0.0;
    /// its leading-order value −ε ∂_τ|∇Φ^δ|² (K + M)/ρ̄² from the ρ_ε and
    /// (ρ_ε² − ρ̄²) terms of 𝕊, with K, M from a0_parts
    double p1_asymptotic = 0.0;
    /// leading-order strain part 2ε Φ_νν(x₀) ∫ y₁ Re(i ∂W/∂y₁ ∂W̄/∂y₂) dy of the
    /// (∇Φ_ε − b e₂)·∇W term, along the increasing-θ tangent
    double p1_strain = 0.0;
};

struct ProjectionDiagnostics {
    std::vector<ProjectionPoint> points;
    std::vector<double> boundary_points;  ///< θ per point
    std::vector<double> lambda0, lambda1, tangential_derivative;
    double A0_estimate = 0.0;  ///< median of the per-point quadratures
    double noise_floor = 0.0;  ///< grid-scale roughness of ∂_τ|∇Φ^δ|²
};

/// A₀ = 2∫|∂W/∂y₂|² + ∫ y₂ S(1 − S²) ∂S/∂y₂ over the half-plane for W(y) = U_c(ρ̄y).
double a0_quadrature(const TravelingWave& wave, double rho_bar);

/// K = ∫|∂U/∂ȳ₂|² dȳ and M = ∫ ȳ₂ S(1 − S²) ∂S/∂ȳ₂ dȳ over the wave box, so
/// that A₀ = 2K + M/ρ̄².
std::pair<double, double> a0_parts(const TravelingWave& wave);

/// λ₀, λ₁ per boundary column: least-squares coefficients of 𝕊[W] against
/// Z_j = z_j/(1 + |y|⁴), z₀ = iW, z₁ = ∂W/∂y₂, in the pairing Re∫ f ḡ over the
/// fluid. 𝕊[W] uses the computed ρ_ε, Φ_ε. Throws GramSingular when the Gram
/// matrix has condition number above 1e12. λ₁ is reported along the
/// increasing-θ tangent, like the tangential derivative.
ProjectionDiagnostics lambda_projections(const VortexFreeSolution& vf, const FlowSolution& flow,
                                         const std::vector<TravelingWave>& waves,
                                         const std::vector<std::size_t>& columns);

/// Gauge multiplier λ₀ of a converged solution: the Z₀-coefficient of its
/// residual in the frame of `column`.
double lambda0_at_solution(const GPSolution& sol, const FlowSolution& flow, std::size_t column);

struct NucleationReport {
    double epsilon = 0.0, delta = 0.0;
    BoundaryCondition bc = BoundaryCondition::Neumann;
    GPSolution vortex_free;
    std::optional<GPSolution> vortex_branch;
    std::string vortex_failure;  ///< why the vortex branch is missing
    double distinctness = 0.0;   ///< L² distance between the branches
    std::vector<Extremum> predicted_sites;
    std::optional<VortexSeed> seed;
    std::vector<Vortex> observed_sites;
    double core_modulus = 1.0;        ///< min |u| at the observed core nearest the site
    double core_to_site = 0.0;        ///< distance from that core to the predicted core
    double core_to_boundary = 0.0;    ///< normal distance of that core to ∂Ω
    double lambda0 = 0.0;             ///< λ₀ at the vortex solution (or the vortex-free one)
    bool degenerate = false;          ///< no extrema (δ = 0)
};

/// Solves the vortex-free branch from the assembled u_ε and, unless the trace
/// is constant, a vortex branch seeded at the first maximum of |∇Φ^δ|² on ∂Ω.
NucleationReport nucleation_report(const FlowSolution& flow, const VortexFreeSolution& vf,
                                   const std::vector<TravelingWave>& waves, double epsilon, BoundaryCondition bc,
                                   const NewtonConfig& cfg = default_gp_newton());

/// Discrete L²(x) distance over the fluid.
double l2_distance(const Grid2D& g, const CVec& a, const CVec& b);

}  // namespace gpob
