#pragma once

#include <memory>
#include <optional>

#include "gpob/continuation.hpp"
#include "gpob/grid.hpp"
#include "gpob/newton.hpp"

namespace gpob {

/// Ellipticity threshold of the flux map s ↦ (1 − s)s at s = |∇Φ|².
inline constexpr double kSonicSpeed2 = 1.0 / 3.0;

struct FlowParams {
    double delta = 0.0;    ///< far-field speed along e₂
    double epsilon = 0.1;  ///< carried for downstream stages
    void validate() const;
};

struct FlowSolution {
    std::shared_ptr<const Grid2D> grid;
    double delta = 0.0;
    Vec phi;        ///< Φ^δ
    Vec speed2;     ///< |∇Φ^δ|²
    Vec rho;        ///< 1 − |∇Φ^δ|²
    Vec amplitude;  ///< √(1 − |∇Φ^δ|²), the Madelung modulus of the vortex-free state
    double dipole = 0.0;  ///< far-field dipole strength D
    double residual_norm = 0.0;
    double max_boundary_speed2 = 0.0;
    double sonic_margin = kSonicSpeed2;
    int newton_iterations = 0;
};

/// Far-field closure Φ = δx₂ + D·x₂/(x₁² + k x₂²), k = (1 − δ²)/(1 − 3δ²).
double farfield_shape(double delta, double x1, double x2);

/// Incompressible potential δ(r + a²/r) sin θ around a disk of radius a.
double incompressible_disk_potential(double delta, double a, double x1, double x2);

/// Discrete residual of ∇·((1 − |∇Φ|²)∇Φ) in integrated (flux-sum) form on
/// rings 0..n−2 plus the far-field rows; the state is (Φ, D).
struct FlowDiscretization {
    std::shared_ptr<const Grid2D> grid;
    double delta;

    Vec residual(const Vec& state) const;
    SparseMatrix jacobian(const Vec& state) const;
    /// Initial state from a potential field (D fitted on ring n−2).
    Vec state_from_phi(const Vec& phi) const;
};

/// Newton settings used by the flow solver unless overridden.
NewtonConfig default_flow_newton();

/// Incompressible potential around the obstacle (exact for disk and ellipse).
Vec incompressible_potential(const Grid2D& grid, double delta);

/// Newton solve seeded by `seed` (default: the incompressible potential).
/// Throws EllipticityLoss as soon as an iterate reaches |∇Φ|² ≥ 1/3.
FlowSolution solve_potential_flow(std::shared_ptr<const Grid2D> grid, const FlowParams& params,
                                  const std::optional<Vec>& seed = std::nullopt,
                                  const NewtonConfig& cfg = default_flow_newton());

struct SonicSample {
    double delta;
    double max_boundary_speed2;
    bool converged;
};

struct SonicReport {
    std::vector<SonicSample> samples;
    double delta_lo = 0.0;
    double delta_hi = 0.0;
    bool bracketed = false;  ///< false when the sweep reached delta_max without failure
    std::string failure;
    std::vector<FlowSolution> solutions;  ///< converged states in sweep order (optional)
};

/// δ-continuation from 0 until the corrector fails. The last converged and
/// first failed δ bracket δ*.
SonicReport sonic_continuation(std::shared_ptr<const Grid2D> grid, double delta_max, const ContinuationConfig& cfg,
                               const NewtonConfig& newton_cfg = default_flow_newton(), bool keep_solutions = false);

/// c = 2√b2 / √(1 − b2).
double local_mach_speed(double b2);

struct FarfieldDecay {
    double exponent_phi = 0.0;
    double exponent_rho = 0.0;
    bool skipped = false;  ///< δ = 0: deviations vanish identically
};

/// Log-log slopes of max‖∇Φ − δe₂‖ and max|ρ − (1 − δ²)| per ring against r
/// over rings with r ∈ [R_far/4, R_far) excluding the closure ring.
FarfieldDecay farfield_decay_check(const FlowSolution& sol);

struct BoundaryExtrema {
    BoundaryTrace trace;     ///< |∇Φ^δ|² on ∂Ω
    Vec tangential_derivative;  ///< ∂_τ|∇Φ^δ|² per boundary node
};

BoundaryExtrema boundary_extrema(const FlowSolution& sol, double relative_prominence = 1e-6);

}  // namespace gpob
