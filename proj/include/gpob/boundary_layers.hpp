#pragma once

#include <map>
#include <memory>
#include <string>

#include "gpob/potential_flow.hpp"

namespace gpob {

/// Throws UnderResolved unless every column has at least `min_cells` rings
/// (besides the boundary ring) within normal distance ε of ∂Ω.
void check_layer_resolution(const Grid2D& g, double epsilon, int min_cells = 8);

/// Number of rings i ≥ 1 with normal distance ≤ ε, minimized over columns.
int cells_within(const Grid2D& g, double epsilon);

/// Sign of the volume source in ε²Δρ₁ − 2(ρ^δ)²ρ₁ = ±ε²Δρ^δ. PlusLaplacian is
/// the stated layer equation; MinusLaplacian cancels ε²Δρ^δ in S₁[W₁] so that
/// S₁[W₁] = O(ρ₁²).
enum class LayerRhs { PlusLaplacian, MinusLaplacian };

struct BoundaryLayerField {
    std::shared_ptr<const Grid2D> grid;
    double epsilon = 0.0;
    LayerRhs source = LayerRhs::PlusLaplacian;
    Vec rho1;
    double residual_norm = 0.0;
    // exponential fit ρ₁ − outer ≈ A e^{−κ s} along one column
    std::size_t fit_column = 0;
    double decay_amplitude = 0.0;  ///< A (value at s = 0)
    double decay_rate = 0.0;       ///< κ, per unit length
    double expected_rate = 0.0;    ///< √2 ρ^δ(x₀)/ε
    double expected_amplitude = 0.0;  ///< ε ∂_sρ^δ(x₀)/(√2 ρ^δ(x₀)), s the distance into the fluid
};

NewtonConfig default_layer_newton();

/// Solves ε²Δρ₁ − 2(ρ^δ)²ρ₁ = ±ε²Δρ^δ in the interior with ∂ρ₁/∂ν = −∂ρ^δ/∂ν
/// (the natural rows of the total density ρ^δ + ρ₁) and ρ₁ = 0 on the far
/// ring. ρ^δ is the flow amplitude. The fit column defaults to the first
/// maximum of the boundary speed.
BoundaryLayerField solve_rho1(const FlowSolution& flow, double epsilon,
                              const NewtonConfig& cfg = default_layer_newton(),
                              std::optional<std::size_t> fit_column = std::nullopt,
                              LayerRhs source = LayerRhs::PlusLaplacian);

/// Fits ρ₁ − ρ₁^outer ≈ A e^{−κ s} on rings 1.. with s ≤ 2ε along column j, where
/// ρ₁^outer = ∓ε²Δρ^δ/(2(ρ^δ)²) is the smooth particular solution.
std::pair<double, double> fit_layer_decay(const FlowSolution& flow, const Vec& rho1, double epsilon, std::size_t j,
                                          LayerRhs source = LayerRhs::PlusLaplacian);

struct ResidualReport {
    Vec S1;  ///< ε²Δρ + ρ(1 − ρ² − |∇Φ|²), zero on the far ring
    Vec S2;  ///< ∇·(ρ²∇Φ), zero on the far ring
    double sigma = 0.5;
    double gamma = 0.5;  ///< recorded only
    std::map<std::string, double> weighted_norms;
};

/// Pointwise Madelung operators and their norms in the rescaled variable y = x/ε:
/// sup_S1, sup_S2, l2_S1 (‖S₁‖_{L²(y)}), l2_eS2 and l4_eS2 (for εS₂),
/// wl2_S1 (L²(y) with weight ⟨y⟩^σ), int_S1 and int_S2 (2-norms of the
/// area-integrated rows) and d2_rho (sup of second index differences).
ResidualReport madelung_residual(const Grid2D& g, std::span<const double> rho, std::span<const double> phi,
                                 double epsilon, double sigma = 0.5);

/// Madelung system in integrated form; state interleaves (ρ_k, Φ_k). Far-ring
/// rows pin ρ and Φ to the given data.
struct MadelungDiscretization {
    std::shared_ptr<const Grid2D> grid;
    double epsilon;
    Vec rho_far, phi_far;  ///< per far-ring column

    Vec residual(const Vec& state) const;
    SparseMatrix jacobian(const Vec& state) const;
};

Vec interleave_fields(std::span<const double> a, std::span<const double> b);

struct MadelungFields {
    Vec rho, phi;
};
/// ρ = |u| and Φ = ε·arg u, unwrapped along ring 0 and then outward along
/// every column (edge phase increments must stay below π).
MadelungFields madelung_from_u(const Grid2D& g, const CVec& u, double epsilon);

struct VortexFreeSolution {
    std::shared_ptr<const Grid2D> grid;
    double epsilon = 0.0;
    double delta = 0.0;
    Vec rho_eps, phi_eps;
    CVec u;  ///< ρ_ε e^{iΦ_ε/ε}
    double rho2_norm = 0.0;  ///< ‖ρ_ε − ρ^δ − ρ₁‖∞
    double phi2_norm = 0.0;  ///< ‖(Φ_ε − Φ^δ)/ε‖∞
    double residual_norm = 0.0;
    int newton_iterations = 0;
    bool polished = false;
};

NewtonConfig default_polish_newton();

/// W₁ = (ρ^δ + ρ₁, Φ^δ), optionally Newton-polished on the full Madelung system.
/// Throws VortexContamination when min ρ_ε < ½ min ρ^δ.
VortexFreeSolution assemble_vortex_free(const FlowSolution& flow, const BoundaryLayerField& layer, double epsilon,
                                        bool polish, const NewtonConfig& cfg = default_polish_newton());

struct DirichletLayer {
    double b = 0.0;
    double L = 0.0;
    Vec y, profile;
    double plateau = 0.0;           ///< √(1 − b²)
    double closed_form_error = 0.0; ///< sup |ρ₀'' + ρ₀(1 − b² − ρ₀²)| with exact derivatives
    double fd_residual = 0.0;       ///< same with second differences on the sample grid

    double operator()(double y) const;
};

/// ρ₀(y) = √(1−b²) tanh(√((1−b²)/2) y) on n samples of [0, L].
DirichletLayer dirichlet_layer(double b, double L, std::size_t n = 4001);

}  // namespace gpob
