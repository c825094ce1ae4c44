#pragma once

#include <optional>
#include <string>

#include "gpob/continuation.hpp"
#include "gpob/gl_vortex.hpp"
#include "gpob/newton.hpp"

namespace gpob {

/// Dirichlet data on the three outer edges: U = 1, or the pair phase
/// V_d/|V_d| of point vortices at (±d, 0).
struct FarFieldClosure {
    double pair_d = 0.0;  ///< 0 selects U = 1

    static FarFieldClosure unit() { return {}; }
    static FarFieldClosure pair_phase(double d) { return {d}; }
    std::complex<double> value(double y1, double y2) const;
};

/// ΔU + ic ∂U/∂y₂ + U(1 − |U|²) on the half-plane grid, with the mirror
/// condition U(−h, y₂) = U(h, y₂) on y₁ = 0 and Dirichlet data on the three
/// outer edges. Unknowns are the non-Dirichlet nodes, interleaved (Re, Im).
/// With `reflect` the unknowns are restricted to y₂ ≥ 0 and the lower half is
/// U(y₁, −y₂) = conj U(y₁, y₂), so Im U = 0 on y₂ = 0.
struct TravelingWaveDiscretization {
    HalfPlaneGrid grid;
    double c = 0.0;
    FarFieldClosure closure;
    bool reflect = false;

    TravelingWaveDiscretization(const HalfPlaneGrid& g, double c, FarFieldClosure closure = {}, bool reflect = false);

    std::size_t n_unknowns() const { return 2 * node_of_.size(); }
    /// Grid node of unknown slot s (the complex unknown s/2).
    std::size_t node(std::size_t s) const { return node_of_[s / 2]; }
    /// Real slot of a grid node (its Re part), or npos for Dirichlet nodes.
    std::size_t slot(std::size_t k) const { return slot_of_[k] == npos ? npos : 2 * slot_of_[k]; }
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    Vec pack(const CVec& field) const;
    CVec unpack(const Vec& x) const;  ///< Dirichlet nodes carry the closure data

    Vec residual(const Vec& x) const;
    /// Real-linear Jacobian, which is the discrete 𝕃₀ at x.
    SparseMatrix jacobian(const Vec& x) const;

private:
    std::vector<std::size_t> node_of_, slot_of_;
    CVec boundary_;
    std::size_t j_mid_ = 0;
};

/// Pointwise residual on every node (zero on Dirichlet nodes).
CVec traveling_wave_residual(const HalfPlaneGrid& g, double c, const CVec& U);

/// 𝕃₀z = Δz + ic ∂₂z + (1 − |U|²)z − 2 Re(Ū z) U on non-Dirichlet nodes, with
/// z given on every node.
CVec linearized_apply(const HalfPlaneGrid& g, double c, const CVec& U, const CVec& z);

struct TravelingWave {
    double c = 0.0;
    HalfPlaneGrid grid;
    CVec field;
    double d_c = 0.0;
    double residual_norm = 0.0;
    int newton_iterations = 0;
    VortexSet vortices;
    Vec S, phi;  ///< |U| and arg U
    double momentum = 0.0;  ///< Im ∫ (Ū − 1) ∂₂U over the half-plane
    FarFieldClosure closure;
};

NewtonConfig default_wave_newton();

/// Rebuilds a wave from a stored field: recomputes |U|, arg U, momentum and
/// the vortex census. Solver statistics stay zero.
TravelingWave wave_from_field(double c, const HalfPlaneGrid& g, CVec field, FarFieldClosure closure = {});

/// Bilinear value of the wave at (y₁, y₂), extended evenly to y₁ < 0 and by
/// U = 1 outside the box.
std::complex<double> sample_wave(const TravelingWave& w, double y1, double y2);

/// ∂U/∂y₂ on the nodes (one-sided on the j edges).
CVec wave_d2(const TravelingWave& w);

/// Newton solve from `seed` in the reflection-symmetric class. With
/// `expect_vortex` a converged field without a vortex raises VortexEscape.
TravelingWave solve_traveling_wave(double c, const CVec& seed, const HalfPlaneGrid& g,
                                   const NewtonConfig& cfg = default_wave_newton(), bool expect_vortex = true,
                                   FarFieldClosure closure = {});

/// Pair ansatz V_d on the grid with the closure data on the outer edges.
CVec wave_seed(const VortexProfile& p, double d, const HalfPlaneGrid& g, FarFieldClosure closure = {});

struct WaveBranch {
    std::vector<TravelingWave> waves;
    BranchStatus status = BranchStatus::Completed;
    double c_end_observed = 0.0;  ///< last converged speed
    double c_failed = 0.0;
    std::string termination;
    /// sup of c·d_c over the samples with c ≤ 0.3
    double small_c_bound = 0.0;
};

/// Continues in c from c_start toward c_end. Each step is seeded with the
/// previous wave rescaled by c_old/c_new about the origin. Ends at BranchEnd when Newton fails at the minimum step or
/// the cores merge (d_c < 2h). With `pair_closure` the outer data at speed c
/// is FarFieldClosure::pair_phase(1/c), otherwise U = 1. The first seed is
/// V_d with d = seed_d (default 1/c_start).
WaveBranch continuation_in_c(double c_start, double c_end, const HalfPlaneGrid& g, const VortexProfile& p,
                             const ContinuationConfig& ccfg, const NewtonConfig& ncfg = default_wave_newton(),
                             std::optional<double> seed_d = std::nullopt, bool pair_closure = true);

struct ReducedCurve {
    double epsilon = 0.0;
    std::vector<double> d;
    std::vector<double> c_proj;
    /// c_proj = ε·speed_coeff − interaction at each d
    std::vector<double> speed_coeff, interaction;
    double c1 = 0.0, c2 = 0.0;  ///< fit c_proj ≈ c₁ε − c₂/d
    double fit_residual = 0.0;  ///< max relative deviation of the fit
    double d_star = 0.0;        ///< c₂/(c₁ε)
    double interaction_slope = 0.0;  ///< log-log slope of c₁ε − c_proj against d
};

/// Projection c_proj(d) = ⟨𝕊₀[V_d], ∂V_d/∂d⟩/‖∂V_d/∂d‖² of the unperturbed
/// ansatz residual, with the real pairing Re∫ f ḡ over the half-plane box.
ReducedCurve reduced_speed_curve(double epsilon, const std::vector<double>& d_samples, const HalfPlaneGrid& g,
                                 const VortexProfile& p);

/// c_proj at a single separation.
double projected_speed(double epsilon, double d, const HalfPlaneGrid& g, const VortexProfile& p);

struct SpectralReport {
    double c = 0.0;
    double smallest_sv_constrained = 0.0;
    double smallest_sv = 0.0;  ///< without the constraint
    double kernel_residual_gauge = 0.0;        ///< ‖𝕃₀(iU)‖/‖iU‖
    double kernel_residual_translation = 0.0;  ///< ‖𝕃₀ ∂₂U‖/‖∂₂U‖
    int iterations = 0;
};

SpectralReport nondegeneracy_spectrum(const TravelingWave& wave, int max_iters = 300, double tol = 1e-9);

struct DecayExponents {
    double grad_S = 0.0, grad_phi = 0.0, U_minus_1 = 0.0;
    double r_min = 0.0, r_max = 0.0;
};

/// Slopes of log(max over a radial bin) against log|y| on [2d_c, 0.8·min(L1, L2)].
DecayExponents decay_fit(const TravelingWave& wave);

}  // namespace gpob
