#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gpob/sparse.hpp"

namespace gpob {

enum class ShapeKind { Disk, Ellipse };

struct ObstacleShape {
    ShapeKind kind = ShapeKind::Disk;
    double semi_axis_a = 1.0;  ///< along x₁
    double semi_axis_b = 1.0;  ///< along x₂

    static ObstacleShape disk(double a) { return {ShapeKind::Disk, a, a}; }
    static ObstacleShape ellipse(double a, double b) { return {ShapeKind::Ellipse, a, b}; }
    double max_semi_axis() const { return semi_axis_a > semi_axis_b ? semi_axis_a : semi_axis_b; }
    void validate() const;
    std::string name() const;
};

/// Node-density bump along the boundary parameter: density `factor` inside
/// |θ − center| < half_width, 1 elsewhere, with tanh shoulders of width `shoulder`.
struct AngularClustering {
    std::vector<double> centers;
    double factor = 4.0;
    double half_width = 0.3;
    double shoulder = 0.05;
    bool enabled() const { return !centers.empty() && factor != 1.0; }
};

using Vec2 = std::array<double, 2>;

/// Body-fitted exterior grid. Index space is (q, η) = (i, j) with i radial
/// (i = 0 on ∂Ω, i = n_radial − 1 on the far ring) and j angular (periodic).
/// Coordinates are orthogonal: polar for the disk, confocal elliptic for the
/// ellipse. Node k = i·n_angular + j.
class Grid2D {
public:
    Grid2D(ObstacleShape shape, std::size_t n_radial, std::size_t n_angular, double r_far, double radial_stretch,
           AngularClustering clustering = {});

    const ObstacleShape& shape() const noexcept { return shape_; }
    std::size_t n_radial() const noexcept { return ni_; }
    std::size_t n_angular() const noexcept { return nj_; }
    std::size_t size() const noexcept { return ni_ * nj_; }
    double r_far() const noexcept { return r_far_; }
    double radial_stretch() const noexcept { return stretch_; }
    const AngularClustering& clustering() const noexcept { return clustering_; }

    std::size_t index(std::size_t i, std::size_t j) const noexcept { return i * nj_ + j; }
    std::size_t jp(std::size_t j) const noexcept { return j + 1 == nj_ ? 0 : j + 1; }
    std::size_t jm(std::size_t j) const noexcept { return j == 0 ? nj_ - 1 : j - 1; }

    /// Radial coordinate (r for the disk, μ for the ellipse) of ring i.
    double xi(std::size_t i) const { return xi_[i]; }
    /// Boundary parameter of column j (polar or elliptic angle).
    double theta(std::size_t j) const { return theta_[j]; }
    const std::vector<double>& thetas() const noexcept { return theta_; }

    double x1(std::size_t k) const { return x1_[k]; }
    double x2(std::size_t k) const { return x2_[k]; }
    const std::vector<double>& x1s() const noexcept { return x1_; }
    const std::vector<double>& x2s() const noexcept { return x2_; }
    double radius(std::size_t k) const;

    /// Physical position for continuous radial coordinate ξ and angle θ.
    Vec2 map(double xi, double theta) const;

    /// Control-volume measure (area) of node k; boundary and far rings carry half cells.
    double cell_area(std::size_t k) const { return area_[k]; }
    /// Nodal Jacobian h_q·h_η of the index map.
    double jacobian(std::size_t k) const { return jac_[k]; }
    /// Face coefficient h_η/h_q on the face between rings i and i+1 at column j.
    double face_q(std::size_t i, std::size_t j) const { return fq_[i * nj_ + j]; }
    /// Face coefficient h_q/h_η on the face between columns j and j+1 at ring i.
    double face_eta(std::size_t i, std::size_t j) const { return fe_[i * nj_ + j]; }
    /// Scale factors |∂x/∂q| and |∂x/∂η| at node k.
    double h_q(std::size_t k) const { return hq_[k]; }
    double h_eta(std::size_t k) const { return he_[k]; }

    /// Unit normal at boundary column j pointing into the fluid.
    Vec2 boundary_normal(std::size_t j) const;
    /// Unit tangent at boundary column j in the direction of increasing θ.
    Vec2 boundary_tangent(std::size_t j) const;
    /// Arc length from ∂Ω along the grid line of column j to ring i.
    double normal_distance(std::size_t i, std::size_t j) const { return dist_[i * nj_ + j]; }
    /// Spacing of the first radial cell (physical), minimized over columns.
    double min_first_spacing() const;
    /// Boundary arc spacing between columns j and j+1.
    double boundary_arc(std::size_t j) const;

    /// Discrete metric terms (∂x₁/∂q, ∂x₂/∂q, ∂x₁/∂η, ∂x₂/∂η) from the same
    /// difference stencils that the gradient uses.
    double dx1_dq(std::size_t k) const { return mq1_[k]; }
    double dx2_dq(std::size_t k) const { return mq2_[k]; }
    double dx1_deta(std::size_t k) const { return me1_[k]; }
    double dx2_deta(std::size_t k) const { return me2_[k]; }
    double discrete_jacobian(std::size_t k) const { return mjac_[k]; }

    /// Compact Laplacian of the coordinates (Δ_h x₁, Δ_h x₂) at node k, zero on
    /// the first and last rings. Subtracting ∇_h f · this from Δ_h f makes the
    /// operator exact on linear functions.
    Vec2 freestream_defect(std::size_t k) const { return {ell1_[k], ell2_[k]}; }

private:
    double xi_of_q(double q) const;
    double dxi_dq(double q) const;
    double theta_of_eta(double eta) const;
    double dtheta_deta(double theta) const;
    double density_integral(double theta) const;
    double density(double theta) const;
    double h_xi(double xi, double theta) const;
    double h_theta(double xi, double theta) const;

    ObstacleShape shape_;
    std::size_t ni_, nj_;
    double r_far_, stretch_;
    AngularClustering clustering_;
    double xi0_ = 0, xi_far_ = 0, dxi0_ = 0, focal_ = 0;
    double density_total_ = 0;
    std::vector<double> xi_, theta_, x1_, x2_, area_, jac_, fq_, fe_, hq_, he_, dist_;
    std::vector<double> mq1_, mq2_, me1_, me2_, mjac_;
    std::vector<double> ell1_, ell2_;
};

Grid2D build_exterior_grid(const ObstacleShape& shape, std::size_t n_radial, std::size_t n_angular, double r_far,
                           double radial_stretch, const AngularClustering& clustering = {});

/// Derivatives in index space: second-order central in the interior,
/// second-order one-sided on the first and last rings, periodic in η.
double diff_q(const Grid2D& g, std::span<const double> f, std::size_t i, std::size_t j);
double diff_eta(const Grid2D& g, std::span<const double> f, std::size_t i, std::size_t j);

/// Stencil weights of diff_q at (i, j): up to three (ring index, weight) pairs.
struct QStencil {
    std::array<std::size_t, 3> ring;
    std::array<double, 3> weight;
};
QStencil q_stencil(const Grid2D& g, std::size_t i);

/// Weights of the nodal gradient: (∇f)_k = Σ_t (w1[t], w2[t]) f[node[t]].
struct GradientStencil {
    std::array<std::size_t, 5> node{};
    std::array<double, 5> w1{}, w2{};
    int n = 0;
};
GradientStencil gradient_stencil(const Grid2D& g, std::size_t i, std::size_t j);

/// Weights of ∇_h f·(Δ_h x₁, Δ_h x₂) at an interior node (ring 1..n−2).
struct DefectStencil {
    std::array<std::size_t, 4> node{};
    std::array<double, 4> w{};
};
DefectStencil defect_stencil(const Grid2D& g, std::size_t i, std::size_t j);

/// Calls visit(neighbour, c) for the four faces of control volume (i, j) with
/// c the face coefficient (η faces halved on the first and last rings).
template <class Visit>
void visit_faces(const Grid2D& g, std::size_t i, std::size_t j, Visit&& visit) {
    const std::size_t ni = g.n_radial();
    const double w = (i == 0 || i + 1 == ni) ? 0.5 : 1.0;
    if (i + 1 < ni) visit(g.index(i + 1, j), g.face_q(i, j));
    if (i > 0) visit(g.index(i - 1, j), g.face_q(i - 1, j));
    visit(g.index(i, g.jp(j)), w * g.face_eta(i, j));
    visit(g.index(i, g.jm(j)), w * g.face_eta(i, g.jm(j)));
}

/// ∇f at every node (x₁ and x₂ components).
struct VectorField {
    Vec c1, c2;
};
VectorField gradient(const Grid2D& g, std::span<const double> f);
Vec divergence(const Grid2D& g, const VectorField& F);
/// |∇f|² at every node.
Vec grad_squared(const Grid2D& g, std::span<const double> f);

enum class FluxForm {
    Conservative,          ///< pure face-flux sums
    FreestreamPreserving,  ///< minus κ ∇_h f·(Δ_h x₁, Δ_h x₂) on interior rings
};

/// Compact flux-form operator ∇·(κ∇f) with face κ the mean of nodal values,
/// natural (zero-flux) rows on ∂Ω and the far ring included. Returns the
/// value per node divided by the control-volume area.
Vec flux_operator(const Grid2D& g, std::span<const double> kappa, std::span<const double> f,
                  FluxForm form = FluxForm::FreestreamPreserving);
/// Matrix of the same operator for fixed κ, rows scaled by 1/area.
SparseMatrix flux_operator_matrix(const Grid2D& g, std::span<const double> kappa,
                                  FluxForm form = FluxForm::FreestreamPreserving);
/// Compact Laplacian (κ ≡ 1) applied to f.
Vec laplacian(const Grid2D& g, std::span<const double> f, FluxForm form = FluxForm::FreestreamPreserving);
CVec laplacian(const Grid2D& g, const CVec& f, FluxForm form = FluxForm::FreestreamPreserving);

/// Discrete outward flux Σ_j face_q κ (f_{I+1,j} − f_{I,j}) through the face
/// between rings I and I+1 (contour integral of κ ∂f/∂n).
double ring_flux(const Grid2D& g, std::span<const double> kappa, std::span<const double> f, std::size_t ring);

/// Tangential derivative ∂_τ of a boundary trace (values per boundary column).
Vec tangential_derivative(const Grid2D& g, std::span<const double> trace);

/// Values of ring 0.
Vec boundary_values(const Grid2D& g, std::span<const double> f);

enum class ExtremumKind { Max, Min };

struct Extremum {
    std::size_t index;
    double theta;
    double value;
    ExtremumKind kind;
};

struct BoundaryTrace {
    std::vector<double> angles;
    std::vector<double> values;
    std::vector<Extremum> extrema;
    bool is_constant = false;

    std::vector<Extremum> maxima() const;
    std::vector<Extremum> minima() const;
};

/// Periodic discrete extrema. Plateaus count once (their smallest-θ node);
/// extremum pairs whose value difference is below `prominence` are merged.
BoundaryTrace boundary_trace(std::span<const double> angles, std::span<const double> values,
                             double prominence = 0.0);

/// Binary dump: "GPOB", u32 version = 1, u32 n_radial, u32 n_angular,
/// u8 is_complex, then little-endian f64 values (complex interleaved).
void write_field_binary(const std::string& path, std::size_t n_radial, std::size_t n_angular,
                        std::span<const double> values);
void write_field_binary(const std::string& path, std::size_t n_radial, std::size_t n_angular, const CVec& values);

struct FieldDump {
    std::size_t n_radial = 0, n_angular = 0;
    bool is_complex = false;
    Vec real;    ///< real fields
    CVec cplx;   ///< complex fields
};
FieldDump read_field_binary(const std::string& path);

}  // namespace gpob
