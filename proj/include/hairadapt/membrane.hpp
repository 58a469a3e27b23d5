#pragma once

#include "hairadapt/scalp.hpp"

namespace hairadapt {

using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct MembraneMaterial {
    double mu = 1.0;
    double lambda = 1.0;
};

/// Neo-Hookean membrane density with J = sqrt(det(F^T F)); +inf when the
/// metric is degenerate.
double neo_hookean_density(const Mat32& F, const MembraneMaterial& m);
/// First Piola stress dpsi/dF.
Mat32 neo_hookean_stress(const Mat32& F, const MembraneMaterial& m);
/// d vec(P) / d vec(F), column-major vectorization.
Mat6 neo_hookean_stress_derivative(const Mat32& F, const MembraneMaterial& m);

/// Symmetric eigenvalue clamp at `floor`.
Mat6 project_psd(const Mat6& H, double floor = 1e-12);

/// Per scalp vertex: chart coordinates, host head triangle, barycentrics and
/// the embedded 3D position.
struct MembraneState {
    std::vector<Vec2> u;
    std::vector<ChartLocation> host;
    Points x;
};

/// Undeformed state: every vertex sits exactly on its own head vertex.
MembraneState rest_state(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart);

struct DeformationGradient {
    Mat32 F;
    /// d vec(F) / d(u0, u1, u2), constant within the current host triangles.
    Mat6 jacobian;
};

DeformationGradient deformation_gradient(const ScalpPatch& scalp, const ParamChart& chart,
                                         const MembraneState& state, std::uint32_t triangle);

struct MembraneEvaluation {
    double energy = 0.0;
    /// Two entries per scalp vertex.
    Eigen::VectorXd gradient;
    /// Per scalp triangle, w.r.t. the u of its three vertices (unprojected).
    std::vector<Mat6> hessians;
};

/// Sum of area-weighted densities; an element with non-positive chart
/// orientation makes the energy +inf.
MembraneEvaluation membrane_energy(const ScalpPatch& scalp, const ParamChart& chart, const MembraneState& state,
                                   const MembraneMaterial& material, bool with_derivatives = true);

struct MembraneOptions {
    int max_iterations = 100;
    /// Gradient norm tolerance relative to scalp area * mu.
    double gradient_tol = 1e-8;
    int max_halvings = 40;
};

struct MembraneReport {
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double gradient_norm = 0.0;
    double tolerance = 0.0;
    std::vector<double> energy_history;
    std::string diagnostic;
};

/// State with the Dirichlet vertices placed on their targets and every
/// other vertex at rest.
MembraneState boundary_state(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                             const DirichletMap& h);

/// Chart-space harmonic extension of the boundary displacement (cotangent
/// weights of the rest scalp in chart space).
std::vector<Vec2> harmonic_extension(const ScalpPatch& scalp, const ParamChart& chart, const MembraneState& rest,
                                     const DirichletMap& h);

/// Re-embed chart coordinates, keeping the rest host of vertices whose
/// coordinates did not change.
MembraneState embed_coordinates(const ParamChart& chart, const MembraneState& rest, const std::vector<Vec2>& u);

/// Projected Newton with backtracking, started from the harmonic extension.
MembraneState solve_membrane(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                             const DirichletMap& h, const MembraneMaterial& material,
                             const MembraneOptions& options = {}, MembraneReport* report = nullptr);

struct RelocatedRoot {
    SurfacePoint where;  // body face
    Vec3 position;
    double travel = 0.0;
};

/// Roots carried by their rest barycentrics into the deformed scalp vertices
/// and projected onto the head; roots of untouched triangles keep their
/// surface point.
std::vector<RelocatedRoot> relocate_roots(const ScalpPatch& scalp, const HeadPatch& head, const Points& deformed);

enum class Relocator { Membrane, Rbf3d, Rbf2d, Harmonic2d };

std::string to_string(Relocator r);
Relocator parse_relocator(const std::string& name);

/// Deformed scalp vertex positions produced by one relocation method.
Points deform_scalp(Relocator kind, const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                    const DirichletMap& h, const MembraneMaterial& material = {},
                    MembraneReport* report = nullptr);

/// Thin-plate interpolant of vector displacements over seed points (3D
/// kernel r, 2D kernel r^2 log r) with an affine term.
class ThinPlateSpline {
public:
    ThinPlateSpline(const std::vector<Eigen::VectorXd>& seeds, const std::vector<Eigen::VectorXd>& values);
    Eigen::VectorXd operator()(const Eigen::VectorXd& p) const;

private:
    double kernel(double r) const;
    std::vector<Eigen::VectorXd> seeds_;
    Eigen::MatrixXd weights_;  // seeds x dims
    Eigen::MatrixXd affine_;   // (dim + 1) x dims
    int dim_ = 0;
};

}  // namespace hairadapt
