#pragma once

#include "hairadapt/model_io.hpp"
#include "hairadapt/spatial.hpp"

#include <Eigen/SparseCore>

#include <map>
#include <optional>

namespace hairadapt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double>;

/// Per-particle cross-strand neighbourhoods with inverse-distance weights and
/// the reference feature sum_j w_j (p_i - p_j) measured on the source.
/// Stored as CSR: particle i owns entries [offsets[i], offsets[i+1]).
struct LaplacianFeatureSet {
    int k = 0;
    std::vector<std::uint32_t> offsets{0};
    std::vector<std::uint32_t> neighbors;
    std::vector<double> weights;
    std::vector<Vec3> reference;
    /// Particles that received fewer than k neighbours.
    std::vector<std::uint32_t> sparse;

    std::size_t particle_count() const { return offsets.size() - 1; }
    bool has_feature(std::size_t i) const { return offsets[i + 1] > offsets[i]; }
    bool empty() const { return neighbors.empty(); }
};

/// Inverse-distance weights normalized to sum to one.
std::vector<double> laplacian_weights(std::span<const double> distances);

/// k nearest particles from other strands for every particle, weights and
/// reference features on the source. A single-strand hairstyle yields an
/// empty set.
LaplacianFeatureSet build_knn_features(const Hairstyle& source, int k);

/// Features for the `queries` particles using only `candidates` as
/// neighbours (still excluding the query's own strand). Particles not listed
/// in `queries` get no feature.
LaplacianFeatureSet build_restricted_features(const Hairstyle& source, std::span<const std::uint32_t> queries,
                                              std::span<const std::uint32_t> candidates, int k);

/// Recompute reference features from positions and the stored neighbourhoods.
void refresh_reference(LaplacianFeatureSet& features, const Points& source_positions);

/// Quadratic energy sum_r w_r |sum_j c_rj p_j - t_r|^2 stored as CSR rows.
/// Every energy of the adaptation objective is assembled into this form.
class ResidualSet {
public:
    void add_row(std::span<const std::pair<std::uint32_t, double>> coefficients, const Vec3& target, double weight);
    void append(const ResidualSet& other);

    std::size_t rows() const { return weights_.size(); }
    double energy(const Points& p) const;
    /// Per-row weighted squared residuals.
    std::vector<double> row_energies(const Points& p) const;
    /// dE/dp for every particle.
    Points gradient(const Points& p) const;
    /// Scale every row weight.
    void scale(double factor);

    std::span<const std::uint32_t> row_columns(std::size_t r) const;
    std::span<const double> row_coefficients(std::size_t r) const;
    const Vec3& target(std::size_t r) const { return targets_[r]; }
    double weight(std::size_t r) const { return weights_[r]; }
    /// Particle a row is attributed to in per-particle reports.
    std::uint32_t owner(std::size_t r) const { return owners_[r]; }
    void set_owner(std::size_t r, std::uint32_t particle) { owners_[r] = particle; }

private:
    std::vector<std::uint32_t> offsets_{0};
    std::vector<std::uint32_t> columns_;
    std::vector<double> coefficients_;
    std::vector<Vec3> targets_;
    std::vector<double> weights_;
    std::vector<std::uint32_t> owners_;
};

/// Per-particle weights (gamma); an empty span means all ones.
using ParticleWeightsView = std::span<const double>;

struct StrandShapeTerms {
    ResidualSet rows;
    /// Particles whose current segment was shorter than 1e-9 m; their
    /// denominator falls back to the source length.
    std::vector<std::uint32_t> flagged;
};

/// Direction-preservation rows with segment lengths frozen at p_current.
StrandShapeTerms strand_shape_terms(const Points& p_current, const Hairstyle& source);
/// Nonlinear direction energy with actual segment lengths.
double strand_shape_energy(const Points& p, const Hairstyle& source);

ResidualSet inter_strand_terms(const LaplacianFeatureSet& features, ParticleWeightsView gamma = {});
/// Decoupled variant: neighbours are constants taken from `neighbor_positions`
/// and only the query particle is a variable. Columns are remapped through
/// `local_index` (global particle -> local variable index).
ResidualSet decoupled_inter_strand_terms(const LaplacianFeatureSet& features, const Points& neighbor_positions,
                                         std::span<const std::uint32_t> particles,
                                         const std::function<std::uint32_t(std::uint32_t)>& local_index,
                                         ParticleWeightsView gamma = {});
double inter_strand_energy(const LaplacianFeatureSet& features, const Points& p, ParticleWeightsView gamma = {});

ResidualSet hair_body_terms(const Points& p_hat, ParticleWeightsView gamma = {});

/// n . p_particle >= offset, i.e. <p - q, n> >= eps_c.
struct HalfSpace {
    std::uint32_t particle;
    Vec3 normal;
    double offset;
    /// <p - q, n> at the iterate the row was built from.
    double clearance;
};

/// One row per non-root particle from the closest target-surface point and its
/// pseudo-normal at p_current. With `cutoff` > 0 only particles whose
/// clearance is below it get a row.
std::vector<HalfSpace> penetration_constraints(const Points& p_current, const Hairstyle& topology,
                                               const MeshQuery& target, double eps_c, double cutoff = 0.0);

/// Largest violation of eps_c over rows rebuilt at p (0 when feasible).
double max_penetration_violation(const Points& p, const Hairstyle& topology, const MeshQuery& target, double eps_c);

/// minimize 1/2 x'Px + q'x + constant over the free particles, coordinates
/// stacked x-block, y-block, z-block. Root particles are eliminated with
/// their targets substituted.
struct QPProblem {
    SparseMatrix P;
    Eigen::VectorXd q;
    double constant = 0.0;
    std::vector<std::uint32_t> free_particles;
    std::map<std::uint32_t, Vec3> root_targets;
    std::vector<HalfSpace> constraints;
    std::size_t particle_count = 0;

    std::size_t free_count() const { return free_particles.size(); }
    Eigen::VectorXd pack(const Points& p) const;
    Points unpack(const Eigen::VectorXd& x) const;
    double objective(const Eigen::VectorXd& x) const;
};

struct WeightedTerms {
    const ResidualSet* rows;
    double scale;
};

QPProblem assemble_qp(std::size_t particle_count, std::span<const WeightedTerms> terms,
                      std::map<std::uint32_t, Vec3> root_targets, std::vector<HalfSpace> constraints);

/// Scalar N x N Hessian sum_r w_r c_r c_r^T of a list of residual sets.
SparseMatrix residual_hessian(std::size_t particle_count, std::span<const WeightedTerms> terms);

}  // namespace hairadapt
