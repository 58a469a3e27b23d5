#pragma once

#include "hairadapt/adaptation.hpp"

namespace hairadapt {

/// Root position followed by 8 points resampled uniformly by arc length
/// (27 values per strand).
constexpr int kDescriptorPoints = 8;
using StrandDescriptor = Eigen::Matrix<double, 3 * (kDescriptorPoints + 1), 1>;

StrandDescriptor strand_descriptor(const Hairstyle& hair, std::size_t strand);
std::vector<StrandDescriptor> strand_descriptors(const Hairstyle& hair);
std::uint64_t descriptor_hash(const std::vector<StrandDescriptor>& descriptors);

struct GuideSelection {
    /// Sorted strand indices of the medoids.
    std::vector<std::uint32_t> guides;
    /// Medoid (position in `guides`) of every strand.
    std::vector<std::uint32_t> assignment;
    /// Sum of descriptor distances to the assigned medoid.
    double cost = 0.0;
    std::uint64_t hash = 0;
};

/// Seeded k-medoids over strand descriptors: farthest-point seeding,
/// alternating assignment/medoid updates, then a swap phase when the
/// problem is small.
GuideSelection select_guides(const Hairstyle& source, int n_guides, std::uint64_t seed = 0);

/// Total descriptor distance of every strand to its nearest medoid.
double medoid_cost(const std::vector<StrandDescriptor>& descriptors, std::span<const std::uint32_t> medoids);

/// Strands not in `guides`, ascending.
std::vector<std::uint32_t> normal_strands(std::size_t strand_count, std::span<const std::uint32_t> guides);

/// Particle indices of the given strands, in strand order.
std::vector<std::uint32_t> particles_of(const Hairstyle& hair, std::span<const std::uint32_t> strands);

/// Neighbourhoods of normal particles drawn only from guide particles.
LaplacianFeatureSet build_decoupled_features(const Hairstyle& source, std::span<const std::uint32_t> guides, int k);

struct CoarseResult {
    /// Adapted positions of the guide sub-hairstyle (guide order).
    Points positions;
    SolverReport report;
};

/// Coupled adaptation restricted to the guides, with guide-to-guide
/// neighbourhoods. `initial`, `gamma` and `root_targets` are indexed by
/// particles of the full hairstyle.
CoarseResult coarse_solve(const Hairstyle& source, std::span<const std::uint32_t> guides, const Points& initial,
                          const MeshQuery& target, const AdaptationConfig& config, ParticleWeightsView gamma = {},
                          const std::map<std::uint32_t, Vec3>* root_targets = nullptr,
                          const ProgressCallback& progress = {});

struct FineReport {
    std::size_t strands = 0;
    std::size_t converged = 0;
    int max_outer_iterations = 0;
    /// Strands that fell back to the initial transfer, with the reason.
    std::vector<std::pair<std::uint32_t, std::string>> failures;
    double wall_seconds = 0.0;
};

/// Independent per-strand adaptation of the normal strands against fixed
/// guide positions held in `positions` (full hairstyle indexing). Writes the
/// normal strands of `positions` in place.
FineReport fine_solve(const Hairstyle& source, std::span<const std::uint32_t> normals,
                      const LaplacianFeatureSet& decoupled, const Points& initial, const MeshQuery& target,
                      const AdaptationConfig& config, Points& positions, ParticleWeightsView gamma = {},
                      const std::map<std::uint32_t, Vec3>* root_targets = nullptr);

/// Scalar Hessian of the fine stage over all normal particles at `current`
/// (full hairstyle indexing); used to verify that strands decouple.
SparseMatrix fine_stage_hessian(const Hairstyle& source, std::span<const std::uint32_t> normals,
                                const LaplacianFeatureSet& decoupled, const Points& current,
                                const AdaptationConfig& config);

/// Number of nonzeros of `hessian` coupling particles of different strands.
std::size_t cross_strand_nonzeros(const SparseMatrix& hessian, const Hairstyle& hair);

struct MultiscaleResult {
    Points positions;
    GuideSelection guides;
    CoarseResult coarse;
    FineReport fine;
    double coarse_seconds = 0.0;
    double fine_seconds = 0.0;
};

/// Coarse stage on the guides followed by the fine stage. `selection` and
/// `decoupled` may come from a preprocessing cache.
MultiscaleResult multiscale_solve(const Hairstyle& source, const GuideSelection& selection,
                                  const LaplacianFeatureSet& decoupled, const Points& initial,
                                  const MeshQuery& target, const AdaptationConfig& config,
                                  ParticleWeightsView gamma = {},
                                  const std::map<std::uint32_t, Vec3>* root_targets = nullptr,
                                  const ProgressCallback& progress = {});

}  // namespace hairadapt
