#pragma once

#include "hairadapt/energies.hpp"
#include "hairadapt/qp_solver.hpp"

#include "json.hpp"

#include <functional>
#include <string>

namespace hairadapt {

/// Switches for ablation runs; a disabled term gets weight zero.
struct EnergyToggles {
    bool strand_shape = true;
    bool inter_strand = true;
    bool hair_body = true;
};

/// One constrained adaptation: the strand layout and source geometry of
/// `topology`, an initializer that doubles as the hair-body anchor, constant
/// inter-strand and hair-body rows, and fixed root targets.
struct AdaptationProblem {
    const Hairstyle* topology = nullptr;
    Points initial;
    ResidualSet inter_rows;
    ResidualSet body_rows;
    std::map<std::uint32_t, Vec3> root_targets;
    const MeshQuery* target = nullptr;
    AdaptationConfig config;
    EnergyToggles toggles;
};

/// Coupled problem over a whole hairstyle. Roots default to the
/// initializer's roots; `gamma` weights the inter-strand and hair-body terms.
AdaptationProblem make_problem(const Hairstyle& source, const Points& initial, const LaplacianFeatureSet& features,
                               const MeshQuery& target, const AdaptationConfig& config,
                               ParticleWeightsView gamma = {},
                               const std::map<std::uint32_t, Vec3>* root_targets = nullptr);

struct ObjectiveTerms {
    double strand_shape = 0.0;
    double inter_strand = 0.0;
    double hair_body = 0.0;
    /// Weighted sum of the enabled terms.
    double total = 0.0;
};

ObjectiveTerms evaluate_objective(const AdaptationProblem& problem, const Points& p);

struct OuterIterate {
    double objective = 0.0;
    double displacement = 0.0;
    double max_violation = 0.0;
    int admm_iterations = 0;
    bool qp_converged = false;
    bool polished = false;
};

struct SolverReport {
    int outer_iterations = 0;
    double initial_objective = 0.0;
    std::vector<OuterIterate> history;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double max_violation = 0.0;
    double tol_outer = 0.0;
    double wall_seconds = 0.0;
    bool converged = false;
    bool diverged = false;
    /// Why the loop stopped short of the outer tolerance.
    std::string diagnostic;

    double final_objective() const { return history.empty() ? initial_objective : history.back().objective; }
};

nlohmann::json to_json(const SolverReport& report);

struct AdaptationResult {
    Points positions;
    SolverReport report;
};

/// Called after each outer iteration with (iteration, max_outer).
using ProgressCallback = std::function<void(int, int)>;

QpSettings qp_settings(const AdaptationConfig& config);

/// Relinearize and solve until the outer displacement falls below
/// tol_outer_rel * (bounding-box diagonal of the source) and the rows rebuilt
/// at the iterate are satisfied.
AdaptationResult iterate_adaptation(const AdaptationProblem& problem, const ProgressCallback& progress = {});

}  // namespace hairadapt
