#pragma once

#include "hairadapt/cache.hpp"
#include "hairadapt/metrics.hpp"
#include "hairadapt/tuning.hpp"

#include <filesystem>
#include <memory>

namespace hairadapt {

std::uint64_t hash_hairstyle(const Hairstyle& hair);
std::uint64_t hash_body(const BodyModel& body);

/// Target-agnostic data derived from a source hairstyle and its body.
struct Preprocessed {
    LocalAnchorSet anchors;
    LaplacianFeatureSet features;
    GuideSelection guides;
    LaplacianFeatureSet decoupled;
    CacheManifest manifest;
    double seconds = 0.0;
};

Preprocessed preprocess(const Hairstyle& hair, const BodyModel& body, const AdaptationConfig& config);

/// anchors.anch, features.lapf, decoupled.lapf, guides.json, manifest.json
void save_preprocessed(const Preprocessed& pre, const std::filesystem::path& dir);
/// Throws ValidationError when the caches were built from another hairstyle
/// or with different preprocessing settings.
Preprocessed load_preprocessed(const std::filesystem::path& dir, const Hairstyle& hair, const AdaptationConfig& config);

enum class SolveMode { Multiscale, Global };

struct RetargetOptions {
    SolveMode mode = SolveMode::Multiscale;
    /// Also run the global solve and report the discrepancy and speedup.
    bool compare_global = false;
};

/// Root relocation folded into the adaptation: new root positions of the
/// strands that moved and the per-particle weights.
struct HairlineTuning {
    std::map<std::uint32_t, Vec3> moved_roots;  // strand -> position
    ParticleWeights weights;
    double relocation_seconds = 0.0;
};

struct RetargetOutcome {
    Points positions;
    InitialTransfer transfer;
    /// Global report, or the coarse-stage report in multiscale mode.
    SolverReport report;
    std::optional<FineReport> fine;
    std::optional<RegressionMetrics> global_discrepancy;
    RuntimeReport runtime;
    double max_violation = 0.0;
    std::size_t guide_count = 0;
};

RetargetOutcome retarget(const Hairstyle& source, const Preprocessed& pre, const BodyModel& target,
                         const AdaptationConfig& config, const RetargetOptions& options = {},
                         const HairlineTuning* tuning = nullptr, const ProgressCallback& progress = {});

nlohmann::json to_json(const RetargetOutcome& outcome);

/// Outer iterations and ADMM failures collapse to one status used for exit
/// codes: the run diverged or a QP did not converge.
bool solver_failed(const RetargetOutcome& outcome);

struct RelocationOutcome {
    Relocator method = Relocator::Membrane;
    std::vector<RelocatedRoot> roots;
    Points deformed;
    MembraneReport membrane;
    DensityChange density_deformed;
    DensityChange density_rest;
    double seconds = 0.0;
};

/// Root index -> {face, bary, position, travel}, plus densities and the
/// membrane report.
nlohmann::json to_json(const RelocationOutcome& r, bool with_density_entries = true);

/// Scalp, chart and hairline split of a target body carrying a hairstyle
/// whose roots sit at `positions`.
class ScalpContext {
public:
    ScalpContext(const BodyModel& target, const Hairstyle& topology, const Points& positions,
                 std::optional<std::array<std::uint32_t, 2>> ear_markers = std::nullopt,
                 ChartKind chart = ChartKind::Harmonic, const std::string& head_bone = "head");
    ScalpContext(const ScalpContext&) = delete;
    ScalpContext& operator=(const ScalpContext&) = delete;

    const BodyModel& body() const { return *body_; }
    const HeadPatch& head() const { return *head_; }
    const ScalpPatch& scalp() const { return scalp_; }
    const ParamChart& chart() const { return *chart_; }
    const HairlineSplit& split() const { return split_; }
    std::array<std::uint32_t, 2> ear_markers() const { return markers_; }
    std::vector<std::uint32_t> turning_points() const;
    HairlineEdit identity() const;

    RelocationOutcome relocate(const HairlineEdit& edit, Relocator method = Relocator::Membrane,
                               const MembraneMaterial& material = {}) const;

    /// Mesh, hairline loop, front segment and turning points for the editor.
    nlohmann::json to_json() const;

private:
    const BodyModel* body_;
    std::unique_ptr<HeadPatch> head_;
    ScalpPatch scalp_;
    std::unique_ptr<ParamChart> chart_;
    HairlineSplit split_;
    std::array<std::uint32_t, 2> markers_{};
};

/// Moved roots and weights for a tuned retarget.
HairlineTuning make_tuning(const Hairstyle& source, const RelocationOutcome& relocation, double sigma_gamma);

}  // namespace hairadapt
