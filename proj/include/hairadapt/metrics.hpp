#pragma once

#include "hairadapt/adaptation.hpp"
#include "hairadapt/membrane.hpp"

#include "json.hpp"

namespace hairadapt {

struct RegressionMetrics {
    double mean_distance = 0.0;
    double mean_angle = 0.0;
    std::size_t particles = 0;
    std::size_t segments = 0;
    /// Segments shorter than 1e-12 in either style, left out of the angle mean.
    std::size_t degenerate_segments = 0;
};

/// Mean per-particle distance and mean per-segment direction angle.
RegressionMetrics regression_metrics(const Hairstyle& a, const Hairstyle& b);

nlohmann::json to_json(const RegressionMetrics& m);

struct DensityEntry {
    std::uint32_t face = 0;  // body face
    double rest_area = 0.0;
    double area_after = 0.0;
    std::uint32_t before = 0;
    std::uint32_t after = 0;
    double change = 0.0;
};

struct DensityChange {
    std::string convention;
    /// One entry per scalp triangle.
    std::vector<DensityEntry> entries;
    double l1_sum = 0.0;
    /// l1_sum divided by the number of entries.
    double l1_mean = 0.0;
    double linf = 0.0;
    std::size_t roots_before = 0;
    std::size_t roots_after = 0;
    /// Roots that landed outside the rest scalp or in a scalp triangle that
    /// held none; such triangles have no finite relative change.
    std::size_t roots_entering = 0;
};

/// Roots stay in the triangle that carried them; densities use the rest and
/// the deformed area of that triangle.
DensityChange density_change_deformed(const ScalpPatch& scalp, const Points& deformed);

/// Relocated roots are binned into the rest scalp triangles; both densities
/// use the rest area, so the change is the relative change in root count.
DensityChange density_change_rest(const ScalpPatch& scalp, std::span<const RelocatedRoot> relocated);

nlohmann::json to_json(const DensityChange& d, bool with_entries = true);
/// face,rest_area,area_after,before,after,change
std::string density_csv(const DensityChange& d);

/// Per-particle contributions of every objective term.
struct ObjectiveMaps {
    std::vector<double> strand_shape;
    std::vector<double> inter_strand;
    std::vector<double> hair_body;
    /// shape + alpha * inter + beta * body, per particle.
    std::vector<double> total;
    ObjectiveTerms totals;
};

ObjectiveMaps objective_maps(const AdaptationProblem& problem, const Points& positions);
/// particle,strand,strand_shape,inter_strand,hair_body,total
std::string objective_maps_csv(const ObjectiveMaps& maps, const Hairstyle& topology);

struct RuntimeReport {
    double preprocess = 0.0;
    double initial_transfer = 0.0;
    double relocation = 0.0;
    double multiscale = 0.0;
    double total = 0.0;
    /// Negative when no full solve was run.
    double full_solve = -1.0;

    double speedup() const { return full_solve > 0.0 && multiscale > 0.0 ? full_solve / multiscale : 0.0; }
};

nlohmann::json to_json(const RuntimeReport& r);
/// Header and one row, comma separated.
std::string runtime_table(const RuntimeReport& r);

}  // namespace hairadapt
