#pragma once

#include "hairadapt/model_io.hpp"
#include "hairadapt/spatial.hpp"

#include <optional>

namespace hairadapt {

/// Bone index used for particles anchored to their nearest triangle because
/// no bone produced a valid intersection.
inline constexpr std::uint16_t kNearestFaceAnchor = 0xFFFF;

/// Local coordinates of one particle relative to the body.
struct Anchor {
    std::uint16_t bone = kNearestFaceAnchor;
    /// Closest point on the bone as head + t * (tail - head).
    double t = 0.0;
    /// Where the bone ray meets the surface (or the nearest surface point).
    SurfacePoint surface;
    /// Offset from the surface point along the ray (or along the face normal
    /// for nearest-face anchors).
    double eta = 0.0;
};

using LocalAnchorSet = std::vector<Anchor>;

struct AnchorChoice {
    std::uint16_t bone;
    double t;
    Vec3 bone_point;
    SurfacePoint surface;
    Vec3 surface_point;
    double score;
};

/// Best bone anchor for a particle: among bones whose ray from the closest
/// bone point towards the particle hits the body inside that bone's valid
/// region, the one minimizing |p - q| * exp(sigma * <r, v>^2).
std::optional<AnchorChoice> select_anchor(const Vec3& particle, const BodyModel& body, const MeshQuery& mesh,
                                          double sigma_bone);

LocalAnchorSet compute_anchors(const Hairstyle& source, const BodyModel& body, double sigma_bone);
LocalAnchorSet compute_anchors(const Hairstyle& source, const BodyModel& body, const MeshQuery& mesh,
                               double sigma_bone);

class DegenerateAnchorError : public std::runtime_error {
public:
    DegenerateAnchorError(std::size_t particle)
        : std::runtime_error("degenerate anchor direction at particle " + std::to_string(particle)),
          particle_(particle) {}
    std::size_t particle() const { return particle_; }

private:
    std::size_t particle_;
};

/// Apply recorded local coordinates to the target body.
Points replay_coordinates(const LocalAnchorSet& anchors, const BodyModel& target);

/// Strand Laplacian of `f` at interior particle i, with segment lengths taken
/// from the source hairstyle.
Vec3 strand_laplacian(const Points& f, const Hairstyle& source, std::size_t i);

/// Interior particles whose strand Laplacian differs from the source by more
/// than eps_s.
std::vector<std::uint32_t> detect_discrepant(const Points& p_tilde, const Hairstyle& source, double eps_s);

/// Solve L[p_hat] = L[p_source] on the discrepant particles with every other
/// particle held at p_tilde.
Points poisson_smooth(const Points& p_tilde, const Hairstyle& source, std::span<const std::uint32_t> discrepant);

struct InitialTransfer {
    Points p_tilde;
    Points p_hat;
    std::vector<std::uint32_t> discrepant;
};

InitialTransfer transfer_from_anchors(const LocalAnchorSet& anchors, const Hairstyle& source,
                                      const BodyModel& target, double eps_s);

InitialTransfer initial_transfer(const Hairstyle& source, const BodyModel& source_body, const BodyModel& target_body,
                                 const AdaptationConfig& config, LocalAnchorSet* anchors_out = nullptr);

}  // namespace hairadapt
