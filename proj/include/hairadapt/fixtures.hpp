#pragma once

#include "hairadapt/scalp.hpp"

namespace hairadapt {

/// Surface-of-revolution character: head, neck and torso around the +y axis,
/// facing +z. All characters built with the same ring/column counts share
/// one face array and bone list.
struct CharacterShape {
    double head_radius = 0.10;
    double head_center_y = 1.60;
    double neck_radius = 0.055;
    double neck_length = 0.07;
    double shoulder_radius = 0.19;
    double torso_length = 0.30;
    /// Horizontal stretch (x, z) of the head and of the torso.
    double head_sx = 0.95, head_sz = 1.08;
    double torso_sx = 1.0, torso_sz = 0.55;
    int rings = 40;
    int columns = 48;
};

/// 0: reference character; 1..3: variations in head size, neck and shoulders.
CharacterShape character_preset(int id);

Mesh make_character_mesh(const CharacterShape& shape);
Skeleton make_character_skeleton(const CharacterShape& shape, const Mesh& mesh);
BodyModel make_character(const CharacterShape& shape, double region_threshold = 0.3);

struct HairParams {
    std::size_t strands = 200;
    int particles = 20;
    /// Extra particles drawn uniformly from [0, particle_jitter].
    int particle_jitter = 0;
    double segment = 0.012;
    double gravity = 0.35;
    /// Curl amplitude relative to the growth direction (0 = straight).
    double curl = 0.0;
    double curl_frequency = 0.9;
    double clearance = 3e-3;
    /// Scalp extent as polar angle from the crown, front and back (degrees).
    double front_limit_deg = 62.0;
    double back_limit_deg = 105.0;
    /// Skip the collision push-out (large counting fixtures only).
    bool collide = true;
    std::uint64_t seed = 0;
};

/// Faces of the hair-bearing cap of a character built by make_character.
std::vector<std::uint32_t> scalp_cap_faces(const BodyModel& body, const CharacterShape& shape,
                                           const HairParams& params);

/// Strands rooted on the scalp cap, grown along the surface normal, bent by
/// gravity and kept `clearance` away from the body. Positions are rounded to
/// float so they survive a save/load round trip unchanged.
Hairstyle make_hairstyle(const BodyModel& body, const CharacterShape& shape, const HairParams& params);

/// Counting fixture at the scale of a dense curly hairstyle: 113K strands,
/// about 2.9M particles.
Hairstyle make_large_fixture(const BodyModel& body, const CharacterShape& shape);

/// Smooth displacement of the front hairline: amplitude (m, positive moves
/// the hairline away from the scalp) times a Gaussian bump centred at
/// `center` (normalized arc length) that vanishes at both ear markers.
struct HairlineEditShape {
    double amplitude = 0.01;
    double center = 0.5;
    double width = 0.3;
};

/// An edit whose curve is the front hairline displaced along the outward
/// tangent direction and projected onto the head; turning points keep their
/// vertices with parameters taken on the new curve.
HairlineEdit synthetic_hairline_edit(const BodyModel& body, const HeadPatch& head, const ScalpPatch& scalp,
                                     const HairlineSplit& split, const HairlineEditShape& shape);

/// Bench edits used for relocation comparisons: forward and receding bumps of
/// different widths and positions.
std::vector<HairlineEditShape> bench_edit_shapes();

}  // namespace hairadapt
