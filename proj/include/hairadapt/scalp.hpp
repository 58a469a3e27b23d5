#pragma once

#include "hairadapt/energies.hpp"
#include "hairadapt/spatial.hpp"

#include <array>
#include <unordered_map>

namespace hairadapt {

/// Disk-shaped surface region the scalp slides on (the head bone's valid
/// region by default), with local vertex/face numbering.
struct HeadPatch {
    std::vector<std::uint32_t> faces;     // body face of each local face
    std::vector<std::uint32_t> vertices;  // body vertex of each local vertex
    std::vector<Eigen::Vector3i> local_faces;
    Points positions;
    std::unordered_map<std::uint32_t, std::uint32_t> vertex_local;
    std::unordered_map<std::uint32_t, std::uint32_t> face_local;
    /// Closest-point queries restricted to the patch (local face indices).
    MeshQuery query;

    std::optional<std::uint32_t> local_face(std::uint32_t body_face) const;
    std::optional<std::uint32_t> local_vertex(std::uint32_t body_vertex) const;
    /// Closest point on the patch, as a body SurfacePoint.
    SurfacePoint project(const Vec3& p) const;
    Vec3 point(const SurfacePoint& body_point) const;
};

HeadPatch extract_head_patch(const BodyModel& body, const std::string& bone = "head");

/// Faces grouped into edge-connected components.
std::vector<std::vector<std::uint32_t>> face_components(const std::vector<Eigen::Vector3i>& faces,
                                                        std::span<const std::uint32_t> subset);

/// Ordered boundary loops (vertex indices) of a face set; each loop follows
/// the face orientation.
std::vector<std::vector<std::uint32_t>> boundary_loops(const std::vector<Eigen::Vector3i>& faces);

enum class ChartKind { Harmonic, Tutte };

struct ChartLocation {
    std::uint32_t face = 0;  // local head-patch face
    Vec3 bary = Vec3(1.0, 0.0, 0.0);
};

/// Flattening of a head patch onto the unit disk: boundary on the circle by
/// arc length, interior from cotangent (Harmonic) or uniform (Tutte) weights.
class ParamChart {
public:
    ParamChart() = default;
    ParamChart(const HeadPatch& patch, ChartKind kind);

    ChartKind kind() const { return kind_; }
    const std::vector<Vec2>& uv() const { return uv_; }
    const HeadPatch& patch() const { return *patch_; }

    /// Host triangle of u by walking from `hint`; falls back to a global
    /// search. Empty when u lies outside the chart.
    std::optional<ChartLocation> locate(const Vec2& u, std::uint32_t hint = 0) const;
    Vec3 embed(const ChartLocation& loc) const;
    Vec2 chart_point(const ChartLocation& loc) const;
    /// Chart coordinates of a body surface point on the patch.
    Vec2 to_chart(const SurfacePoint& body_point) const;
    /// 3x2 derivative of the embedding within a host triangle.
    Eigen::Matrix<double, 3, 2> embedding_jacobian(std::uint32_t face) const;
    /// Signed parameter-space area of a local face.
    double signed_area(std::uint32_t face) const;
    std::size_t flipped_count() const;

private:
    std::optional<ChartLocation> walk(const Vec2& u, std::uint32_t start) const;
    ChartLocation barycentric(std::uint32_t face, const Vec2& u) const;

    const HeadPatch* patch_ = nullptr;
    ChartKind kind_ = ChartKind::Harmonic;
    std::vector<Vec2> uv_;
    std::vector<std::array<int, 3>> neighbor_;  // across the edge opposite corner k
    std::vector<Eigen::Matrix<double, 3, 2>> jacobian_;
};

/// Cotangent weight of every edge (i < j) of a triangle set, averaged over
/// its incident triangles.
std::map<std::pair<std::uint32_t, std::uint32_t>, double> cotangent_weights(
    const std::vector<Eigen::Vector3i>& faces, std::span<const Vec3> positions);

/// Scalp triangles with their rest geometry, hairline loop and root hosts.
struct ScalpPatch {
    std::vector<std::uint32_t> faces;     // body faces, sorted
    std::vector<std::uint32_t> vertices;  // body vertex of each local vertex
    std::vector<Eigen::Vector3i> local_faces;
    Points rest;
    std::vector<double> rest_area;
    /// Inverse of the 2x2 rest edge matrix in each triangle's own frame.
    std::vector<Eigen::Matrix2d> rest_inverse;
    /// Hairline loop (local vertices), following the face orientation.
    std::vector<std::uint32_t> boundary_loop;
    std::vector<char> on_boundary;
    /// Rest host of every root: local scalp face and barycentrics.
    std::vector<std::uint32_t> root_face;
    std::vector<Vec3> root_bary;
    /// Faces added by bridging, hole filling or pinch repair.
    std::size_t added_faces = 0;

    std::optional<std::uint32_t> local_vertex(std::uint32_t body_vertex) const;
    double area() const;
};

/// Triangles holding at least one root, repaired into a single disk: other
/// components are bridged to the largest along shortest face paths, enclosed
/// holes are filled and pinched boundary vertices are closed.
ScalpPatch extract_scalp(const BodyModel& body, const HeadPatch& head, std::span<const SurfacePoint> roots);

struct HairlineSplit {
    /// Local scalp vertices from ear marker 0 to ear marker 1 over the forehead.
    std::vector<std::uint32_t> front;
    /// From ear marker 1 back to ear marker 0.
    std::vector<std::uint32_t> back;
};

/// Cut the hairline at two boundary vertices (body indices); the part holding
/// the vertex farthest along `facing` is the front.
HairlineSplit split_hairline(const ScalpPatch& scalp, std::array<std::uint32_t, 2> ear_markers,
                             const Vec3& facing = Vec3(0.0, 0.0, 1.0));

/// Boundary vertices with extreme coordinate along `side` (body indices).
std::array<std::uint32_t, 2> default_ear_markers(const ScalpPatch& scalp, const Vec3& side = Vec3(1.0, 0.0, 0.0));

/// Interior front-hairline vertices (body indices) whose turning angle
/// exceeds `angle_deg`.
std::vector<std::uint32_t> detect_turning_points(const ScalpPatch& scalp, const HairlineSplit& split,
                                                 double angle_deg = 30.0);

struct TurningPoint {
    std::uint32_t hairline_vertex = 0;  // body vertex index
    double curve_param = 0.0;           // normalized arc length along the curve
};

struct HairlineEdit {
    std::vector<SurfacePoint> curve;  // body faces
    std::vector<TurningPoint> turning_points;
    std::array<std::uint32_t, 2> ear_markers{0, 0};
};

HairlineEdit parse_hairline_edit(const std::string& json_text);
std::string hairline_edit_to_json(const HairlineEdit& edit);

/// The current front hairline as an edit; turning points at detected corners.
HairlineEdit identity_edit(const BodyModel& body, const ScalpPatch& scalp, const HairlineSplit& split);

/// Point on a polyline of surface points at normalized arc length `s`,
/// projected back onto the patch. Control points are returned unchanged.
SurfacePoint evaluate_curve(const HeadPatch& head, std::span<const Vec3> points,
                            std::span<const SurfacePoint> controls, std::span<const double> params, double s);

/// Normalized cumulative arc length of a polyline.
std::vector<double> arc_length_params(std::span<const Vec3> points);

struct DirichletMap {
    std::vector<std::uint32_t> vertices;  // local scalp vertices on the hairline
    std::vector<SurfacePoint> targets;    // body surface points
};

/// Front vertices follow the curve piecewise by normalized arc length between
/// turning points; the back hairline stays in place.
DirichletMap build_correspondence(const BodyModel& body, const HeadPatch& head, const ScalpPatch& scalp,
                                  const HairlineSplit& split, const HairlineEdit& edit);

}  // namespace hairadapt
