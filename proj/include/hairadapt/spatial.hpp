#pragma once

#include "hairadapt/model_io.hpp"

#include <Eigen/Geometry>

#include <functional>
#include <optional>
#include <unordered_map>

namespace hairadapt {

/// Which feature of a triangle a closest point landed on.
enum class TriangleFeature { Face, Edge01, Edge12, Edge20, Vertex0, Vertex1, Vertex2 };

struct TriangleProjection {
    Vec3 point;
    Vec3 bary;
    TriangleFeature feature = TriangleFeature::Face;
};

/// Closest point on triangle (a, b, c) to p.
TriangleProjection closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Moller-Trumbore. Returns (t, u, v) with hit = (1-u-v) a + u b + v c.
std::optional<Vec3> intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                           const Vec3& b, const Vec3& c);

struct ClosestHit {
    SurfacePoint where;
    Vec3 point;
    /// Angle-weighted pseudo-normal of the closest feature, pointing outward.
    Vec3 normal;
    double distance = 0.0;
    /// Distance signed by the pseudo-normal (negative inside a closed mesh).
    double signed_distance = 0.0;
};

struct RayHit {
    SurfacePoint where;
    Vec3 point;
    double t = 0.0;
};

/// AABB tree over a triangle mesh for closest-point and ray queries.
/// Immutable after construction; queries are thread-safe.
class MeshQuery {
public:
    MeshQuery() = default;
    MeshQuery(const Points& vertices, const std::vector<Eigen::Vector3i>& faces);
    explicit MeshQuery(const BodyModel& body) : MeshQuery(body.vertices, body.faces) {}

    ClosestHit closest(const Vec3& p) const;
    /// Nearest hit with t > t_min along origin + t*dir (dir need not be unit).
    std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir, double t_min = 0.0) const;

    const Points& vertices() const { return vertices_; }
    const std::vector<Eigen::Vector3i>& faces() const { return faces_; }
    const Vec3& face_normal(std::size_t f) const { return face_normals_[f]; }
    const Vec3& vertex_normal(std::size_t v) const { return vertex_normals_[v]; }
    bool empty() const { return faces_.empty(); }

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };

    int build(int begin, int end);
    Vec3 feature_normal(std::uint32_t face, TriangleFeature feature) const;

    Points vertices_;
    std::vector<Eigen::Vector3i> faces_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    std::vector<Vec3> face_normals_;
    std::vector<Vec3> vertex_normals_;
    std::unordered_map<std::uint64_t, Vec3> edge_normals_;
};

struct Neighbor {
    std::uint32_t index;
    double distance;
};

/// kd-tree over a subset of points; k-nearest queries accept an exclusion
/// predicate (used to skip particles of the query's own strand).
class PointKdTree {
public:
    PointKdTree() = default;
    PointKdTree(const Points& points, std::vector<std::uint32_t> subset);
    explicit PointKdTree(const Points& points);

    /// Up to k nearest points, sorted by distance. Points for which `exclude`
    /// returns true are skipped.
    std::vector<Neighbor> knn(const Vec3& query, std::size_t k,
                              const std::function<bool(std::uint32_t)>& exclude = {}) const;

    std::size_t size() const { return ids_.size(); }

private:
    struct Node {
        int axis = -1;
        double split = 0.0;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };
    int build(int begin, int end);

    const Points* points_ = nullptr;
    std::vector<std::uint32_t> ids_;
    std::vector<Node> nodes_;
};

}  // namespace hairadapt
