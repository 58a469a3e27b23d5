#include "hairadapt/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace hairadapt {

TriangleProjection closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Region classification after Ericson, Real-Time Collision Detection 5.1.5.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {a, Vec3(1, 0, 0), TriangleFeature::Vertex0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {b, Vec3(0, 1, 0), TriangleFeature::Vertex1};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {a + v * ab, Vec3(1 - v, v, 0), TriangleFeature::Edge01};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {c, Vec3(0, 0, 1), TriangleFeature::Vertex2};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {a + w * ac, Vec3(1 - w, 0, w), TriangleFeature::Edge20};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {b + w * (c - b), Vec3(0, 1 - w, w), TriangleFeature::Edge12};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {a + ab * v + ac * w, Vec3(1 - v - w, v, w), TriangleFeature::Face};
}

std::optional<Vec3> intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                           const Vec3& b, const Vec3& c) {
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    const double scale = e1.norm() * e2.norm() * dir.norm();
    if (std::abs(det) <= 1e-14 * scale) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = tvec.dot(pvec) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = e2.dot(qvec) * inv;
    return Vec3(t, u, v);
}

namespace {

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double angle_between(const Vec3& u, const Vec3& v) {
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

}  // namespace

MeshQuery::MeshQuery(const Points& vertices, const std::vector<Eigen::Vector3i>& faces)
    : vertices_(vertices), faces_(faces) {
    face_normals_.resize(faces_.size());
    vertex_normals_.assign(vertices_.size(), Vec3::Zero());
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const auto& t = faces_[f];
        const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).normalized();
        face_normals_[f] = n;
        for (int c = 0; c < 3; ++c) {
            const Vec3& p = vertices_[t[c]];
            const double angle = angle_between(vertices_[t[(c + 1) % 3]] - p, vertices_[t[(c + 2) % 3]] - p);
            vertex_normals_[t[c]] += angle * n;
            edge_normals_.try_emplace(edge_key(t[c], t[(c + 1) % 3]), Vec3::Zero()).first->second += n;
        }
    }
    for (auto& n : vertex_normals_)
        if (n.squaredNorm() > 0.0) n.normalize();
    for (auto& [key, n] : edge_normals_) n.normalize();

    order_.resize(faces_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * faces_.size());
    if (!faces_.empty()) build(0, static_cast<int>(faces_.size()));
}

int MeshQuery::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box, centroids;
    for (int i = begin; i < end; ++i) {
        const auto& t = faces_[order_[i]];
        for (int c = 0; c < 3; ++c) box.extend(vertices_[t[c]]);
        centroids.extend((vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0);
    }
    nodes_[id].box = box;
    if (end - begin <= 4) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    int axis;
    centroids.sizes().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const auto& ta = faces_[a];
        const auto& tb = faces_[b];
        return vertices_[ta[0]][axis] + vertices_[ta[1]][axis] + vertices_[ta[2]][axis] <
               vertices_[tb[0]][axis] + vertices_[tb[1]][axis] + vertices_[tb[2]][axis];
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

Vec3 MeshQuery::feature_normal(std::uint32_t face, TriangleFeature feature) const {
    const auto& t = faces_[face];
    auto edge = [&](int a, int b) {
        const auto it = edge_normals_.find(edge_key(t[a], t[b]));
        return it == edge_normals_.end() ? face_normals_[face] : it->second;
    };
    switch (feature) {
        case TriangleFeature::Face: return face_normals_[face];
        case TriangleFeature::Edge01: return edge(0, 1);
        case TriangleFeature::Edge12: return edge(1, 2);
        case TriangleFeature::Edge20: return edge(2, 0);
        case TriangleFeature::Vertex0: return vertex_normals_[t[0]];
        case TriangleFeature::Vertex1: return vertex_normals_[t[1]];
        case TriangleFeature::Vertex2: return vertex_normals_[t[2]];
    }
    return face_normals_[face];
}

ClosestHit MeshQuery::closest(const Vec3& p) const {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::infinity();
    TriangleFeature best_feature = TriangleFeature::Face;
    if (nodes_.empty()) throw std::logic_error("closest() on an empty mesh");

    // Depth-first with nearer child first.
    std::vector<int> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (node.box.squaredExteriorDistance(p) >= best_d2) continue;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const auto f = static_cast<std::uint32_t>(order_[i]);
                const auto& t = faces_[f];
                const auto proj = closest_point_on_triangle(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
                const double d2 = (proj.point - p).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best.where = SurfacePoint{f, proj.bary};
                    best.point = proj.point;
                    best_feature = proj.feature;
                }
            }
            continue;
        }
        const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
        const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
        if (dl < dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    best.normal = feature_normal(best.where.face, best_feature);
    best.distance = std::sqrt(best_d2);
    best.signed_distance = std::copysign(best.distance, (p - best.point).dot(best.normal));
    return best;
}

std::optional<RayHit> MeshQuery::raycast(const Vec3& origin, const Vec3& dir, double t_min) const {
    if (nodes_.empty()) return std::nullopt;
    std::optional<RayHit> best;
    double best_t = std::numeric_limits<double>::infinity();
    const Vec3 inv_dir = dir.cwiseInverse();

    auto box_entry = [&](const Eigen::AlignedBox3d& box) {
        double t0 = t_min, t1 = best_t;
        for (int a = 0; a < 3; ++a) {
            if (dir[a] == 0.0) {
                if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) return std::numeric_limits<double>::infinity();
                continue;
            }
            double ta = (box.min()[a] - origin[a]) * inv_dir[a];
            double tb = (box.max()[a] - origin[a]) * inv_dir[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb * (1.0 + 1e-12) + 1e-15);
            if (t0 > t1) return std::numeric_limits<double>::infinity();
        }
        return t0;
    };

    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (box_entry(node.box) == std::numeric_limits<double>::infinity()) continue;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const auto f = static_cast<std::uint32_t>(order_[i]);
                const auto& t = faces_[f];
                const auto hit = intersect_ray_triangle(origin, dir, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
                if (!hit || (*hit)[0] <= t_min || (*hit)[0] >= best_t) continue;
                best_t = (*hit)[0];
                RayHit h;
                h.t = best_t;
                h.where = SurfacePoint{f, Vec3(1.0 - (*hit)[1] - (*hit)[2], (*hit)[1], (*hit)[2])};
                h.point = origin + best_t * dir;
                best = h;
            }
            continue;
        }
        stack.push_back(node.left);
        stack.push_back(node.right);
    }
    return best;
}

// --- kd-tree --------------------------------------------------------------------

PointKdTree::PointKdTree(const Points& points, std::vector<std::uint32_t> subset)
    : points_(&points), ids_(std::move(subset)) {
    nodes_.reserve(2 * ids_.size() / 8 + 2);
    if (!ids_.empty()) build(0, static_cast<int>(ids_.size()));
}

PointKdTree::PointKdTree(const Points& points)
    : PointKdTree(points, [&] {
          std::vector<std::uint32_t> all(points.size());
          std::iota(all.begin(), all.end(), 0u);
          return all;
      }()) {}

int PointKdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= 8) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i) box.extend((*points_)[ids_[i]]);
    int axis;
    box.sizes().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double pa = (*points_)[a][axis], pb = (*points_)[b][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = (*points_)[ids_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> PointKdTree::knn(const Vec3& query, std::size_t k,
                                       const std::function<bool(std::uint32_t)>& exclude) const {
    // Max-heap on (squared distance, index) so ties resolve to the lower index.
    using Entry = std::pair<double, std::uint32_t>;
    std::priority_queue<Entry> heap;
    if (k == 0 || nodes_.empty()) return {};

    auto worst = [&] {
        return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().first;
    };
    struct Frame {
        int node;
        double bound;
    };
    std::vector<Frame> stack{{0, 0.0}};
    while (!stack.empty()) {
        const Frame fr = stack.back();
        stack.pop_back();
        if (fr.bound > worst()) continue;
        const Node& node = nodes_[fr.node];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const auto id = ids_[i];
                if (exclude && exclude(id)) continue;
                const double d2 = ((*points_)[id] - query).squaredNorm();
                const Entry e{d2, id};
                if (heap.size() < k) heap.push(e);
                else if (e < heap.top()) {
                    heap.pop();
                    heap.push(e);
                }
            }
            continue;
        }
        const double diff = query[node.axis] - node.split;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        stack.push_back({far, std::max(fr.bound, diff * diff)});
        stack.push_back({near, fr.bound});
    }
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = Neighbor{heap.top().second, std::sqrt(heap.top().first)};
        heap.pop();
    }
    return out;
}

}  // namespace hairadapt
