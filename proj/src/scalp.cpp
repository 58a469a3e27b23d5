#include "hairadapt/scalp.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

namespace hairadapt {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

/// Faces sharing each undirected edge.
std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_faces(const std::vector<Eigen::Vector3i>& faces,
                                                                        std::span<const std::uint32_t> subset) {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> out;
    for (const std::uint32_t f : subset)
        for (int k = 0; k < 3; ++k) out[edge_key(faces[f][k], faces[f][(k + 1) % 3])].push_back(f);
    return out;
}

std::vector<std::uint32_t> all_indices(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint32_t>(i);
    return v;
}

/// Directed boundary edges a -> b (edges whose twin b -> a is absent).
std::multimap<std::uint32_t, std::uint32_t> boundary_edges(const std::vector<Eigen::Vector3i>& faces,
                                                          std::span<const std::uint32_t> subset) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> directed;
    for (const std::uint32_t f : subset)
        for (int k = 0; k < 3; ++k)
            directed.emplace(static_cast<std::uint32_t>(faces[f][k]), static_cast<std::uint32_t>(faces[f][(k + 1) % 3]));
    std::multimap<std::uint32_t, std::uint32_t> out;
    for (const auto& [a, b] : directed)
        if (!directed.count({b, a})) out.emplace(a, b);
    return out;
}

std::vector<std::vector<std::uint32_t>> loops_from_edges(std::multimap<std::uint32_t, std::uint32_t> edges) {
    std::vector<std::vector<std::uint32_t>> loops;
    while (!edges.empty()) {
        auto it = edges.begin();
        const std::uint32_t start = it->first;
        std::vector<std::uint32_t> loop{start};
        std::uint32_t cur = it->second;
        edges.erase(it);
        while (cur != start) {
            loop.push_back(cur);
            auto next = edges.find(cur);
            if (next == edges.end()) break;
            cur = next->second;
            edges.erase(next);
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

std::optional<std::uint32_t> HeadPatch::local_face(std::uint32_t body_face) const {
    const auto it = face_local.find(body_face);
    if (it == face_local.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint32_t> HeadPatch::local_vertex(std::uint32_t body_vertex) const {
    const auto it = vertex_local.find(body_vertex);
    if (it == vertex_local.end()) return std::nullopt;
    return it->second;
}

SurfacePoint HeadPatch::project(const Vec3& p) const {
    const ClosestHit hit = query.closest(p);
    return {faces[hit.where.face], hit.where.bary};
}

Vec3 HeadPatch::point(const SurfacePoint& sp) const {
    const auto f = local_face(sp.face);
    if (!f) throw ValidationError("surface point on face " + std::to_string(sp.face) + " is outside the head patch");
    const auto& t = local_faces[*f];
    return sp.bary[0] * positions[t[0]] + sp.bary[1] * positions[t[1]] + sp.bary[2] * positions[t[2]];
}

std::vector<std::vector<std::uint32_t>> face_components(const std::vector<Eigen::Vector3i>& faces,
                                                        std::span<const std::uint32_t> subset) {
    const auto by_edge = edge_faces(faces, subset);
    std::unordered_map<std::uint32_t, int> label;
    for (const auto f : subset) label[f] = -1;
    std::vector<std::vector<std::uint32_t>> comps;
    for (const auto seed : subset) {
        if (label[seed] >= 0) continue;
        const int id = static_cast<int>(comps.size());
        comps.emplace_back();
        std::deque<std::uint32_t> queue{seed};
        label[seed] = id;
        while (!queue.empty()) {
            const auto f = queue.front();
            queue.pop_front();
            comps.back().push_back(f);
            for (int k = 0; k < 3; ++k) {
                for (const auto g : by_edge.at(edge_key(faces[f][k], faces[f][(k + 1) % 3]))) {
                    if (label[g] < 0) {
                        label[g] = id;
                        queue.push_back(g);
                    }
                }
            }
        }
        std::sort(comps.back().begin(), comps.back().end());
    }
    return comps;
}

std::vector<std::vector<std::uint32_t>> boundary_loops(const std::vector<Eigen::Vector3i>& faces) {
    return loops_from_edges(boundary_edges(faces, all_indices(faces.size())));
}

HeadPatch extract_head_patch(const BodyModel& body, const std::string& bone) {
    const int b = body.bone_index(bone);
    if (b < 0) throw ValidationError("body has no bone named '" + bone + "'");
    if (static_cast<std::size_t>(b) >= body.valid_regions.size() || body.valid_regions[b].empty())
        throw ValidationError("bone '" + bone + "' has an empty surface region");
    HeadPatch h;
    h.faces = body.valid_regions[b];
    std::set<std::uint32_t> verts;
    for (const auto f : h.faces)
        for (int k = 0; k < 3; ++k) verts.insert(static_cast<std::uint32_t>(body.faces[f][k]));
    h.vertices.assign(verts.begin(), verts.end());
    for (std::size_t i = 0; i < h.vertices.size(); ++i) {
        h.vertex_local[h.vertices[i]] = static_cast<std::uint32_t>(i);
        h.positions.push_back(body.vertices[h.vertices[i]]);
    }
    for (std::size_t i = 0; i < h.faces.size(); ++i) {
        const auto& t = body.faces[h.faces[i]];
        h.face_local[h.faces[i]] = static_cast<std::uint32_t>(i);
        h.local_faces.emplace_back(h.vertex_local[t[0]], h.vertex_local[t[1]], h.vertex_local[t[2]]);
    }
    const auto comps = face_components(h.local_faces, all_indices(h.local_faces.size()));
    const auto loops = boundary_loops(h.local_faces);
    std::set<std::uint64_t> edges;
    for (const auto& t : h.local_faces)
        for (int k = 0; k < 3; ++k) edges.insert(edge_key(t[k], t[(k + 1) % 3]));
    const long euler = static_cast<long>(h.vertices.size()) - static_cast<long>(edges.size()) +
                       static_cast<long>(h.faces.size());
    if (comps.size() != 1 || loops.size() != 1 || euler != 1)
        throw ValidationError("head patch is not a topological disk (" + std::to_string(comps.size()) +
                              " components, " + std::to_string(loops.size()) + " boundary loops, Euler " +
                              std::to_string(euler) + ")");
    h.query = MeshQuery(h.positions, h.local_faces);
    return h;
}

std::map<std::pair<std::uint32_t, std::uint32_t>, double> cotangent_weights(const std::vector<Eigen::Vector3i>& faces,
                                                                            std::span<const Vec3> x) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
    for (const auto& t : faces) {
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t o = t[k], i = t[(k + 1) % 3], j = t[(k + 2) % 3];
            const Vec3 a = x[i] - x[o], b = x[j] - x[o];
            const double cot = a.dot(b) / a.cross(b).norm();
            w[{std::min(i, j), std::max(i, j)}] += 0.5 * cot;
        }
    }
    return w;
}

ParamChart::ParamChart(const HeadPatch& patch, ChartKind kind) : patch_(&patch), kind_(kind) {
    const auto& faces = patch.local_faces;
    const std::size_t nv = patch.positions.size();
    const auto loops = boundary_loops(faces);
    if (loops.size() != 1) throw ValidationError("chart domain is not a topological disk");
    const auto& loop = loops.front();

    uv_.assign(nv, Vec2::Zero());
    std::vector<char> fixed(nv, 0);
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 0; i < loop.size(); ++i)
        cumulative.push_back(cumulative.back() +
                             (patch.positions[loop[(i + 1) % loop.size()]] - patch.positions[loop[i]]).norm());
    const double perimeter = cumulative.back();
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const double theta = 2.0 * std::numbers::pi * cumulative[i] / perimeter;
        uv_[loop[i]] = Vec2(std::cos(theta), std::sin(theta));
        fixed[loop[i]] = 1;
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, double> weights;
    if (kind == ChartKind::Harmonic) {
        weights = cotangent_weights(faces, patch.positions);
    } else {
        for (const auto& t : faces)
            for (int k = 0; k < 3; ++k) {
                const std::uint32_t i = t[k], j = t[(k + 1) % 3];
                weights[{std::min(i, j), std::max(i, j)}] = 1.0;
            }
    }

    std::vector<int> unknown(nv, -1);
    int n = 0;
    for (std::size_t v = 0; v < nv; ++v)
        if (!fixed[v]) unknown[v] = n++;
    if (n > 0) {
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
        for (const auto& [e, w] : weights) {
            const auto [i, j] = e;
            for (const auto& [a, b] : {std::pair{i, j}, std::pair{j, i}}) {
                if (unknown[a] < 0) continue;
                trip.emplace_back(unknown[a], unknown[a], w);
                if (unknown[b] >= 0)
                    trip.emplace_back(unknown[a], unknown[b], -w);
                else
                    rhs.row(unknown[a]) += w * uv_[b].transpose();
            }
        }
        SparseMatrix L(n, n);
        L.setFromTriplets(trip.begin(), trip.end());
        Eigen::MatrixXd sol;
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(L);
        if (ldlt.info() == Eigen::Success) {
            sol = ldlt.solve(rhs);
        } else {
            Eigen::SparseLU<SparseMatrix> lu(L);
            if (lu.info() != Eigen::Success) throw ValidationError("chart system is singular");
            sol = lu.solve(rhs);
        }
        for (std::size_t v = 0; v < nv; ++v)
            if (unknown[v] >= 0) uv_[v] = sol.row(unknown[v]).transpose();
    }

    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) total += signed_area(static_cast<std::uint32_t>(f));
    if (total < 0.0)
        for (auto& u : uv_) u.y() = -u.y();

    neighbor_.assign(faces.size(), {-1, -1, -1});
    const auto by_edge = edge_faces(faces, all_indices(faces.size()));
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const auto& owners = by_edge.at(edge_key(faces[f][(k + 1) % 3], faces[f][(k + 2) % 3]));
            for (const auto g : owners)
                if (g != f) neighbor_[f][k] = static_cast<int>(g);
        }
    }

    jacobian_.resize(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        Eigen::Matrix2d M;
        M.col(0) = uv_[t[1]] - uv_[t[0]];
        M.col(1) = uv_[t[2]] - uv_[t[0]];
        Eigen::Matrix<double, 3, 2> E;
        E.col(0) = patch.positions[t[1]] - patch.positions[t[0]];
        E.col(1) = patch.positions[t[2]] - patch.positions[t[0]];
        jacobian_[f] = E * M.inverse();
    }
}

double ParamChart::signed_area(std::uint32_t f) const {
    const auto& t = patch_->local_faces[f];
    return 0.5 * cross2(uv_[t[1]] - uv_[t[0]], uv_[t[2]] - uv_[t[0]]);
}

std::size_t ParamChart::flipped_count() const {
    std::size_t n = 0;
    for (std::size_t f = 0; f < patch_->local_faces.size(); ++f)
        if (signed_area(static_cast<std::uint32_t>(f)) <= 0.0) ++n;
    return n;
}

ChartLocation ParamChart::barycentric(std::uint32_t f, const Vec2& u) const {
    const auto& t = patch_->local_faces[f];
    const Vec2 a = uv_[t[0]];
    const Vec2 e1 = uv_[t[1]] - a, e2 = uv_[t[2]] - a, d = u - a;
    const double det = cross2(e1, e2);
    const double l1 = cross2(d, e2) / det;
    const double l2 = cross2(e1, d) / det;
    return {f, Vec3(1.0 - l1 - l2, l1, l2)};
}

namespace {

constexpr double kInsideTol = 1e-12;

ChartLocation clamp_to_simplex(ChartLocation loc) {
    for (int k = 0; k < 3; ++k) loc.bary[k] = std::max(0.0, loc.bary[k]);
    loc.bary /= loc.bary.sum();
    return loc;
}

}  // namespace

std::optional<ChartLocation> ParamChart::walk(const Vec2& u, std::uint32_t start) const {
    std::uint32_t cur = start;
    const std::size_t limit = 4 * patch_->local_faces.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
        const ChartLocation loc = barycentric(cur, u);
        int worst = 0;
        for (int k = 1; k < 3; ++k)
            if (loc.bary[k] < loc.bary[worst]) worst = k;
        if (loc.bary[worst] >= -kInsideTol) return clamp_to_simplex(loc);
        const int next = neighbor_[cur][worst];
        if (next < 0) return std::nullopt;
        cur = static_cast<std::uint32_t>(next);
    }
    return std::nullopt;
}

std::optional<ChartLocation> ParamChart::locate(const Vec2& u, std::uint32_t hint) const {
    if (patch_ == nullptr || patch_->local_faces.empty()) return std::nullopt;
    if (hint >= patch_->local_faces.size()) hint = 0;
    if (auto loc = walk(u, hint)) return loc;
    std::optional<ChartLocation> best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < patch_->local_faces.size(); ++f) {
        const ChartLocation loc = barycentric(static_cast<std::uint32_t>(f), u);
        const double m = loc.bary.minCoeff();
        if (m > best_min) {
            best_min = m;
            best = loc;
        }
    }
    if (!best || best_min < -1e-9) return std::nullopt;
    return clamp_to_simplex(*best);
}

Vec3 ParamChart::embed(const ChartLocation& loc) const {
    const auto& t = patch_->local_faces[loc.face];
    return loc.bary[0] * patch_->positions[t[0]] + loc.bary[1] * patch_->positions[t[1]] +
           loc.bary[2] * patch_->positions[t[2]];
}

Vec2 ParamChart::chart_point(const ChartLocation& loc) const {
    const auto& t = patch_->local_faces[loc.face];
    return loc.bary[0] * uv_[t[0]] + loc.bary[1] * uv_[t[1]] + loc.bary[2] * uv_[t[2]];
}

Vec2 ParamChart::to_chart(const SurfacePoint& sp) const {
    const auto f = patch_->local_face(sp.face);
    if (!f) throw ValidationError("surface point on face " + std::to_string(sp.face) + " is outside the chart");
    return chart_point({*f, sp.bary});
}

Eigen::Matrix<double, 3, 2> ParamChart::embedding_jacobian(std::uint32_t f) const { return jacobian_[f]; }

std::optional<std::uint32_t> ScalpPatch::local_vertex(std::uint32_t body_vertex) const {
    const auto it = std::lower_bound(vertices.begin(), vertices.end(), body_vertex);
    if (it == vertices.end() || *it != body_vertex) return std::nullopt;
    return static_cast<std::uint32_t>(it - vertices.begin());
}

double ScalpPatch::area() const {
    double a = 0.0;
    for (const double x : rest_area) a += x;
    return a;
}

namespace {

/// Shortest face path (through head faces) from `from` to any face in `to`,
/// excluding the endpoints already in the sets.
std::vector<std::uint32_t> face_bridge(const std::vector<Eigen::Vector3i>& faces,
                                       const std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>& by_edge,
                                       const std::set<std::uint32_t>& from, const std::set<std::uint32_t>& to) {
    std::unordered_map<std::uint32_t, std::uint32_t> parent;
    std::deque<std::uint32_t> queue;
    for (const auto f : from) {
        parent[f] = f;
        queue.push_back(f);
    }
    while (!queue.empty()) {
        const auto f = queue.front();
        queue.pop_front();
        for (int k = 0; k < 3; ++k) {
            for (const auto g : by_edge.at(edge_key(faces[f][k], faces[f][(k + 1) % 3]))) {
                if (parent.count(g)) continue;
                parent[g] = f;
                if (to.count(g)) {
                    std::vector<std::uint32_t> path;
                    for (auto c = parent[g]; !from.count(c); c = parent[c]) path.push_back(c);
                    return path;
                }
                queue.push_back(g);
            }
        }
    }
    return {};
}

}  // namespace

ScalpPatch extract_scalp(const BodyModel& body, const HeadPatch& head, std::span<const SurfacePoint> roots) {
    if (roots.empty()) throw ValidationError("scalp extraction needs at least one root");
    const auto& hf = head.local_faces;
    std::set<std::uint32_t> chosen;
    std::vector<std::uint32_t> root_local(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) {
        const auto f = head.local_face(roots[i].face);
        if (!f)
            throw ValidationError("root " + std::to_string(i) + " lies on face " + std::to_string(roots[i].face) +
                                  " outside the head patch");
        root_local[i] = *f;
        chosen.insert(*f);
    }
    const std::size_t initial_count = chosen.size();
    const auto all = all_indices(hf.size());
    const auto by_edge = edge_faces(hf, all);

    auto comps = face_components(hf, std::vector<std::uint32_t>(chosen.begin(), chosen.end()));
    if (comps.size() > 1) {
        std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
            return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
        });
        std::set<std::uint32_t> main(comps[0].begin(), comps[0].end());
        std::set<std::uint32_t> rest;
        for (std::size_t c = 1; c < comps.size(); ++c) rest.insert(comps[c].begin(), comps[c].end());
        while (!rest.empty()) {
            const auto path = face_bridge(hf, by_edge, main, rest);
            if (path.empty()) throw ValidationError("scalp components cannot be bridged within the head patch");
            main.insert(path.begin(), path.end());
            // Absorb every component now touching the main one.
            std::set<std::uint32_t> all_set = main;
            all_set.insert(rest.begin(), rest.end());
            for (const auto& comp : face_components(hf, std::vector<std::uint32_t>(all_set.begin(), all_set.end()))) {
                if (std::any_of(comp.begin(), comp.end(), [&](auto f) { return main.count(f) > 0; })) {
                    for (const auto f : comp) {
                        main.insert(f);
                        rest.erase(f);
                    }
                }
            }
        }
        chosen = std::move(main);
    }

    std::set<std::uint64_t> head_boundary;
    for (const auto& [a, b] : boundary_edges(hf, all)) head_boundary.insert(edge_key(a, b));

    for (int round = 0; round < 64; ++round) {
        bool changed = false;
        std::vector<std::uint32_t> outside;
        for (const auto f : all)
            if (!chosen.count(f)) outside.push_back(f);
        for (const auto& comp : face_components(hf, outside)) {
            const bool touches = std::any_of(comp.begin(), comp.end(), [&](auto f) {
                for (int k = 0; k < 3; ++k)
                    if (head_boundary.count(edge_key(hf[f][k], hf[f][(k + 1) % 3]))) return true;
                return false;
            });
            if (!touches) {
                chosen.insert(comp.begin(), comp.end());
                changed = true;
            }
        }
        const std::vector<std::uint32_t> cur(chosen.begin(), chosen.end());
        std::map<std::uint32_t, int> outgoing;
        for (const auto& [a, b] : boundary_edges(hf, cur)) ++outgoing[a];
        for (const auto& [v, count] : outgoing) {
            if (count < 2) continue;
            for (const auto f : all)
                if ((hf[f].array() == static_cast<int>(v)).any() && !chosen.count(f)) {
                    chosen.insert(f);
                    changed = true;
                }
        }
        if (!changed) break;
    }

    ScalpPatch s;
    for (const auto f : chosen) s.faces.push_back(head.faces[f]);
    std::sort(s.faces.begin(), s.faces.end());
    s.added_faces = s.faces.size() - initial_count;
    std::set<std::uint32_t> verts;
    for (const auto f : s.faces)
        for (int k = 0; k < 3; ++k) verts.insert(static_cast<std::uint32_t>(body.faces[f][k]));
    s.vertices.assign(verts.begin(), verts.end());
    for (const auto v : s.vertices) s.rest.push_back(body.vertices[v]);
    for (const auto f : s.faces) {
        const auto& t = body.faces[f];
        const Eigen::Vector3i lt(*s.local_vertex(t[0]), *s.local_vertex(t[1]), *s.local_vertex(t[2]));
        s.local_faces.push_back(lt);
        const Vec3 e1 = s.rest[lt[1]] - s.rest[lt[0]], e2 = s.rest[lt[2]] - s.rest[lt[0]];
        s.rest_area.push_back(triangle_area(s.rest[lt[0]], s.rest[lt[1]], s.rest[lt[2]]));
        const double l1 = e1.norm();
        const Vec3 t1 = e1 / l1;
        const Vec3 n = e1.cross(e2);
        const Vec3 t2 = n.cross(e1).normalized();
        Eigen::Matrix2d D;
        D << l1, e2.dot(t1), 0.0, e2.dot(t2);
        if (!(std::abs(D.determinant()) >= 1e-14))
            throw ValidationError("degenerate rest triangle on face " + std::to_string(f));
        s.rest_inverse.push_back(D.inverse());
    }

    if (face_components(s.local_faces, all_indices(s.local_faces.size())).size() != 1)
        throw ValidationError("scalp is not edge-connected");
    const auto loops = boundary_loops(s.local_faces);
    if (loops.size() != 1) throw ValidationError("scalp boundary is not a single loop");
    auto loop = loops.front();
    std::rotate(loop.begin(), std::min_element(loop.begin(), loop.end()), loop.end());
    s.boundary_loop = std::move(loop);
    s.on_boundary.assign(s.vertices.size(), 0);
    for (const auto v : s.boundary_loop) s.on_boundary[v] = 1;

    for (std::size_t i = 0; i < roots.size(); ++i) {
        const auto it = std::lower_bound(s.faces.begin(), s.faces.end(), roots[i].face);
        s.root_face.push_back(static_cast<std::uint32_t>(it - s.faces.begin()));
        s.root_bary.push_back(roots[i].bary);
    }
    return s;
}

HairlineSplit split_hairline(const ScalpPatch& scalp, std::array<std::uint32_t, 2> markers, const Vec3& facing) {
    const auto& loop = scalp.boundary_loop;
    std::array<std::size_t, 2> pos{};
    for (int m = 0; m < 2; ++m) {
        const auto local = scalp.local_vertex(markers[m]);
        const auto it = local ? std::find(loop.begin(), loop.end(), *local) : loop.end();
        if (it == loop.end())
            throw ValidationError("ear marker " + std::to_string(markers[m]) + " is not on the hairline");
        pos[m] = static_cast<std::size_t>(it - loop.begin());
    }
    if (pos[0] == pos[1]) throw ValidationError("ear markers coincide");
    const std::size_t n = loop.size();
    auto path = [&](std::size_t from, std::size_t to) {
        std::vector<std::uint32_t> p;
        for (std::size_t i = from;; i = (i + 1) % n) {
            p.push_back(loop[i]);
            if (i == to) break;
        }
        return p;
    };
    auto a = path(pos[0], pos[1]);
    auto b = path(pos[1], pos[0]);
    if (a.size() < 3 || b.size() < 3) throw ValidationError("ear markers are adjacent; hairline segment has one edge");

    auto interior_max = [&](const std::vector<std::uint32_t>& p) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i + 1 < p.size(); ++i) best = std::max(best, scalp.rest[p[i]].dot(facing));
        return best;
    };
    HairlineSplit out;
    if (interior_max(a) >= interior_max(b)) {
        out.front = std::move(a);
        out.back = std::move(b);
    } else {
        std::reverse(b.begin(), b.end());
        std::reverse(a.begin(), a.end());
        out.front = std::move(b);
        out.back = std::move(a);
    }
    return out;
}

std::array<std::uint32_t, 2> default_ear_markers(const ScalpPatch& scalp, const Vec3& side) {
    const auto& loop = scalp.boundary_loop;
    auto key = [&](std::uint32_t v) { return scalp.rest[v].dot(side); };
    const auto lo = *std::min_element(loop.begin(), loop.end(), [&](auto x, auto y) { return key(x) < key(y); });
    const auto hi = *std::max_element(loop.begin(), loop.end(), [&](auto x, auto y) { return key(x) < key(y); });
    return {scalp.vertices[lo], scalp.vertices[hi]};
}

std::vector<std::uint32_t> detect_turning_points(const ScalpPatch& scalp, const HairlineSplit& split,
                                                 double angle_deg) {
    const double limit = angle_deg * std::numbers::pi / 180.0;
    std::vector<std::uint32_t> out;
    const auto& f = split.front;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        const Vec3 a = scalp.rest[f[i]] - scalp.rest[f[i - 1]];
        const Vec3 b = scalp.rest[f[i + 1]] - scalp.rest[f[i]];
        const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
        if (std::acos(c) > limit) out.push_back(scalp.vertices[f[i]]);
    }
    return out;
}

HairlineEdit parse_hairline_edit(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("hairline edit is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("hairline edit must be a JSON object");
    for (const char* key : {"curve", "turningPoints", "earMarkers"})
        if (!j.contains(key)) throw ValidationError(std::string("hairline edit lacks '") + key + "'");
    HairlineEdit e;
    try {
        for (const auto& c : j.at("curve")) {
            const auto& b = c.at("bary");
            if (!b.is_array() || b.size() != 2) throw ValidationError("curve bary must hold two numbers");
            SurfacePoint sp;
            sp.face = c.at("face").get<std::uint32_t>();
            const double b1 = b[0].get<double>(), b2 = b[1].get<double>();
            sp.bary = Vec3(1.0 - b1 - b2, b1, b2);
            if (!sp.valid()) throw ValidationError("curve point has barycentrics outside the simplex");
            e.curve.push_back(sp);
        }
        for (const auto& t : j.at("turningPoints")) {
            TurningPoint tp;
            tp.hairline_vertex = t.at("hairlineVertex").get<std::uint32_t>();
            tp.curve_param = t.at("curveParam").get<double>();
            if (!(tp.curve_param >= 0.0 && tp.curve_param <= 1.0))
                throw ValidationError("curveParam must lie in [0, 1]");
            e.turning_points.push_back(tp);
        }
        const auto& m = j.at("earMarkers");
        if (!m.is_array() || m.size() != 2) throw ValidationError("earMarkers must hold two vertex indices");
        e.ear_markers = {m[0].get<std::uint32_t>(), m[1].get<std::uint32_t>()};
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed hairline edit: ") + ex.what());
    }
    if (e.curve.size() < 2) throw ValidationError("hairline curve needs at least two points");
    return e;
}

std::string hairline_edit_to_json(const HairlineEdit& e) {
    nlohmann::ordered_json j;
    j["curve"] = nlohmann::ordered_json::array();
    for (const auto& c : e.curve) j["curve"].push_back({{"face", c.face}, {"bary", {c.bary[1], c.bary[2]}}});
    j["turningPoints"] = nlohmann::ordered_json::array();
    for (const auto& t : e.turning_points)
        j["turningPoints"].push_back({{"hairlineVertex", t.hairline_vertex}, {"curveParam", t.curve_param}});
    j["earMarkers"] = {e.ear_markers[0], e.ear_markers[1]};
    return j.dump();
}

namespace {

/// A surface point sitting exactly on scalp vertex `v`.
SurfacePoint vertex_point(const BodyModel& body, const ScalpPatch& scalp, std::uint32_t v) {
    const std::uint32_t bv = scalp.vertices[v];
    for (std::size_t f = 0; f < scalp.local_faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (static_cast<std::uint32_t>(scalp.local_faces[f][k]) == v) {
                SurfacePoint sp;
                sp.face = scalp.faces[f];
                sp.bary = Vec3::Zero();
                for (int c = 0; c < 3; ++c)
                    if (static_cast<std::uint32_t>(body.faces[sp.face][c]) == bv) sp.bary[c] = 1.0;
                return sp;
            }
        }
    }
    throw ValidationError("vertex is not part of the scalp");
}

}  // namespace

std::vector<double> arc_length_params(std::span<const Vec3> pts) {
    std::vector<double> s(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = s.empty() ? 0.0 : s.back();
    if (!(total > 0.0)) throw ValidationError("polyline has zero length");
    for (auto& x : s) x /= total;
    return s;
}

HairlineEdit identity_edit(const BodyModel& body, const ScalpPatch& scalp, const HairlineSplit& split) {
    HairlineEdit e;
    std::vector<Vec3> pts;
    for (const auto v : split.front) {
        e.curve.push_back(vertex_point(body, scalp, v));
        pts.push_back(scalp.rest[v]);
    }
    const auto params = arc_length_params(pts);
    const auto corners = detect_turning_points(scalp, split);
    for (std::size_t i = 1; i + 1 < split.front.size(); ++i) {
        const auto bv = scalp.vertices[split.front[i]];
        if (std::find(corners.begin(), corners.end(), bv) != corners.end()) e.turning_points.push_back({bv, params[i]});
    }
    e.ear_markers = {scalp.vertices[split.front.front()], scalp.vertices[split.front.back()]};
    return e;
}

SurfacePoint evaluate_curve(const HeadPatch& head, std::span<const Vec3> pts, std::span<const SurfacePoint> controls,
                            std::span<const double> params, double s) {
    constexpr double kSnap = 1e-12;
    s = std::clamp(s, 0.0, 1.0);
    const auto it = std::upper_bound(params.begin(), params.end(), s);
    std::size_t k = it == params.begin() ? 0 : static_cast<std::size_t>(it - params.begin()) - 1;
    k = std::min(k, params.size() - 2);
    if (std::abs(s - params[k]) <= kSnap) return controls[k];
    if (std::abs(s - params[k + 1]) <= kSnap) return controls[k + 1];
    const double span = params[k + 1] - params[k];
    const double t = span > 0.0 ? (s - params[k]) / span : 0.0;
    return head.project((1.0 - t) * pts[k] + t * pts[k + 1]);
}

DirichletMap build_correspondence(const BodyModel& body, const HeadPatch& head, const ScalpPatch& scalp,
                                  const HairlineSplit& split, const HairlineEdit& edit) {
    if (edit.curve.size() < 2) throw ValidationError("hairline curve needs at least two points");
    const auto& front = split.front;
    if (scalp.vertices[front.front()] != edit.ear_markers[0] || scalp.vertices[front.back()] != edit.ear_markers[1])
        throw ValidationError("edit ear markers do not match the hairline split");

    std::vector<Vec3> curve_pts;
    for (const auto& c : edit.curve) curve_pts.push_back(head.point(c));
    const auto curve_params = arc_length_params(curve_pts);

    std::vector<std::pair<std::size_t, double>> anchors{{0, 0.0}};
    for (const auto& tp : edit.turning_points) {
        const auto local = scalp.local_vertex(tp.hairline_vertex);
        const auto it = local ? std::find(front.begin() + 1, front.end() - 1, *local) : front.end() - 1;
        if (it == front.end() - 1)
            throw ValidationError("turning point vertex " + std::to_string(tp.hairline_vertex) +
                                  " is not an interior front-hairline vertex");
        anchors.emplace_back(static_cast<std::size_t>(it - front.begin()), tp.curve_param);
    }
    anchors.emplace_back(front.size() - 1, 1.0);
    std::sort(anchors.begin(), anchors.end());
    for (std::size_t i = 1; i < anchors.size(); ++i) {
        if (anchors[i].first == anchors[i - 1].first) throw ValidationError("duplicate turning point");
        if (!(anchors[i].second > anchors[i - 1].second))
            throw ValidationError("turning points are not monotone along the curve (zero-length curve segment)");
    }

    std::vector<double> hair_len(front.size(), 0.0);
    for (std::size_t i = 1; i < front.size(); ++i)
        hair_len[i] = hair_len[i - 1] + (scalp.rest[front[i]] - scalp.rest[front[i - 1]]).norm();

    DirichletMap h;
    for (std::size_t a = 0; a + 1 < anchors.size(); ++a) {
        const auto [ia, ca] = anchors[a];
        const auto [ib, cb] = anchors[a + 1];
        const double len = hair_len[ib] - hair_len[ia];
        if (!(len > 0.0)) throw ValidationError("zero-length hairline segment between turning points");
        const std::size_t last = (a + 2 == anchors.size()) ? ib : ib - 1;
        for (std::size_t j = ia; j <= last; ++j) {
            const double t = (hair_len[j] - hair_len[ia]) / len;
            const double s = j == ia ? ca : (j == ib ? cb : ca + t * (cb - ca));
            h.vertices.push_back(front[j]);
            h.targets.push_back(evaluate_curve(head, curve_pts, edit.curve, curve_params, s));
        }
    }
    for (std::size_t j = 1; j + 1 < split.back.size(); ++j) {
        h.vertices.push_back(split.back[j]);
        h.targets.push_back(vertex_point(body, scalp, split.back[j]));
    }
    return h;
}

}  // namespace hairadapt
