#include "hairadapt/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hairadapt {

namespace {

double closest_bone_parameter(const Bone& bone, const Vec3& p) {
    const Vec3 axis = bone.tail - bone.head;
    return std::clamp((p - bone.head).dot(axis) / axis.squaredNorm(), 0.0, 1.0);
}

Anchor nearest_face_anchor(const Vec3& p, const BodyModel& body, const MeshQuery& mesh) {
    // Prefer the nearest face whose normal line through p meets the face
    // interior, so q + eta * n reproduces p exactly.
    Anchor a;
    a.bone = kNearestFaceAnchor;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t f = 0; f < body.faces.size(); ++f) {
        const Vec3 n = mesh.face_normal(f);
        const auto& t = body.faces[f];
        const Vec3 &v0 = body.vertices[t[0]], &v1 = body.vertices[t[1]], &v2 = body.vertices[t[2]];
        const double eta = (p - v0).dot(n);
        if (std::abs(eta) >= best) continue;
        const Vec3 foot = p - eta * n;
        const Vec3 e1 = v1 - v0, e2 = v2 - v0, r = foot - v0;
        const double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
        const double det = d11 * d22 - d12 * d12;
        const double b1 = (d22 * r.dot(e1) - d12 * r.dot(e2)) / det;
        const double b2 = (d11 * r.dot(e2) - d12 * r.dot(e1)) / det;
        if (b1 < 0.0 || b2 < 0.0 || b1 + b2 > 1.0) continue;
        best = std::abs(eta);
        a.surface = SurfacePoint{f, Vec3(1.0 - b1 - b2, b1, b2)};
        a.eta = eta;
    }
    if (std::isfinite(best)) return a;
    const auto hit = mesh.closest(p);
    a.surface = hit.where;
    a.eta = (p - hit.point).dot(mesh.face_normal(hit.where.face));
    return a;
}

}  // namespace

namespace {

std::optional<AnchorChoice> best_bone_ray(const Vec3& particle, const BodyModel& body, const MeshQuery& mesh,
                                          double sigma_bone, bool respect_regions) {
    std::optional<AnchorChoice> best;
    for (std::size_t b = 0; b < body.bones.size(); ++b) {
        const Bone& bone = body.bones[b];
        const double t = closest_bone_parameter(bone, particle);
        const Vec3 o = bone.head + t * (bone.tail - bone.head);
        const Vec3 dir = particle - o;
        if (dir.norm() < 1e-12) continue;
        const auto hit = mesh.raycast(o, dir, 0.0);
        if (!hit || (respect_regions && !body.in_region(b, hit->where.face))) continue;
        const Vec3 ray = hit->point - o;
        if (ray.norm() < 1e-12) continue;
        const double align = ray.normalized().dot(bone.direction());
        const double score = (particle - hit->point).norm() * std::exp(sigma_bone * align * align);
        if (!best || score < best->score) {
            best = AnchorChoice{static_cast<std::uint16_t>(b), t, o, hit->where, hit->point, score};
        }
    }
    return best;
}

}  // namespace

std::optional<AnchorChoice> select_anchor(const Vec3& particle, const BodyModel& body, const MeshQuery& mesh,
                                          double sigma_bone) {
    if (body.bones.empty()) throw ValidationError("select_anchor: body has no bones");
    return best_bone_ray(particle, body, mesh, sigma_bone, true);
}

LocalAnchorSet compute_anchors(const Hairstyle& source, const BodyModel& body, double sigma_bone) {
    return compute_anchors(source, body, MeshQuery(body), sigma_bone);
}

LocalAnchorSet compute_anchors(const Hairstyle& source, const BodyModel& body, const MeshQuery& mesh,
                               double sigma_bone) {
    if (body.bones.size() >= kNearestFaceAnchor) throw ValidationError("too many bones for anchor encoding");
    const auto& p = source.positions();
    LocalAnchorSet anchors(p.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(p.size()); ++i) {
        auto choice = select_anchor(p[i], body, mesh, sigma_bone);
        if (!choice) choice = best_bone_ray(p[i], body, mesh, sigma_bone, false);
        if (!choice) {
            anchors[i] = nearest_face_anchor(p[i], body, mesh);
            continue;
        }
        Anchor& a = anchors[i];
        a.bone = choice->bone;
        a.t = choice->t;
        a.surface = choice->surface;
        // p, q and o are collinear; the sign is negative only for particles
        // lying before the first surface crossing (inside the body).
        a.eta = (p[i] - choice->surface_point).dot((choice->surface_point - choice->bone_point).normalized());
    }
    return anchors;
}

Points replay_coordinates(const LocalAnchorSet& anchors, const BodyModel& target) {
    Points out(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const Anchor& a = anchors[i];
        const Vec3 q = target.point(a.surface);
        if (a.bone == kNearestFaceAnchor) {
            out[i] = q + a.eta * target.face_normal(a.surface.face);
            continue;
        }
        const Bone& bone = target.bones.at(a.bone);
        const Vec3 o = bone.head + a.t * (bone.tail - bone.head);
        const Vec3 ray = q - o;
        const double len = ray.norm();
        if (len < 1e-9) throw DegenerateAnchorError(i);
        out[i] = q + a.eta * (ray / len);
    }
    return out;
}

Vec3 strand_laplacian(const Points& f, const Hairstyle& source, std::size_t i) {
    const auto& s = source.positions();
    return (f[i + 1] - f[i]) / (s[i + 1] - s[i]).norm() - (f[i] - f[i - 1]) / (s[i] - s[i - 1]).norm();
}

std::vector<std::uint32_t> detect_discrepant(const Points& p_tilde, const Hairstyle& source, double eps_s) {
    std::vector<std::uint32_t> out;
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        for (auto i = source.strand_begin(s) + 1; i + 1 < source.strand_end(s); ++i) {
            const Vec3 diff = strand_laplacian(p_tilde, source, i) - strand_laplacian(source.positions(), source, i);
            if (diff.norm() > eps_s) out.push_back(i);
        }
    }
    return out;
}

Points poisson_smooth(const Points& p_tilde, const Hairstyle& source, std::span<const std::uint32_t> discrepant) {
    Points out = p_tilde;
    if (discrepant.empty()) return out;
    const auto& src = source.positions();
    std::vector<char> unknown(p_tilde.size(), 0);
    for (auto i : discrepant) unknown[i] = 1;

    // Each maximal run of unknowns sits between two Dirichlet particles and
    // yields one tridiagonal system (Thomas algorithm, shared by x/y/z).
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        const auto begin = source.strand_begin(s), end = source.strand_end(s);
        if (unknown[begin] || unknown[end - 1])
            throw ValidationError("poisson_smooth: strand endpoints must stay fixed");
        for (auto i = begin + 1; i + 1 < end;) {
            if (!unknown[i]) {
                ++i;
                continue;
            }
            auto j = i;
            while (unknown[j]) ++j;
            const std::size_t n = j - i;
            std::vector<double> lower(n), diag(n), upper(n);
            std::vector<Vec3> rhs(n);
            for (std::size_t r = 0; r < n; ++r) {
                const auto k = i + r;
                const double wp = 1.0 / (src[k + 1] - src[k]).norm();
                const double wm = 1.0 / (src[k] - src[k - 1]).norm();
                lower[r] = wm;
                diag[r] = -(wp + wm);
                upper[r] = wp;
                rhs[r] = strand_laplacian(src, source, k);
            }
            rhs.front() -= lower.front() * out[i - 1];
            rhs.back() -= upper.back() * out[j];
            for (std::size_t r = 1; r < n; ++r) {
                const double m = lower[r] / diag[r - 1];
                diag[r] -= m * upper[r - 1];
                rhs[r] -= m * rhs[r - 1];
            }
            out[i + n - 1] = rhs[n - 1] / diag[n - 1];
            for (std::size_t r = n - 1; r-- > 0;) out[i + r] = (rhs[r] - upper[r] * out[i + r + 1]) / diag[r];
            i = j;
        }
    }
    return out;
}

InitialTransfer transfer_from_anchors(const LocalAnchorSet& anchors, const Hairstyle& source,
                                      const BodyModel& target, double eps_s) {
    InitialTransfer out;
    out.p_tilde = replay_coordinates(anchors, target);
    out.discrepant = detect_discrepant(out.p_tilde, source, eps_s);
    out.p_hat = poisson_smooth(out.p_tilde, source, out.discrepant);
    return out;
}

InitialTransfer initial_transfer(const Hairstyle& source, const BodyModel& source_body, const BodyModel& target_body,
                                 const AdaptationConfig& config, LocalAnchorSet* anchors_out) {
    const auto report = validate_pair(source_body, target_body);
    if (!report.ok) throw ValidationError("source/target bodies are incompatible: " + report.message);
    LocalAnchorSet anchors = compute_anchors(source, source_body, config.sigma_bone);
    auto out = transfer_from_anchors(anchors, source, target_body, config.eps_s);
    if (anchors_out) *anchors_out = std::move(anchors);
    return out;
}

}  // namespace hairadapt
