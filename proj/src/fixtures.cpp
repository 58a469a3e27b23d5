#include "hairadapt/fixtures.hpp"

#include "hairadapt/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace hairadapt {

namespace {

struct ProfilePoint {
    double r, y;
};

struct Landmarks {
    double arc_end_y;     // bottom of the head sphere
    double neck_bottom_y;
    double shoulder_y;
    double bottom_y;
};

constexpr double kHeadArcEnd = 2.35;  // polar angle where the head meets the neck

Landmarks landmarks(const CharacterShape& s) {
    Landmarks l;
    l.arc_end_y = s.head_center_y + s.head_radius * std::cos(kHeadArcEnd);
    l.neck_bottom_y = l.arc_end_y - 0.01 - s.neck_length;
    l.shoulder_y = l.neck_bottom_y - 0.05;
    l.bottom_y = l.shoulder_y - s.torso_length;
    return l;
}

std::vector<ProfilePoint> profile(const CharacterShape& s) {
    const Landmarks l = landmarks(s);
    std::vector<ProfilePoint> pts;
    for (int k = 0; k <= 60; ++k) {
        const double phi = kHeadArcEnd * k / 60.0;
        pts.push_back({s.head_radius * std::sin(phi), s.head_center_y + s.head_radius * std::cos(phi)});
    }
    pts.push_back({s.neck_radius, l.arc_end_y - 0.01});
    pts.push_back({s.neck_radius, l.neck_bottom_y});
    pts.push_back({s.shoulder_radius, l.shoulder_y});
    pts.push_back({s.shoulder_radius, l.bottom_y});
    pts.push_back({0.0, l.bottom_y});
    return pts;
}

/// Profile resampled at `count` arc-length fractions in (0, 1).
std::vector<ProfilePoint> resample(const std::vector<ProfilePoint>& pts, int count) {
    std::vector<double> acc{0.0};
    for (std::size_t i = 1; i < pts.size(); ++i)
        acc.push_back(acc.back() + std::hypot(pts[i].r - pts[i - 1].r, pts[i].y - pts[i - 1].y));
    std::vector<ProfilePoint> out;
    std::size_t seg = 1;
    for (int i = 1; i <= count; ++i) {
        const double target = acc.back() * i / (count + 1);
        while (acc[seg] < target) ++seg;
        const double t = (target - acc[seg - 1]) / (acc[seg] - acc[seg - 1]);
        out.push_back({pts[seg - 1].r + t * (pts[seg].r - pts[seg - 1].r),
                       pts[seg - 1].y + t * (pts[seg].y - pts[seg - 1].y)});
    }
    return out;
}

Eigen::Vector2d horizontal_scale(const CharacterShape& s, double y) {
    const Landmarks l = landmarks(s);
    const Eigen::Vector2d head(s.head_sx, s.head_sz), torso(s.torso_sx, s.torso_sz);
    if (y >= l.arc_end_y) return head;
    if (y <= l.neck_bottom_y) return torso;
    const double t = (y - l.neck_bottom_y) / (l.arc_end_y - l.neck_bottom_y);
    return torso + t * (head - torso);
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

std::mt19937_64 strand_rng(std::uint64_t seed, std::size_t strand) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(strand), 0x5eedu};
    return std::mt19937_64(seq);
}

// GCC 11's SLP vectorizer folds a plain double -> float -> double round trip
// away at -O3; the volatile store keeps the narrowing.
double to_float(double v) {
    volatile float f = static_cast<float>(v);
    return f;
}

Vec3 to_float(const Vec3& p) { return Vec3(to_float(p.x()), to_float(p.y()), to_float(p.z())); }

}  // namespace

CharacterShape character_preset(int id) {
    CharacterShape s;
    switch (id) {
        case 0: break;
        case 1:
            s.head_radius = 0.112;
            s.head_sx = 1.0;
            s.head_sz = 1.12;
            s.neck_length = 0.085;
            s.shoulder_radius = 0.21;
            break;
        case 2:
            s.head_radius = 0.092;
            s.head_sx = 0.9;
            s.head_sz = 1.02;
            s.neck_radius = 0.05;
            s.neck_length = 0.06;
            s.shoulder_radius = 0.17;
            s.head_center_y = 1.55;
            break;
        case 3:
            s.head_radius = 0.104;
            s.head_sx = 1.02;
            s.head_sz = 1.0;
            s.neck_radius = 0.06;
            s.torso_sz = 0.62;
            break;
        default: throw ValidationError("unknown character preset " + std::to_string(id));
    }
    return s;
}

Mesh make_character_mesh(const CharacterShape& s) {
    if (s.rings < 3 || s.columns < 3) throw ValidationError("character mesh needs at least 3 rings and columns");
    const auto rings = resample(profile(s), s.rings);
    const auto prof = profile(s);
    Mesh m;
    m.vertices.push_back(Vec3(0.0, prof.front().y, 0.0));
    for (const auto& rp : rings) {
        const Eigen::Vector2d sc = horizontal_scale(s, rp.y);
        for (int j = 0; j < s.columns; ++j) {
            const double th = 2.0 * std::numbers::pi * j / s.columns;
            m.vertices.push_back(Vec3(sc.x() * rp.r * std::cos(th), rp.y, sc.y() * rp.r * std::sin(th)));
        }
    }
    m.vertices.push_back(Vec3(0.0, prof.back().y, 0.0));
    const int top = 0, bottom = static_cast<int>(m.vertices.size()) - 1;
    auto at = [&](int ring, int col) { return 1 + ring * s.columns + (col % s.columns); };
    for (int j = 0; j < s.columns; ++j) m.faces.emplace_back(top, at(0, j + 1), at(0, j));
    for (int i = 0; i + 1 < s.rings; ++i) {
        for (int j = 0; j < s.columns; ++j) {
            const int a = at(i, j), b = at(i, j + 1), c = at(i + 1, j), d = at(i + 1, j + 1);
            m.faces.emplace_back(a, b, c);
            m.faces.emplace_back(b, d, c);
        }
    }
    for (int j = 0; j < s.columns; ++j) m.faces.emplace_back(at(s.rings - 1, j), at(s.rings - 1, j + 1), bottom);
    return m;
}

Skeleton make_character_skeleton(const CharacterShape& s, const Mesh& mesh) {
    const Landmarks l = landmarks(s);
    Skeleton sk;
    const double clav_x = 0.8 * s.shoulder_radius * s.torso_sx;
    sk.bones = {
        {"spine", Vec3(0, l.bottom_y + 0.05, 0), Vec3(0, l.neck_bottom_y, 0)},
        {"neck", Vec3(0, l.neck_bottom_y, 0), Vec3(0, l.arc_end_y, 0)},
        {"head", Vec3(0, l.arc_end_y, 0), Vec3(0, s.head_center_y + 0.7 * s.head_radius, 0)},
        {"clavicle_l", Vec3(0, l.neck_bottom_y - 0.02, 0), Vec3(clav_x, l.shoulder_y - 0.02, 0)},
        {"clavicle_r", Vec3(0, l.neck_bottom_y - 0.02, 0), Vec3(-clav_x, l.shoulder_y - 0.02, 0)},
    };
    sk.weights.resize(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        std::vector<double> w(sk.bones.size());
        double sum = 0.0;
        for (std::size_t b = 0; b < sk.bones.size(); ++b) {
            const double d = segment_distance(mesh.vertices[v], sk.bones[b].head, sk.bones[b].tail);
            w[b] = 1.0 / (std::pow(d, 4) + 1e-12);
            sum += w[b];
        }
        double kept = 0.0;
        for (auto& x : w) {
            x /= sum;
            if (x < 1e-3) x = 0.0;
            kept += x;
        }
        for (std::size_t b = 0; b < w.size(); ++b)
            if (w[b] > 0.0) sk.weights[v][static_cast<int>(b)] = w[b] / kept;
    }
    return sk;
}

BodyModel make_character(const CharacterShape& shape, double region_threshold) {
    Mesh mesh = make_character_mesh(shape);
    Skeleton sk = make_character_skeleton(shape, mesh);
    return make_body(std::move(mesh), std::move(sk), region_threshold);
}

std::vector<std::uint32_t> scalp_cap_faces(const BodyModel& body, const CharacterShape& s, const HairParams& params) {
    const double deg = std::numbers::pi / 180.0;
    std::vector<std::uint32_t> out;
    for (std::uint32_t f = 0; f < body.faces.size(); ++f) {
        const auto& t = body.faces[f];
        const Vec3 c = (body.vertices[t[0]] + body.vertices[t[1]] + body.vertices[t[2]]) / 3.0;
        const Vec3 local((c.x()) / s.head_sx, c.y() - s.head_center_y, c.z() / s.head_sz);
        const double polar = std::acos(std::clamp(local.normalized().y(), -1.0, 1.0));
        const double horiz = std::hypot(local.x(), local.z());
        const double facing = horiz > 1e-12 ? local.z() / horiz : 0.0;
        const double limit = params.back_limit_deg + (params.front_limit_deg - params.back_limit_deg) * 0.5 * (1.0 + facing);
        if (polar < limit * deg) out.push_back(f);
    }
    return out;
}

Hairstyle make_hairstyle(const BodyModel& body, const CharacterShape& shape, const HairParams& params) {
    if (params.strands == 0) throw ValidationError("hair fixture needs at least one strand");
    if (params.particles < 2) throw ValidationError("strands need at least two particles");
    const auto cap = scalp_cap_faces(body, shape, params);
    if (cap.empty()) throw ValidationError("scalp cap is empty");

    // Largest-remainder allocation of strands to cap faces by area.
    std::vector<double> area(cap.size());
    double total = 0.0;
    for (std::size_t i = 0; i < cap.size(); ++i) total += area[i] = body.face_area(cap[i]);
    std::vector<std::size_t> count(cap.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < cap.size(); ++i) {
        const double exact = params.strands * area[i] / total;
        count[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += count[i];
        remainder.emplace_back(exact - count[i], i);
    }
    std::stable_sort(remainder.begin(), remainder.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < params.strands; ++r, ++assigned) ++count[remainder[r % remainder.size()].second];

    std::vector<SurfacePoint> roots;
    {
        std::mt19937_64 rng(params.seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (std::size_t i = 0; i < cap.size(); ++i) {
            for (std::size_t c = 0; c < count[i]; ++c) {
                // Stratify along the first barycentric direction.
                const double u1 = (c + U(rng)) / count[i], u2 = U(rng);
                const double su = std::sqrt(u1);
                roots.push_back({cap[i], Vec3(1.0 - su, su * (1.0 - u2), su * u2)});
            }
        }
    }

    MeshQuery mesh(body);
    Hairstyle hair;
    Points strand;
    const Vec3 down(0.0, -1.0, 0.0);
    for (std::size_t s = 0; s < roots.size(); ++s) {
        auto rng = strand_rng(params.seed, s);
        std::uniform_int_distribution<int> extra(0, std::max(0, params.particle_jitter));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const int n = params.particles + (params.particle_jitter > 0 ? extra(rng) : 0);
        const double phase = 2.0 * std::numbers::pi * U(rng);
        const double seg = params.segment * (0.9 + 0.2 * U(rng));

        strand.assign(1, to_float(body.point(roots[s])));
        Vec3 dir = body.face_normal(roots[s].face);
        for (int k = 1; k < n; ++k) {
            Vec3 grow = dir + params.gravity * down;
            if (params.curl > 0.0) {
                const Vec3 u = dir.unitOrthogonal(), v = dir.cross(u);
                const double a = phase + params.curl_frequency * k;
                grow += params.curl * (std::cos(a) * u + std::sin(a) * v);
            }
            dir = grow.normalized();
            Vec3 p = strand.back() + seg * dir;
            if (params.collide) {
                for (int pass = 0; pass < 3; ++pass) {
                    const auto hit = mesh.closest(p);
                    if (hit.signed_distance >= params.clearance) break;
                    p = hit.point + params.clearance * 1.01 * hit.normal;
                }
                dir = (p - strand.back()).normalized();
            }
            strand.push_back(to_float(p));
        }
        hair.add_strand(strand);
    }
    return hair;
}

Hairstyle make_large_fixture(const BodyModel& body, const CharacterShape& shape) {
    HairParams params;
    params.strands = 113000;
    params.particles = 25;
    params.collide = false;
    params.curl = 0.8;
    params.segment = 0.008;
    // Two of every three strands get one extra particle: 2,900,333 particles.
    Hairstyle base = make_hairstyle(body, shape, params);
    Hairstyle out;
    Points strand;
    for (std::size_t s = 0; s < base.strand_count(); ++s) {
        const auto b = base.strand_begin(s), e = base.strand_end(s);
        strand.assign(base.positions().begin() + b, base.positions().begin() + e);
        if (s % 3 != 0) strand.push_back(to_float(strand.back() + (strand.back() - strand[strand.size() - 2])));
        out.add_strand(strand);
    }
    return out;
}

HairlineEdit synthetic_hairline_edit(const BodyModel& body, const HeadPatch& head, const ScalpPatch& scalp,
                                     const HairlineSplit& split, const HairlineEditShape& shape) {
    const HairlineEdit base = identity_edit(body, scalp, split);
    HairlineEdit e = base;
    const auto& front = split.front;
    std::vector<Vec3> pts;
    for (const auto v : front) pts.push_back(scalp.rest[v]);
    const auto params = arc_length_params(pts);
    Vec3 centroid = Vec3::Zero();
    for (const auto& x : scalp.rest) centroid += x;
    centroid /= static_cast<double>(scalp.rest.size());

    e.curve.clear();
    std::vector<Vec3> moved;
    for (std::size_t i = 0; i < front.size(); ++i) {
        const Vec3& X = pts[i];
        if (i == 0 || i + 1 == front.size()) {
            e.curve.push_back(base.curve[i]);
            moved.push_back(X);
            continue;
        }
        const Vec3 n = head.query.closest(X).normal;
        const Vec3 tangent = pts[i + 1] - pts[i - 1];
        Vec3 out = tangent.cross(n);
        if (out.norm() < 1e-12) out = X - centroid;
        out.normalize();
        if (out.dot(X - centroid) < 0.0) out = -out;
        const double t = params[i];
        const double bump = std::exp(-std::pow((t - shape.center) / shape.width, 2)) * std::sin(std::numbers::pi * t);
        const SurfacePoint sp = head.project(X + shape.amplitude * bump * out);
        e.curve.push_back(sp);
        moved.push_back(head.point(sp));
    }
    const auto curve_params = arc_length_params(moved);
    for (auto& tp : e.turning_points) {
        const auto local = *scalp.local_vertex(tp.hairline_vertex);
        const auto k = static_cast<std::size_t>(std::find(front.begin(), front.end(), local) - front.begin());
        tp.curve_param = curve_params[k];
    }
    return e;
}

std::vector<HairlineEditShape> bench_edit_shapes() {
    return {{0.010, 0.5, 0.30}, {0.015, 0.5, 0.20}, {-0.008, 0.5, 0.30},
            {0.012, 0.3, 0.15}, {0.012, 0.7, 0.15}, {-0.010, 0.4, 0.20}};
}

}  // namespace hairadapt
