#include "doctest.h"
#include "support.hpp"

using namespace testing;

TEST_SUITE("spatial") {

TEST_CASE("closest point on a triangle matches a dense barycentric scan") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng));
        const Vec3 p = 2.0 * Vec3(u(rng), u(rng), u(rng));
        const auto proj = closest_point_on_triangle(p, a, b, c);
        double best = std::numeric_limits<double>::infinity();
        const int n = 200;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                const double s = double(i) / n, t = double(j) / n;
                best = std::min(best, (p - ((1 - s - t) * a + s * b + t * c)).norm());
            }
        CHECK((p - proj.point).norm() <= best + 1e-12);
        CHECK((p - proj.point).norm() >= best - 0.02);
        CHECK((proj.bary.x() * a + proj.bary.y() * b + proj.bary.z() * c - proj.point).norm() < 1e-12);
        CHECK(proj.bary.minCoeff() >= -1e-12);
        CHECK(proj.bary.sum() == doctest::Approx(1.0));
    }
}

TEST_CASE("mesh closest point agrees with brute force over all faces") {
    const auto body = make_character(character_preset(0));
    const MeshQuery q(body);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 p = Vec3(0.0, 1.5, 0.0) + Vec3(u(rng), u(rng), u(rng));
        const auto hit = q.closest(p);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : body.faces) {
            const auto pr = closest_point_on_triangle(p, body.vertices[f[0]], body.vertices[f[1]], body.vertices[f[2]]);
            best = std::min(best, (p - pr.point).norm());
        }
        CHECK(hit.distance == doctest::Approx(best).epsilon(1e-12));
        CHECK((body.point(hit.where) - hit.point).norm() < 1e-12);
        CHECK(std::abs(hit.signed_distance) == doctest::Approx(hit.distance));
        CHECK(hit.normal.norm() == doctest::Approx(1.0));
    }
}

TEST_CASE("signed distance is negative inside the closed character") {
    const auto shape = character_preset(0);
    const MeshQuery q(make_character(shape));
    CHECK(q.closest(Vec3(0.0, shape.head_center_y, 0.0)).signed_distance < 0.0);
    CHECK(q.closest(Vec3(0.0, shape.head_center_y, 0.5)).signed_distance > 0.0);
    CHECK(q.closest(Vec3(0.0, shape.head_center_y + 0.3, 0.0)).signed_distance > 0.0);
}

TEST_CASE("raycast returns the first hit along the ray") {
    const auto shape = character_preset(0);
    const auto body = make_character(shape);
    const MeshQuery q(body);
    const Vec3 c(0.0, shape.head_center_y, 0.0);
    const auto hit = q.raycast(c, Vec3(0.0, 0.0, 2.0));
    REQUIRE(hit);
    CHECK(hit->point.z() == doctest::Approx(shape.head_radius * shape.head_sz).epsilon(0.02));
    CHECK((c + hit->t * Vec3(0.0, 0.0, 2.0) - hit->point).norm() < 1e-12);
    CHECK((body.point(hit->where) - hit->point).norm() < 1e-12);
    CHECK_FALSE(q.raycast(Vec3(0.0, 5.0, 0.0), Vec3(0.0, 1.0, 0.0)));

    double first = std::numeric_limits<double>::infinity();
    for (const auto& f : body.faces)
        if (auto t = intersect_ray_triangle(c, Vec3(0.0, 0.0, 2.0), body.vertices[f[0]], body.vertices[f[1]],
                                            body.vertices[f[2]]);
            t && t->x() > 0.0)
            first = std::min(first, t->x());
    CHECK(hit->t == doctest::Approx(first).epsilon(1e-12));
}

TEST_CASE("kd-tree kNN with exclusion matches sorted brute force") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Points pts(500);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    std::vector<std::uint32_t> subset;
    for (std::uint32_t i = 0; i < pts.size(); i += 2) subset.push_back(i);
    const PointKdTree tree(pts, subset);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 q(u(rng), u(rng), u(rng));
        auto exclude = [](std::uint32_t i) { return i % 10 == 0; };
        const auto got = tree.knn(q, 7, exclude);
        std::vector<std::pair<double, std::uint32_t>> all;
        for (auto i : subset)
            if (!exclude(i)) all.emplace_back((pts[i] - q).norm(), i);
        std::sort(all.begin(), all.end());
        REQUIRE(got.size() == 7);
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(got[j].index == all[j].second);
            CHECK(got[j].distance == doctest::Approx(all[j].first));
        }
    }
    CHECK(tree.knn(Vec3::Zero(), 1000).size() == subset.size());
}

}  // TEST_SUITE

TEST_SUITE("positioning") {

TEST_CASE("replaying anchors on the source body reproduces the hairstyle") {
    const auto scene = make_scene(60);
    const auto anchors = compute_anchors(scene.hair, scene.source, 100.0);
    const auto replay = replay_coordinates(anchors, scene.source);
    CHECK(max_distance(replay, scene.hair.positions()) < 1e-9);
    for (const auto& a : anchors) CHECK(a.surface.valid());
}

TEST_CASE("replay on the source leaves nothing discrepant and Poisson smoothing is a no-op") {
    const auto scene = make_scene(40);
    AdaptationConfig cfg;
    const auto t = initial_transfer(scene.hair, scene.source, scene.source, cfg);
    CHECK(t.discrepant.empty());
    CHECK(max_distance(t.p_hat, t.p_tilde) == 0.0);
}

TEST_CASE("Poisson smoothing restores source Laplacians on the discrepant particles") {
    const auto scene = make_scene(20);
    const auto& src = scene.hair;
    auto bent = src.positions();
    std::vector<std::uint32_t> free;
    for (std::size_t s = 0; s < src.strand_count(); ++s) {
        const auto mid = src.strand_begin(s) + src.strand_size(s) / 2;
        bent[mid] += Vec3(0.0, 0.0, 0.02);
        free.push_back(mid - 1);
        free.push_back(mid);
        free.push_back(mid + 1);
    }
    std::sort(free.begin(), free.end());
    const auto flagged = detect_discrepant(bent, src, 0.3);
    CHECK(!flagged.empty());
    for (auto i : flagged) CHECK_FALSE(src.is_root(i));

    const auto smooth = poisson_smooth(bent, src, free);
    for (auto i : free) CHECK((strand_laplacian(smooth, src, i) - strand_laplacian(src.positions(), src, i)).norm() < 1e-9);
    std::vector<char> is_free(bent.size(), 0);
    for (auto i : free) is_free[i] = 1;
    for (std::size_t i = 0; i < bent.size(); ++i)
        if (!is_free[i]) CHECK(smooth[i] == bent[i]);
    // The bump was a pure translation of one particle; restoring the Laplacians
    // around it puts it back.
    CHECK(max_distance(smooth, src.positions()) < 1e-9);
}

TEST_CASE("transfer to another character keeps roots on the target surface") {
    const auto scene = make_scene(60);
    AdaptationConfig cfg;
    const auto t = initial_transfer(scene.hair, scene.source, scene.target, cfg);
    const MeshQuery q(scene.target);
    for (std::size_t s = 0; s < scene.hair.strand_count(); ++s) {
        const auto r = scene.hair.root_of(s);
        CHECK(q.closest(t.p_hat[r]).distance < 1e-3);
    }
}

}  // TEST_SUITE
