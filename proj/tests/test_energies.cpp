#include "doctest.h"
#include "support.hpp"

using namespace testing;

namespace {

Points perturbed(const Points& p, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Points out = p;
    for (auto& x : out) x += Vec3(n(rng), n(rng), n(rng));
    return out;
}

/// Central-difference gradient check of an energy against an analytic gradient.
double gradient_error(const std::function<double(const Points&)>& energy, const Points& grad, const Points& p) {
    double worst = 0.0, scale = 1e-12;
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (int d = 0; d < 3; ++d) {
            Points a = p, b = p;
            a[i][d] += h;
            b[i][d] -= h;
            const double fd = (energy(a) - energy(b)) / (2 * h);
            worst = std::max(worst, std::abs(fd - grad[i][d]));
            scale = std::max(scale, std::abs(grad[i][d]));
        }
    return worst / scale;
}

}  // namespace

TEST_SUITE("energies") {

TEST_CASE("inverse-distance weights sum to one and favour close neighbours") {
    const double d[] = {0.1, 0.2, 0.4};
    const auto w = laplacian_weights(d);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w[0] == doctest::Approx(4.0 / 7.0));
    CHECK(w[2] == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("kNN features match a brute-force search over other strands") {
    const auto scene = make_scene(25, 1, 8);
    const auto& hair = scene.hair;
    const auto f = build_knn_features(hair, 5);
    const auto sid = hair.strand_ids();
    const auto& p = hair.positions();
    REQUIRE(f.particle_count() == hair.particle_count());
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::uint32_t j = 0; j < p.size(); ++j)
            if (sid[j] != sid[i]) all.emplace_back((p[i] - p[j]).norm(), j);
        std::sort(all.begin(), all.end());
        REQUIRE(f.offsets[i + 1] - f.offsets[i] == 5);
        Vec3 ref = Vec3::Zero();
        double wsum = 0.0;
        for (int e = 0; e < 5; ++e) {
            const auto j = f.neighbors[f.offsets[i] + e];
            CHECK((p[i] - p[j]).norm() == doctest::Approx(all[e].first).epsilon(1e-12));
            const double w = f.weights[f.offsets[i] + e];
            ref += w * (p[i] - p[j]);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
        CHECK((ref - f.reference[i]).norm() < 1e-14);
    }
    CHECK(inter_strand_energy(f, p) < 1e-28);
}

TEST_CASE("a single strand has no cross-strand features") {
    Hairstyle h;
    const Vec3 s[] = {{0, 0, 0}, {0, 1, 0}, {0, 2, 0}};
    h.add_strand(s);
    CHECK(build_knn_features(h, 5).empty());
}

TEST_CASE("residual-set gradients agree with finite differences") {
    const auto scene = make_scene(8, 1, 6);
    const auto& hair = scene.hair;
    const auto f = build_knn_features(hair, 5);
    const auto p = perturbed(hair.positions(), 0.01, 1);
    std::vector<double> gamma(hair.particle_count());
    for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = 0.2 + 0.8 * double(i % 7) / 6.0;

    SUBCASE("inter-strand") {
        const auto rows = inter_strand_terms(f, gamma);
        CHECK(rows.energy(p) == doctest::Approx(inter_strand_energy(f, p, gamma)).epsilon(1e-12));
        CHECK(gradient_error([&](const Points& x) { return rows.energy(x); }, rows.gradient(p), p) < 1e-6);
    }
    SUBCASE("hair-body") {
        const auto rows = hair_body_terms(hair.positions(), gamma);
        CHECK(gradient_error([&](const Points& x) { return rows.energy(x); }, rows.gradient(p), p) < 1e-6);
    }
    SUBCASE("strand shape with frozen lengths") {
        const auto terms = strand_shape_terms(p, hair);
        CHECK(terms.flagged.empty());
        CHECK(terms.rows.energy(p) == doctest::Approx(strand_shape_energy(p, hair)).epsilon(1e-10));
        CHECK(gradient_error([&](const Points& x) { return terms.rows.energy(x); }, terms.rows.gradient(p), p) < 1e-6);
    }
}

TEST_CASE("shape energy vanishes on the source and on rigid translations") {
    const auto scene = make_scene(6, 1, 6);
    const auto& hair = scene.hair;
    CHECK(strand_shape_energy(hair.positions(), hair) < 1e-24);
    Points moved = hair.positions();
    for (auto& x : moved) x += Vec3(0.3, -0.1, 0.2);
    CHECK(strand_shape_energy(moved, hair) < 1e-20);
    CHECK(inter_strand_energy(build_knn_features(hair, 5), moved) < 1e-20);
}

TEST_CASE("assembled QP objective equals the weighted energies") {
    const auto scene = make_scene(10, 1, 6);
    const auto& hair = scene.hair;
    const auto f = build_knn_features(hair, 5);
    const auto x = perturbed(hair.positions(), 0.005, 2);
    const auto shape = strand_shape_terms(x, hair);
    const auto inter = inter_strand_terms(f);
    const auto body = hair_body_terms(hair.positions());
    std::map<std::uint32_t, Vec3> roots;
    for (std::size_t s = 0; s < hair.strand_count(); ++s) roots[hair.root_of(s)] = x[hair.root_of(s)];
    const WeightedTerms terms[] = {{&shape.rows, 1.0}, {&inter, 3e3}, {&body, 1e3}};
    const auto qp = assemble_qp(hair.particle_count(), terms, roots, {});
    const auto y = perturbed(x, 0.003, 3);
    Points y_rooted = y;
    for (const auto& [i, r] : roots) y_rooted[i] = r;
    const double direct = shape.rows.energy(y_rooted) + 3e3 * inter.energy(y_rooted) + 1e3 * body.energy(y_rooted);
    CHECK(qp.objective(qp.pack(y_rooted)) == doctest::Approx(direct).epsilon(1e-10));
    CHECK(max_distance(qp.unpack(qp.pack(y_rooted)), y_rooted) == 0.0);
}

TEST_CASE("penetration rows measure clearance along the outward normal") {
    const auto scene = make_scene(30);
    const MeshQuery q(scene.source);
    const auto rows = penetration_constraints(scene.hair.positions(), scene.hair, q, 5e-4);
    std::size_t non_roots = 0;
    for (std::size_t i = 0; i < scene.hair.particle_count(); ++i) non_roots += !scene.hair.is_root(i);
    CHECK(rows.size() == non_roots);
    for (const auto& r : rows) {
        const Vec3& p = scene.hair.positions()[r.particle];
        CHECK(r.normal.dot(p) - r.offset == doctest::Approx(r.clearance - 5e-4).epsilon(1e-9));
        CHECK(r.clearance >= 5e-4 - 1e-9);
    }
    CHECK(max_penetration_violation(scene.hair.positions(), scene.hair, q, 5e-4) <= 1e-9);
    const auto few = penetration_constraints(scene.hair.positions(), scene.hair, q, 5e-4, 0.01);
    CHECK(few.size() < rows.size());
}

}  // TEST_SUITE
