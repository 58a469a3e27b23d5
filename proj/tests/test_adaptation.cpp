#include "doctest.h"
#include "support.hpp"

#include <omp.h>

using namespace testing;

namespace {

struct Solved {
    Scene scene;
    InitialTransfer transfer;
    AdaptationProblem problem;
    AdaptationResult result;
    std::unique_ptr<MeshQuery> query;
    LaplacianFeatureSet features;
};

std::unique_ptr<Solved> solve_global(std::size_t strands, const BodyModel* target_override = nullptr,
                                     EnergyToggles toggles = {}) {
    auto s = std::make_unique<Solved>();
    s->scene = make_scene(strands, 1, 10);
    const BodyModel& target = target_override ? *target_override : s->scene.target;
    AdaptationConfig cfg;
    s->transfer = initial_transfer(s->scene.hair, s->scene.source, target, cfg);
    s->features = build_knn_features(s->scene.hair, cfg.k);
    s->query = std::make_unique<MeshQuery>(target);
    s->problem = make_problem(s->scene.hair, s->transfer.p_hat, s->features, *s->query, cfg);
    s->problem.toggles = toggles;
    s->result = iterate_adaptation(s->problem);
    return s;
}

/// Objective of the fine stage summed over normal strands: nonlinear shape
/// energy, inter-strand terms against fixed neighbours and hair-body terms.
double decoupled_objective(const Hairstyle& hair, std::span<const std::uint32_t> normals,
                           const LaplacianFeatureSet& decoupled, const Points& anchor, const Points& p,
                           const AdaptationConfig& cfg) {
    double e = 0.0;
    for (auto s : normals) {
        const std::uint32_t one[] = {s};
        const auto sub = hair.subset(one);
        const auto b = hair.strand_begin(s), n = hair.strand_size(s);
        Points mine(p.begin() + b, p.begin() + b + n);
        e += strand_shape_energy(mine, sub);
        Points anchored(anchor.begin() + b, anchor.begin() + b + n);
        e += cfg.beta * hair_body_terms(anchored).energy(mine);
    }
    std::vector<std::uint32_t> parts = particles_of(hair, normals);
    const auto inter = decoupled_inter_strand_terms(decoupled, p, parts, [](std::uint32_t i) { return i; });
    return e + cfg.alpha * inter.energy(p);
}

}  // namespace

TEST_SUITE("adaptation") {

TEST_CASE("adapting a hairstyle to its own body changes nothing") {
    const auto scene = make_scene(40, 1, 10);
    AdaptationConfig cfg;
    const auto t = initial_transfer(scene.hair, scene.source, scene.source, cfg);
    const auto f = build_knn_features(scene.hair, cfg.k);
    const MeshQuery q(scene.source);
    const auto pb = make_problem(scene.hair, t.p_hat, f, q, cfg);
    CHECK(evaluate_objective(pb, t.p_hat).total < 1e-20);
    const auto r = iterate_adaptation(pb);
    CHECK(max_distance(r.positions, scene.hair.positions()) <= 1e-6 * scene.hair.bounding_box_diagonal());
    CHECK_FALSE(r.report.diverged);
}

TEST_CASE("adapted hair clears the target by the margin and keeps its roots") {
    const auto s = solve_global(50);
    const auto& r = s->result;
    CHECK(r.report.max_violation <= 1e-6);
    CHECK(max_penetration_violation(r.positions, s->scene.hair, *s->query, 5e-4) <= 1e-6);
    for (std::size_t k = 0; k < s->scene.hair.strand_count(); ++k) {
        const auto root = s->scene.hair.root_of(k);
        CHECK(r.positions[root] == s->transfer.p_hat[root]);
    }
    CHECK(r.report.outer_iterations <= s->problem.config.max_outer);
    CHECK(r.report.history.size() == static_cast<std::size_t>(r.report.outer_iterations));
    CHECK(r.report.final_objective() <= r.report.initial_objective * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("objective totals are the weighted sum of the terms") {
    const auto s = solve_global(20);
    const auto& cfg = s->problem.config;
    const auto t = evaluate_objective(s->problem, s->result.positions);
    CHECK(t.total == doctest::Approx(t.strand_shape + cfg.alpha * t.inter_strand + cfg.beta * t.hair_body).epsilon(1e-12));
    const auto maps = objective_maps(s->problem, s->result.positions);
    const auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    CHECK(std::abs(sum(maps.strand_shape) - t.strand_shape) <= 1e-9 * std::max(1.0, t.strand_shape));
    CHECK(std::abs(sum(maps.inter_strand) - t.inter_strand) <= 1e-9 * std::max(1.0, t.inter_strand));
    CHECK(std::abs(sum(maps.hair_body) - t.hair_body) <= 1e-9 * std::max(1.0, t.hair_body));
    CHECK(std::abs(sum(maps.total) - t.total) <= 1e-9 * std::max(1.0, t.total));
    CHECK(maps.totals.total == doctest::Approx(t.total));
}

TEST_CASE("disabled terms drop out of the objective") {
    const auto s = solve_global(20);
    auto pb = s->problem;
    const auto& p = s->result.positions;
    const auto full = evaluate_objective(pb, p);
    pb.toggles.inter_strand = false;
    const auto no_inter = evaluate_objective(pb, p);
    CHECK(no_inter.total == doctest::Approx(full.strand_shape + pb.config.beta * full.hair_body).epsilon(1e-12));
    pb.toggles = {false, false, true};
    CHECK(evaluate_objective(pb, p).total == doctest::Approx(pb.config.beta * full.hair_body).epsilon(1e-12));
}

TEST_CASE("hair-body only keeps a feasible initializer in place") {
    const auto scene = make_scene(20, 1, 10);
    AdaptationConfig cfg;
    const auto f = build_knn_features(scene.hair, cfg.k);
    const MeshQuery q(scene.source);
    auto pb = make_problem(scene.hair, scene.hair.positions(), f, q, cfg);
    pb.toggles = {false, false, true};
    const auto r = iterate_adaptation(pb);
    CHECK(max_distance(r.positions, scene.hair.positions()) < 1e-8);
}

TEST_CASE("report serializes every outer iterate") {
    const auto s = solve_global(10);
    const auto j = to_json(s->result.report);
    CHECK(j.contains("converged"));
    CHECK(j.at("history").size() == s->result.report.history.size());
}

}  // TEST_SUITE

TEST_SUITE("multiscale") {

TEST_CASE("descriptors are root plus eight arc-length samples") {
    Hairstyle h;
    const Vec3 s[] = {{0, 0, 0}, {0, 1, 0}, {0, 1, 1}};
    h.add_strand(s);
    const auto d = strand_descriptor(h, 0);
    CHECK(d.segment<3>(0).norm() == 0.0);
    CHECK((d.segment<3>(3 * 4) - Vec3(0, 1, 0)).norm() < 1e-12);
    CHECK((d.segment<3>(3 * 8) - Vec3(0, 1, 1)).norm() < 1e-12);
    CHECK((d.segment<3>(3 * 2) - Vec3(0, 0.5, 0)).norm() < 1e-12);
}

TEST_CASE("k-medoids finds the brute-force optimum on separated clusters") {
    Hairstyle h;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> jitter(-0.02, 0.02);
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < 4 + c; ++m) {
            const Vec3 base(c * 1.0 + jitter(rng), jitter(rng), jitter(rng));
            const Vec3 s[] = {base, base + Vec3(0, 0.3, 0), base + Vec3(0, 0.6, 0.1 * jitter(rng))};
            h.add_strand(s);
        }
    const auto desc = strand_descriptors(h);
    const auto sel = select_guides(h, 3, 1);
    REQUIRE(sel.guides.size() == 3);
    CHECK(std::is_sorted(sel.guides.begin(), sel.guides.end()));
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t n = static_cast<std::uint32_t>(h.strand_count());
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = a + 1; b < n; ++b)
            for (std::uint32_t c = b + 1; c < n; ++c) {
                const std::uint32_t m[] = {a, b, c};
                best = std::min(best, medoid_cost(desc, m));
            }
    CHECK(sel.cost == doctest::Approx(best).epsilon(1e-12));
    CHECK(medoid_cost(desc, sel.guides) == doctest::Approx(sel.cost).epsilon(1e-12));
}

TEST_CASE("k-medoids on a hairstyle is swap-stable and seed-deterministic") {
    const auto scene = make_scene(30, 1, 8);
    const auto desc = strand_descriptors(scene.hair);
    const auto sel = select_guides(scene.hair, 5, 3);
    const auto again = select_guides(scene.hair, 5, 3);
    CHECK(sel.guides == again.guides);
    CHECK(sel.hash == descriptor_hash(desc));
    for (std::size_t g = 0; g < sel.guides.size(); ++g)
        for (std::uint32_t s = 0; s < scene.hair.strand_count(); ++s) {
            if (std::find(sel.guides.begin(), sel.guides.end(), s) != sel.guides.end()) continue;
            auto swapped = sel.guides;
            swapped[g] = s;
            CHECK(medoid_cost(desc, swapped) >= sel.cost - 1e-12);
        }
    for (std::size_t s = 0; s < scene.hair.strand_count(); ++s) CHECK(sel.assignment[s] < sel.guides.size());
}

TEST_CASE("decoupled neighbourhoods only reach guide particles") {
    const auto scene = make_scene(30, 1, 8);
    const auto sel = select_guides(scene.hair, 6, 0);
    const auto dec = build_decoupled_features(scene.hair, sel.guides, 5);
    const auto sid = scene.hair.strand_ids();
    std::vector<char> guide(scene.hair.strand_count(), 0);
    for (auto g : sel.guides) guide[g] = 1;
    for (std::size_t i = 0; i < scene.hair.particle_count(); ++i) {
        CHECK(dec.has_feature(i) == !guide[sid[i]]);
        for (auto e = dec.offsets[i]; e < dec.offsets[i + 1]; ++e) CHECK(guide[sid[dec.neighbors[e]]]);
    }
}

TEST_CASE("fine-stage Hessian has no cross-strand coupling") {
    const auto scene = make_scene(30, 1, 8);
    AdaptationConfig cfg;
    const auto sel = select_guides(scene.hair, 6, 0);
    const auto dec = build_decoupled_features(scene.hair, sel.guides, cfg.k);
    const auto normals = normal_strands(scene.hair.strand_count(), sel.guides);
    const auto h = fine_stage_hessian(scene.hair, normals, dec, scene.hair.positions(), cfg);
    CHECK(h.nonZeros() > 0);
    CHECK(cross_strand_nonzeros(h, scene.hair) == 0);
    // The coupled Hessian does couple strands.
    const auto f = build_knn_features(scene.hair, cfg.k);
    const auto inter = inter_strand_terms(f);
    const WeightedTerms terms[] = {{&inter, 1.0}};
    CHECK(cross_strand_nonzeros(residual_hessian(scene.hair.particle_count(), terms), scene.hair) > 0);
}

TEST_CASE("multiscale results do not depend on the thread count") {
    const auto scene = make_scene(40, 1, 8);
    AdaptationConfig cfg;
    cfg.n_guides = 8;
    const auto t = initial_transfer(scene.hair, scene.source, scene.target, cfg);
    const auto sel = select_guides(scene.hair, cfg.n_guides, 0);
    const auto dec = build_decoupled_features(scene.hair, sel.guides, cfg.k);
    const MeshQuery q(scene.target);
    const int before = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = multiscale_solve(scene.hair, sel, dec, t.p_hat, q, cfg);
    omp_set_num_threads(4);
    const auto four = multiscale_solve(scene.hair, sel, dec, t.p_hat, q, cfg);
    omp_set_num_threads(before);
    CHECK(max_distance(one.positions, four.positions) == 0.0);
    CHECK(one.fine.failures.empty());
}

TEST_CASE("fine stage lowers the decoupled objective and stays feasible") {
    const auto scene = make_scene(40, 1, 8);
    AdaptationConfig cfg;
    cfg.n_guides = 8;
    const auto t = initial_transfer(scene.hair, scene.source, scene.target, cfg);
    const auto sel = select_guides(scene.hair, cfg.n_guides, 0);
    const auto dec = build_decoupled_features(scene.hair, sel.guides, cfg.k);
    const MeshQuery q(scene.target);
    const auto ms = multiscale_solve(scene.hair, sel, dec, t.p_hat, q, cfg);
    const auto normals = normal_strands(scene.hair.strand_count(), sel.guides);

    // Start point of the fine stage: coarse guides, normals at the transfer.
    Points start = t.p_hat;
    for (auto i : particles_of(scene.hair, sel.guides)) start[i] = ms.positions[i];
    const double before = decoupled_objective(scene.hair, normals, dec, t.p_hat, start, cfg);
    const double after = decoupled_objective(scene.hair, normals, dec, t.p_hat, ms.positions, cfg);
    CHECK(after < before);
    CHECK(max_penetration_violation(ms.positions, scene.hair, q, cfg.eps_c) <= 1e-6);
    CHECK(ms.fine.strands == normals.size());
}

}  // TEST_SUITE
