#include "doctest.h"
#include "support.hpp"

#include <Eigen/Dense>
#include <set>

using namespace testing;

namespace {

/// Flat disk head with a round scalp in its middle. Heap-allocated because
/// the chart keeps a pointer to the head patch.
struct FlatRig {
    BodyModel body;
    HeadPatch head;
    ScalpPatch scalp;
    std::unique_ptr<ParamChart> chart;
    std::vector<SurfacePoint> roots;
};

std::unique_ptr<FlatRig> flat_rig(int rings = 10, double scalp_radius = 0.55) {
    auto r = std::make_unique<FlatRig>();
    r->body = single_bone_body(flat_disk(rings, 1.0));
    r->head = extract_head_patch(r->body);
    for (double x = -scalp_radius; x <= scalp_radius; x += 0.04)
        for (double y = -scalp_radius; y <= scalp_radius; y += 0.04)
            if (x * x + y * y < scalp_radius * scalp_radius) r->roots.push_back(r->head.project(Vec3(x, y, 0.0)));
    r->scalp = extract_scalp(r->body, r->head, r->roots);
    r->chart = std::make_unique<ParamChart>(r->head, ChartKind::Harmonic);
    return r;
}

/// Every hairline vertex pinned to its rest position displaced by `shift(p)`.
DirichletMap displaced_boundary(const FlatRig& r, const std::function<Vec3(const Vec3&)>& shift) {
    DirichletMap h;
    for (auto v : r.scalp.boundary_loop) {
        h.vertices.push_back(v);
        h.targets.push_back(r.head.project(r.scalp.rest[v] + shift(r.scalp.rest[v])));
    }
    return h;
}

Vec3 bump(const Vec3& p) {
    const double a = std::atan2(p.y(), p.x());
    return 0.01 * std::exp(-std::pow((a - 1.2) / 0.5, 2)) * Vec3(p.x(), p.y(), 0.0).normalized();
}

Mat32 random_F(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    Mat32 F;
    F << 1 + u(rng), u(rng), u(rng), 1 + u(rng), u(rng), u(rng);
    return F;
}

Vec6 vec6(const Mat32& m) {
    Vec6 v;
    v << m.col(0), m.col(1);
    return v;
}

/// Dense solve of the Dirichlet problem for interior values given edge weights.
std::vector<Vec2> dense_dirichlet(std::size_t nv, const std::map<std::pair<std::uint32_t, std::uint32_t>, double>& w,
                                  const std::vector<char>& fixed, const std::vector<Vec2>& values) {
    std::vector<int> id(nv, -1);
    int n = 0;
    for (std::size_t v = 0; v < nv; ++v)
        if (!fixed[v]) id[v] = n++;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n), rhs = Eigen::MatrixXd::Zero(n, 2);
    for (const auto& [e, weight] : w)
        for (auto [a, b] : {std::pair{e.first, e.second}, std::pair{e.second, e.first}}) {
            if (id[a] < 0) continue;
            L(id[a], id[a]) += weight;
            if (id[b] >= 0)
                L(id[a], id[b]) -= weight;
            else
                rhs.row(id[a]) += weight * values[b].transpose();
        }
    const Eigen::MatrixXd x = L.fullPivLu().solve(rhs);
    std::vector<Vec2> out = values;
    for (std::size_t v = 0; v < nv; ++v)
        if (id[v] >= 0) out[v] = x.row(id[v]).transpose();
    return out;
}

}  // namespace

TEST_SUITE("scalp") {

TEST_CASE("scalp triangles are exactly the root-holding triangles of the cap, repaired into a disk") {
    const auto scene = make_scene(300);
    const auto head = extract_head_patch(scene.source);
    std::vector<SurfacePoint> roots;
    std::set<std::uint32_t> brute;
    for (std::size_t s = 0; s < scene.hair.strand_count(); ++s) {
        const Vec3& p = scene.hair.positions()[scene.hair.root_of(s)];
        roots.push_back(head.project(p));
        double best = std::numeric_limits<double>::infinity();
        for (auto f : head.faces) {
            const auto& t = scene.source.faces[f];
            const auto pr = closest_point_on_triangle(p, scene.source.vertices[t[0]], scene.source.vertices[t[1]],
                                                      scene.source.vertices[t[2]]);
            best = std::min(best, (pr.point - p).norm());
        }
        CHECK((scene.source.point(roots.back()) - p).norm() == doctest::Approx(best).epsilon(1e-9));
        brute.insert(roots.back().face);
    }
    const auto scalp = extract_scalp(scene.source, head, roots);
    for (auto f : brute) CHECK(std::binary_search(scalp.faces.begin(), scalp.faces.end(), f));
    CHECK(scalp.faces.size() == brute.size() + scalp.added_faces);

    HairParams hp;
    const auto cap = scalp_cap_faces(scene.source, scene.source_shape, hp);
    for (auto f : brute) CHECK(std::binary_search(cap.begin(), cap.end(), f));

    CHECK(boundary_loops(scalp.local_faces).size() == 1);
    std::set<std::pair<int, int>> edges;
    for (const auto& f : scalp.local_faces)
        for (int k = 0; k < 3; ++k) edges.insert({std::min(f[k], f[(k + 1) % 3]), std::max(f[k], f[(k + 1) % 3])});
    CHECK(long(scalp.vertices.size()) - long(edges.size()) + long(scalp.faces.size()) == 1);
    CHECK(scalp.area() > 0.0);
}

TEST_CASE("harmonic chart of a flat regular disk is a similarity") {
    const auto body = single_bone_body(flat_disk(4, 1.0));
    const auto head = extract_head_patch(body);
    const ParamChart chart(head, ChartKind::Harmonic);
    CHECK(chart.flipped_count() == 0);
    // Least-squares linear map uv = A xy + c, then check it is orthogonal.
    const std::size_t n = head.positions.size();
    Eigen::MatrixXd X(n, 3), U(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        X.row(i) << head.positions[i].x(), head.positions[i].y(), 1.0;
        U.row(i) = chart.uv()[i].transpose();
    }
    const Eigen::MatrixXd M = X.colPivHouseholderQr().solve(U);
    CHECK((X * M - U).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::Matrix2d A = M.topRows(2).transpose();
    CHECK((A.transpose() * A - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("chart interior matches a dense solve with the same boundary") {
    const auto body = make_character(character_preset(0));
    const auto head = extract_head_patch(body);
    for (auto kind : {ChartKind::Harmonic, ChartKind::Tutte}) {
        const ParamChart chart(head, kind);
        CHECK(chart.flipped_count() == 0);
        const auto loops = boundary_loops(head.local_faces);
        REQUIRE(loops.size() == 1);
        std::vector<char> fixed(head.positions.size(), 0);
        for (auto v : loops[0]) {
            fixed[v] = 1;
            CHECK(chart.uv()[v].norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
        std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
        if (kind == ChartKind::Harmonic) {
            w = cotangent_weights(head.local_faces, head.positions);
        } else {
            for (const auto& f : head.local_faces)
                for (int k = 0; k < 3; ++k) {
                    const auto a = static_cast<std::uint32_t>(f[k]), b = static_cast<std::uint32_t>(f[(k + 1) % 3]);
                    w[{std::min(a, b), std::max(a, b)}] = 1.0;
                }
        }
        const auto dense = dense_dirichlet(head.positions.size(), w, fixed, chart.uv());
        double err = 0.0;
        for (std::size_t v = 0; v < dense.size(); ++v) err = std::max(err, (dense[v] - chart.uv()[v]).norm());
        CHECK(err < 1e-9);
    }
}

TEST_CASE("chart locate and embed invert each other") {
    const auto body = make_character(character_preset(0));
    const auto head = extract_head_patch(body);
    const ParamChart chart(head, ChartKind::Harmonic);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::uint32_t> face(0, static_cast<std::uint32_t>(head.local_faces.size() - 1));
    std::uniform_real_distribution<double> u(0.05, 0.9);
    for (int i = 0; i < 100; ++i) {
        const ChartLocation loc{face(rng), Vec3::Zero()};
        const double a = u(rng), b = u(rng) * (1.0 - a);
        ChartLocation l = loc;
        l.bary = Vec3(1.0 - a - b, a, b);
        const auto back = chart.locate(chart.chart_point(l), 0);
        REQUIRE(back);
        CHECK((chart.embed(*back) - chart.embed(l)).norm() < 1e-12);
    }
    CHECK_FALSE(chart.locate(Vec2(1.5, 0.0)));
}

TEST_CASE("hairline split starts at the first marker and holds the forehead") {
    const auto scene = make_scene(300);
    const ScalpContext ctx(scene.source, scene.hair, scene.hair.positions());
    const auto& scalp = ctx.scalp();
    const auto m = ctx.ear_markers();
    const auto split = ctx.split();
    CHECK(scalp.vertices[split.front.front()] == m[0]);
    CHECK(scalp.vertices[split.front.back()] == m[1]);
    CHECK(split.front.size() + split.back.size() == scalp.boundary_loop.size() + 2);
    double front_z = -1e9, back_z = -1e9;
    for (auto v : split.front) front_z = std::max(front_z, scalp.rest[v].z());
    for (auto v : split.back) back_z = std::max(back_z, scalp.rest[v].z());
    CHECK(front_z > back_z);

    const auto swapped = split_hairline(scalp, {m[1], m[0]});
    auto rev = swapped.front;
    std::reverse(rev.begin(), rev.end());
    CHECK(rev == split.front);

    // Markers are the lateral extremes of the hairline.
    for (auto v : scalp.boundary_loop) {
        CHECK(scalp.rest[v].x() >= scalp.rest[*scalp.local_vertex(m[0])].x());
        CHECK(scalp.rest[v].x() <= scalp.rest[*scalp.local_vertex(m[1])].x());
    }
    CHECK_THROWS_AS(split_hairline(scalp, {m[0], m[0]}), ValidationError);
}

TEST_CASE("identity edit pins every hairline vertex to itself") {
    const auto scene = make_scene(300);
    const ScalpContext ctx(scene.source, scene.hair, scene.hair.positions());
    const auto edit = ctx.identity();
    const auto h = build_correspondence(ctx.body(), ctx.head(), ctx.scalp(), ctx.split(), edit);
    CHECK(h.vertices.size() == ctx.scalp().boundary_loop.size());
    for (std::size_t i = 0; i < h.vertices.size(); ++i)
        CHECK((ctx.body().point(h.targets[i]) - ctx.scalp().rest[h.vertices[i]]).norm() < 1e-12);
}

TEST_CASE("front vertices follow the curve by normalized arc length between turning points") {
    const auto scene = make_scene(300);
    const ScalpContext ctx(scene.source, scene.hair, scene.hair.positions());
    const auto& scalp = ctx.scalp();
    const auto& front = ctx.split().front;
    REQUIRE(front.size() > 6);
    auto edit = ctx.identity();
    // One turning point at the middle vertex, placed at curve parameter 0.3.
    const std::size_t mid = front.size() / 2;
    edit.turning_points = {{scalp.vertices[front[mid]], 0.3}};
    const auto h = build_correspondence(ctx.body(), ctx.head(), scalp, ctx.split(), edit);

    Points poly;
    for (auto v : front) poly.push_back(scalp.rest[v]);
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < poly.size(); ++i) cum.push_back(cum.back() + (poly[i] - poly[i - 1]).norm());
    auto at = [&](double s) {
        const double target = s * cum.back();
        std::size_t k = 0;
        while (k + 2 < cum.size() && cum[k + 1] < target) ++k;
        const double t = (target - cum[k]) / (cum[k + 1] - cum[k]);
        return Vec3((1 - t) * poly[k] + t * poly[k + 1]);
    };
    for (std::size_t i = 0; i < front.size(); ++i) {
        const double s = i <= mid ? 0.3 * cum[i] / cum[mid] : 0.3 + 0.7 * (cum[i] - cum[mid]) / (cum.back() - cum[mid]);
        const auto it = std::find(h.vertices.begin(), h.vertices.end(), front[i]);
        REQUIRE(it != h.vertices.end());
        const Vec3 expected = ctx.body().point(ctx.head().project(at(s)));
        CHECK((ctx.body().point(h.targets[it - h.vertices.begin()]) - expected).norm() < 1e-9);
    }

    edit.turning_points = {{scalp.vertices[front[mid]], 1.0}};
    CHECK_THROWS_AS(build_correspondence(ctx.body(), ctx.head(), scalp, ctx.split(), edit), ValidationError);
}

TEST_CASE("hairline edit JSON round trips byte for byte") {
    const auto scene = make_scene(300);
    const ScalpContext ctx(scene.source, scene.hair, scene.hair.positions());
    HairlineEditShape shape;
    const auto edit = synthetic_hairline_edit(ctx.body(), ctx.head(), ctx.scalp(), ctx.split(), shape);
    const auto text = hairline_edit_to_json(edit);
    CHECK(hairline_edit_to_json(parse_hairline_edit(text)) == text);
    const auto j = nlohmann::json::parse(text);
    CHECK(j.at("curve").at(0).at("bary").size() == 2);
    CHECK(j.at("earMarkers").size() == 2);
    CHECK_THROWS_AS(parse_hairline_edit(R"({"curve": []})"), ValidationError);
    CHECK_THROWS_AS(parse_hairline_edit(R"({"curve":[{"face":0,"bary":[0.7,0.7]}],"turningPoints":[],"earMarkers":[0,1]})"),
                    ValidationError);
}

}  // TEST_SUITE

TEST_SUITE("membrane") {

TEST_CASE("density of a uniform stretch has its closed form") {
    const MembraneMaterial m{1.3, 0.7};
    for (double s : {0.5, 0.9, 1.0, 1.25, 2.0}) {
        Mat32 F = Mat32::Zero();
        F(0, 0) = s;
        F(1, 1) = s;
        const double expected = m.mu * (s * s - 1.0 - 2.0 * std::log(s)) + 2.0 * m.lambda * std::log(s) * std::log(s);
        CHECK(neo_hookean_density(F, m) == doctest::Approx(expected).epsilon(1e-14));
    }
    Mat32 rot = Mat32::Zero();
    rot << 0.0, 0.0, std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    CHECK(std::abs(neo_hookean_density(rot, m)) < 1e-15);
    Mat32 flat = Mat32::Zero();
    flat(0, 0) = 1.0;
    CHECK(std::isinf(neo_hookean_density(flat, m)));
}

TEST_CASE("stress and its derivative match finite differences") {
    std::mt19937_64 rng(9);
    const MembraneMaterial m{1.0, 2.0};
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        const Mat32 F = random_F(rng);
        const Vec6 P = vec6(neo_hookean_stress(F, m));
        const Mat6 dP = neo_hookean_stress_derivative(F, m);
        for (int c = 0; c < 6; ++c) {
            Mat32 a = F, b = F;
            a(c % 3, c / 3) += h;
            b(c % 3, c / 3) -= h;
            const double fd = (neo_hookean_density(a, m) - neo_hookean_density(b, m)) / (2 * h);
            CHECK(std::abs(fd - P[c]) <= 1e-6 * std::max(1.0, std::abs(P[c])));
            const Vec6 col = (vec6(neo_hookean_stress(a, m)) - vec6(neo_hookean_stress(b, m))) / (2 * h);
            CHECK((col - dP.col(c)).norm() <= 1e-6 * std::max(1.0, dP.col(c).norm()));
        }
    }
}

TEST_CASE("PSD projection clamps only negative directions") {
    Mat6 H = Mat6::Identity();
    H(0, 0) = -2.0;
    const Mat6 P = project_psd(H, 1e-12);
    CHECK(P(0, 0) == doctest::Approx(1e-12));
    CHECK(P(3, 3) == doctest::Approx(1.0));
    CHECK(project_psd(Mat6::Identity()) == Mat6::Identity());
}

TEST_CASE("membrane energy gradient matches finite differences") {
    const auto rig = flat_rig();
    const auto rest = rest_state(rig->scalp, rig->head, *rig->chart);
    CHECK(membrane_energy(rig->scalp, *rig->chart, rest, {}).energy < 1e-20);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 0.004);
    auto u = rest.u;
    for (auto& x : u) x += Vec2(n(rng), n(rng));
    const auto st = embed_coordinates(*rig->chart, rest, u);
    const auto ev = membrane_energy(rig->scalp, *rig->chart, st, {});
    REQUIRE(std::isfinite(ev.energy));
    const double h = 1e-7;
    double worst = 0.0;
    for (std::size_t v = 0; v < u.size(); v += 3)
        for (int d = 0; d < 2; ++d) {
            auto a = u, b = u;
            a[v][d] += h;
            b[v][d] -= h;
            const double fd = (membrane_energy(rig->scalp, *rig->chart, embed_coordinates(*rig->chart, rest, a), {}, false).energy -
                               membrane_energy(rig->scalp, *rig->chart, embed_coordinates(*rig->chart, rest, b), {}, false).energy) /
                              (2 * h);
            worst = std::max(worst, std::abs(fd - ev.gradient[2 * v + d]));
        }
    CHECK(worst <= 1e-6 * std::max(1.0, ev.gradient.cwiseAbs().maxCoeff()));
}

TEST_CASE("projected Newton reaches the minimizer found by a dense Newton oracle") {
    const auto rig = flat_rig(8, 0.5);
    const auto h = displaced_boundary(*rig, bump);
    MembraneReport rep;
    const auto got = solve_membrane(rig->scalp, rig->head, *rig->chart, h, {}, {}, &rep);
    CHECK(rep.converged);

    const auto rest = rest_state(rig->scalp, rig->head, *rig->chart);
    const auto pinned = boundary_state(rig->scalp, rig->head, *rig->chart, h);
    std::vector<char> fixed(rig->scalp.vertices.size(), 0);
    for (auto v : h.vertices) fixed[v] = 1;
    std::vector<std::size_t> dof;
    for (std::size_t v = 0; v < fixed.size(); ++v)
        if (!fixed[v]) dof.push_back(v);
    auto u = harmonic_extension(rig->scalp, *rig->chart, rest, h);
    auto eval = [&](const std::vector<Vec2>& x) {
        return membrane_energy(rig->scalp, *rig->chart, embed_coordinates(*rig->chart, pinned, x), {});
    };
    auto free_grad = [&](const MembraneEvaluation& e) {
        Eigen::VectorXd g(2 * dof.size());
        for (std::size_t k = 0; k < dof.size(); ++k) g.segment<2>(2 * k) = e.gradient.segment<2>(2 * dof[k]);
        return g;
    };
    for (int it = 0; it < 30; ++it) {
        const auto ev = eval(u);
        const Eigen::VectorXd g = free_grad(ev);
        if (g.norm() < 1e-13) break;
        const Eigen::Index n = g.size();
        Eigen::MatrixXd H(n, n);
        const double step = 1e-7;
        for (Eigen::Index c = 0; c < n; ++c) {
            auto a = u, b = u;
            a[dof[c / 2]][c % 2] += step;
            b[dof[c / 2]][c % 2] -= step;
            H.col(c) = (free_grad(eval(a)) - free_grad(eval(b))) / (2 * step);
        }
        H = 0.5 * (H + H.transpose());
        const Eigen::VectorXd d = -H.ldlt().solve(g);
        double t = 1.0;
        while (t > 1e-6) {
            auto trial = u;
            for (std::size_t k = 0; k < dof.size(); ++k) trial[dof[k]] += t * d.segment<2>(2 * k);
            if (eval(trial).energy <= ev.energy) {
                u = trial;
                break;
            }
            t *= 0.5;
        }
    }
    double err = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) err = std::max(err, (u[v] - got.u[v]).norm());
    CHECK(err <= 1e-5);
}

TEST_CASE("an unchanged hairline leaves every root in place") {
    const auto rig = flat_rig();
    const auto h = displaced_boundary(*rig, [](const Vec3&) { return Vec3::Zero(); });
    MembraneReport rep;
    const auto st = solve_membrane(rig->scalp, rig->head, *rig->chart, h, {}, {}, &rep);
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
    const auto roots = relocate_roots(rig->scalp, rig->head, st.x);
    for (const auto& r : roots) CHECK(r.travel <= 1e-8);
}

TEST_CASE("a rigid in-plane shift of the hairline moves every root by the shift") {
    const auto rig = flat_rig();
    const Vec3 t(0.03, -0.02, 0.0);
    const auto h = displaced_boundary(*rig, [&](const Vec3&) { return t; });
    MembraneReport rep;
    const auto st = solve_membrane(rig->scalp, rig->head, *rig->chart, h, {}, {}, &rep);
    CHECK(rep.converged);
    CHECK(rep.final_energy < 1e-12);
    const auto roots = relocate_roots(rig->scalp, rig->head, st.x);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        CHECK(roots[i].travel == doctest::Approx(t.norm()).epsilon(1e-6));
        CHECK((roots[i].position - rig->body.point(rig->roots[i]) - t).norm() < 1e-7);
    }
}

TEST_CASE("thin-plate splines interpolate their seeds and reproduce affine fields") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int dim : {2, 3}) {
        std::vector<Eigen::VectorXd> seeds, values, affine_values;
        Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, dim);
        for (int i = 0; i < 30; ++i) {
            Eigen::VectorXd p(dim);
            for (int d = 0; d < dim; ++d) p[d] = u(rng);
            seeds.push_back(p);
            values.push_back(Eigen::Vector3d(u(rng), u(rng), u(rng)));
            affine_values.push_back(A * p + Eigen::Vector3d(0.1, 0.2, 0.3));
        }
        const ThinPlateSpline tps(seeds, values);
        for (std::size_t i = 0; i < seeds.size(); ++i) CHECK((tps(seeds[i]) - values[i]).norm() < 1e-8);
        const ThinPlateSpline lin(seeds, affine_values);
        Eigen::VectorXd q(dim);
        for (int d = 0; d < dim; ++d) q[d] = 0.37 - 0.1 * d;
        CHECK((lin(q) - (A * q + Eigen::Vector3d(0.1, 0.2, 0.3))).norm() < 1e-8);
    }
}

TEST_CASE("harmonic extension matches a dense chart-space solve") {
    const auto rig = flat_rig();
    const auto h = displaced_boundary(*rig, bump);
    const auto rest = rest_state(rig->scalp, rig->head, *rig->chart);
    const auto got = harmonic_extension(rig->scalp, *rig->chart, rest, h);
    std::vector<char> fixed(rig->scalp.vertices.size(), 0);
    std::vector<Vec2> delta(rig->scalp.vertices.size(), Vec2::Zero());
    for (std::size_t i = 0; i < h.vertices.size(); ++i) {
        fixed[h.vertices[i]] = 1;
        const ChartLocation loc{*rig->head.local_face(h.targets[i].face), h.targets[i].bary};
        delta[h.vertices[i]] = rig->chart->chart_point(loc) - rest.u[h.vertices[i]];
    }
    std::vector<Vec3> lifted;
    for (const auto& x : rest.u) lifted.emplace_back(x.x(), x.y(), 0.0);
    const auto dense = dense_dirichlet(delta.size(), cotangent_weights(rig->scalp.local_faces, lifted), fixed, delta);
    double err = 0.0;
    for (std::size_t v = 0; v < dense.size(); ++v) err = std::max(err, (rest.u[v] + dense[v] - got[v]).norm());
    CHECK(err < 1e-12);
}

TEST_CASE("every relocation method leaves an identity edit alone") {
    const auto scene = make_scene(300);
    const ScalpContext ctx(scene.source, scene.hair, scene.hair.positions());
    for (auto method : {Relocator::Membrane, Relocator::Rbf3d, Relocator::Rbf2d, Relocator::Harmonic2d}) {
        const auto out = ctx.relocate(ctx.identity(), method);
        double worst = 0.0;
        for (const auto& r : out.roots) worst = std::max(worst, r.travel);
        CHECK_MESSAGE(worst <= 1e-8, to_string(method));
        CHECK(parse_relocator(to_string(method)) == method);
    }
}

}  // TEST_SUITE
