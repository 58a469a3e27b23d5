#include "hairadapt/membrane.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>

namespace hairadapt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Mat32 unvec(const Vec6& v) {
    Mat32 m;
    m.col(0) = v.head<3>();
    m.col(1) = v.tail<3>();
    return m;
}

Vec6 vec(const Mat32& m) {
    Vec6 v;
    v.head<3>() = m.col(0);
    v.tail<3>() = m.col(1);
    return v;
}

}  // namespace

double neo_hookean_density(const Mat32& F, const MembraneMaterial& m) {
    const Eigen::Matrix2d C = F.transpose() * F;
    const double det = C.determinant();
    if (!(det > 0.0)) return kInf;
    const double lnJ = 0.5 * std::log(det);
    return 0.5 * m.mu * (C.trace() - 2.0 - 2.0 * lnJ) + 0.5 * m.lambda * lnJ * lnJ;
}

Mat32 neo_hookean_stress(const Mat32& F, const MembraneMaterial& m) {
    const Eigen::Matrix2d C = F.transpose() * F;
    const double lnJ = 0.5 * std::log(C.determinant());
    const Mat32 G = F * C.inverse();
    return m.mu * F + (m.lambda * lnJ - m.mu) * G;
}

Mat6 neo_hookean_stress_derivative(const Mat32& F, const MembraneMaterial& m) {
    const Eigen::Matrix2d C = F.transpose() * F;
    const Eigen::Matrix2d Ci = C.inverse();
    const double lnJ = 0.5 * std::log(C.determinant());
    const Mat32 G = F * Ci;
    Mat6 H;
    for (int c = 0; c < 6; ++c) {
        Vec6 e = Vec6::Zero();
        e[c] = 1.0;
        const Mat32 dF = unvec(e);
        const Eigen::Matrix2d dC = dF.transpose() * F + F.transpose() * dF;
        const Mat32 dG = dF * Ci - G * dC * Ci;
        const double dlnJ = (G.array() * dF.array()).sum();
        const Mat32 dP = m.mu * dF + m.lambda * dlnJ * G + (m.lambda * lnJ - m.mu) * dG;
        H.col(c) = vec(dP);
    }
    return 0.5 * (H + H.transpose());
}

Mat6 project_psd(const Mat6& H, double floor) {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(0.5 * (H + H.transpose()));
    Vec6 d = eig.eigenvalues();
    if (d.minCoeff() >= floor) return H;
    for (int i = 0; i < 6; ++i) d[i] = std::max(d[i], floor);
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

MembraneState rest_state(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart) {
    std::unordered_map<std::uint32_t, ChartLocation> corner;
    for (std::size_t f = 0; f < head.local_faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const auto v = static_cast<std::uint32_t>(head.local_faces[f][k]);
            if (corner.count(v)) continue;
            ChartLocation loc{static_cast<std::uint32_t>(f), Vec3::Zero()};
            loc.bary[k] = 1.0;
            corner.emplace(v, loc);
        }
    }
    MembraneState s;
    for (std::size_t v = 0; v < scalp.vertices.size(); ++v) {
        const auto hv = head.local_vertex(scalp.vertices[v]);
        if (!hv) throw ValidationError("scalp vertex outside the head patch");
        const ChartLocation loc = corner.at(*hv);
        s.u.push_back(chart.uv()[*hv]);
        s.host.push_back(loc);
        s.x.push_back(chart.embed(loc));
    }
    return s;
}

DeformationGradient deformation_gradient(const ScalpPatch& scalp, const ParamChart& chart, const MembraneState& st,
                                         std::uint32_t t) {
    const auto& tri = scalp.local_faces[t];
    const Eigen::Matrix2d& Dinv = scalp.rest_inverse[t];
    Mat32 d;
    d.col(0) = st.x[tri[1]] - st.x[tri[0]];
    d.col(1) = st.x[tri[2]] - st.x[tri[0]];
    DeformationGradient out;
    out.F = d * Dinv;
    const Mat32 B0 = chart.embedding_jacobian(st.host[tri[0]].face);
    const Mat32 B1 = chart.embedding_jacobian(st.host[tri[1]].face);
    const Mat32 B2 = chart.embedding_jacobian(st.host[tri[2]].face);
    for (int j = 0; j < 2; ++j) {
        out.jacobian.block<3, 2>(3 * j, 0) = -(Dinv(0, j) + Dinv(1, j)) * B0;
        out.jacobian.block<3, 2>(3 * j, 2) = Dinv(0, j) * B1;
        out.jacobian.block<3, 2>(3 * j, 4) = Dinv(1, j) * B2;
    }
    return out;
}

MembraneEvaluation membrane_energy(const ScalpPatch& scalp, const ParamChart& chart, const MembraneState& st,
                                   const MembraneMaterial& material, bool with_derivatives) {
    const std::size_t nt = scalp.local_faces.size();
    std::vector<double> energy(nt, 0.0);
    std::vector<Vec6> grads(with_derivatives ? nt : 0);
    MembraneEvaluation out;
    if (with_derivatives) out.hessians.resize(nt);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(nt); ++ti) {
        const auto t = static_cast<std::uint32_t>(ti);
        const auto& tri = scalp.local_faces[t];
        if (cross2(st.u[tri[1]] - st.u[tri[0]], st.u[tri[2]] - st.u[tri[0]]) <= 0.0) {
            energy[t] = kInf;
            continue;
        }
        const DeformationGradient dg = deformation_gradient(scalp, chart, st, t);
        const double A = scalp.rest_area[t];
        energy[t] = A * neo_hookean_density(dg.F, material);
        if (!with_derivatives || !std::isfinite(energy[t])) continue;
        grads[t] = A * dg.jacobian.transpose() * vec(neo_hookean_stress(dg.F, material));
        out.hessians[t] = A * dg.jacobian.transpose() * neo_hookean_stress_derivative(dg.F, material) * dg.jacobian;
    }
    for (const double e : energy) out.energy += e;
    if (with_derivatives) {
        out.gradient = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(scalp.vertices.size()));
        if (std::isfinite(out.energy)) {
            for (std::size_t t = 0; t < nt; ++t)
                for (int k = 0; k < 3; ++k) out.gradient.segment<2>(2 * scalp.local_faces[t][k]) += grads[t].segment<2>(2 * k);
        }
    }
    return out;
}

MembraneState boundary_state(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                             const DirichletMap& h) {
    MembraneState s = rest_state(scalp, head, chart);
    std::vector<char> assigned(scalp.vertices.size(), 0);
    for (std::size_t i = 0; i < h.vertices.size(); ++i) {
        const auto v = h.vertices[i];
        const auto f = head.local_face(h.targets[i].face);
        if (!f) throw ValidationError("hairline target of vertex " + std::to_string(scalp.vertices[v]) +
                                      " lies outside the chart");
        const ChartLocation loc{*f, h.targets[i].bary};
        s.u[v] = chart.chart_point(loc);
        s.host[v] = loc;
        s.x[v] = chart.embed(loc);
        assigned[v] = 1;
    }
    for (const auto v : scalp.boundary_loop)
        if (!assigned[v]) throw ValidationError("hairline vertex " + std::to_string(scalp.vertices[v]) + " has no target");
    return s;
}

namespace {

std::vector<char> dirichlet_mask(const ScalpPatch& scalp, const DirichletMap& h) {
    std::vector<char> fixed(scalp.vertices.size(), 0);
    for (const auto v : h.vertices) fixed[v] = 1;
    return fixed;
}

/// Host resolution of every coordinate that moved away from `base`.
std::optional<MembraneState> try_embed(const ParamChart& chart, const MembraneState& base, const std::vector<Vec2>& u) {
    MembraneState s = base;
    for (std::size_t v = 0; v < u.size(); ++v) {
        if (u[v] == base.u[v]) continue;
        const auto loc = chart.locate(u[v], base.host[v].face);
        if (!loc) return std::nullopt;
        s.u[v] = u[v];
        s.host[v] = *loc;
        s.x[v] = chart.embed(*loc);
    }
    return s;
}

}  // namespace

MembraneState embed_coordinates(const ParamChart& chart, const MembraneState& rest, const std::vector<Vec2>& u) {
    auto s = try_embed(chart, rest, u);
    if (!s) throw ValidationError("chart coordinates fall outside the chart");
    return *s;
}

std::vector<Vec2> harmonic_extension(const ScalpPatch& scalp, const ParamChart& chart, const MembraneState& rest,
                                     const DirichletMap& h) {
    const std::size_t nv = scalp.vertices.size();
    std::vector<Vec2> delta(nv, Vec2::Zero());
    std::vector<char> fixed = dirichlet_mask(scalp, h);
    for (std::size_t i = 0; i < h.vertices.size(); ++i) {
        const auto v = h.vertices[i];
        const auto f = chart.patch().local_face(h.targets[i].face);
        if (!f) throw ValidationError("hairline target lies outside the chart");
        delta[v] = chart.chart_point({*f, h.targets[i].bary}) - rest.u[v];
    }
    std::vector<int> unknown(nv, -1);
    int n = 0;
    for (std::size_t v = 0; v < nv; ++v)
        if (!fixed[v]) unknown[v] = n++;
    std::vector<Vec2> u = rest.u;
    for (std::size_t v = 0; v < nv; ++v)
        if (fixed[v]) u[v] += delta[v];
    if (n == 0) return u;

    std::vector<Vec3> lifted(nv);
    for (std::size_t v = 0; v < nv; ++v) lifted[v] = Vec3(rest.u[v].x(), rest.u[v].y(), 0.0);
    const auto weights = cotangent_weights(scalp.local_faces, lifted);
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
                rhs.row(unknown[a]) += w * delta[b].transpose();
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
        if (lu.info() != Eigen::Success) throw ValidationError("scalp Laplacian is singular");
        sol = lu.solve(rhs);
    }
    for (std::size_t v = 0; v < nv; ++v)
        if (unknown[v] >= 0 && (sol(unknown[v], 0) != 0.0 || sol(unknown[v], 1) != 0.0))
            u[v] += sol.row(unknown[v]).transpose();
    return u;
}

MembraneState solve_membrane(const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                             const DirichletMap& h, const MembraneMaterial& material, const MembraneOptions& options,
                             MembraneReport* report) {
    MembraneReport local;
    MembraneReport& rep = report ? *report : local;
    rep = MembraneReport{};
    const MembraneState rest = rest_state(scalp, head, chart);
    const MembraneState pinned = boundary_state(scalp, head, chart, h);

    MembraneState state = pinned;
    if (auto start = try_embed(chart, pinned, harmonic_extension(scalp, chart, rest, h));
        start && std::isfinite(membrane_energy(scalp, chart, *start, material, false).energy))
        state = *start;
    if (!std::isfinite(membrane_energy(scalp, chart, state, material, false).energy))
        throw ValidationError("hairline targets invert the scalp membrane");

    const std::vector<char> fixed = dirichlet_mask(scalp, h);
    std::vector<int> dof(scalp.vertices.size(), -1);
    int n = 0;
    for (std::size_t v = 0; v < fixed.size(); ++v)
        if (!fixed[v]) dof[v] = n++;
    rep.tolerance = options.gradient_tol * scalp.area() * material.mu;

    MembraneEvaluation ev = membrane_energy(scalp, chart, state, material, true);
    rep.initial_energy = ev.energy;
    rep.energy_history.push_back(ev.energy);
    auto free_gradient = [&](const MembraneEvaluation& e) {
        Eigen::VectorXd g(2 * n);
        for (std::size_t v = 0; v < dof.size(); ++v)
            if (dof[v] >= 0) g.segment<2>(2 * dof[v]) = e.gradient.segment<2>(2 * v);
        return g;
    };

    Eigen::VectorXd g = free_gradient(ev);
    for (int it = 0; it < options.max_iterations; ++it) {
        rep.gradient_norm = g.norm();
        if (n == 0 || rep.gradient_norm <= rep.tolerance) {
            rep.converged = true;
            break;
        }
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t t = 0; t < scalp.local_faces.size(); ++t) {
            const Mat6 H = project_psd(ev.hessians[t]);
            const auto& tri = scalp.local_faces[t];
            for (int a = 0; a < 3; ++a) {
                if (dof[tri[a]] < 0) continue;
                for (int b = 0; b < 3; ++b) {
                    if (dof[tri[b]] < 0) continue;
                    for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j)
                            trip.emplace_back(2 * dof[tri[a]] + i, 2 * dof[tri[b]] + j, H(2 * a + i, 2 * b + j));
                }
            }
        }
        SparseMatrix K(2 * n, 2 * n);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(K);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success) step = -ldlt.solve(g);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            double shift = 1e-8 * std::max(1.0, K.diagonal().cwiseAbs().maxCoeff());
            SparseMatrix I(2 * n, 2 * n);
            I.setIdentity();
            ldlt.compute(K + shift * I);
            if (ldlt.info() != Eigen::Success) {
                rep.diagnostic = "Newton system factorization failed";
                break;
            }
            step = -ldlt.solve(g);
        }
        const double slope = g.dot(step);

        bool accepted = false;
        double alpha = 1.0;
        for (int half = 0; half <= options.max_halvings; ++half, alpha *= 0.5) {
            std::vector<Vec2> u = state.u;
            for (std::size_t v = 0; v < dof.size(); ++v)
                if (dof[v] >= 0) u[v] += alpha * step.segment<2>(2 * dof[v]);
            const auto trial = try_embed(chart, state, u);
            if (!trial) continue;
            const double e = membrane_energy(scalp, chart, *trial, material, false).energy;
            if (std::isfinite(e) && e <= ev.energy + 1e-4 * alpha * slope && e < ev.energy) {
                state = *trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            rep.line_search_failed = true;
            rep.diagnostic = "line search failed after " + std::to_string(options.max_halvings) + " halvings";
            break;
        }
        ++rep.iterations;
        ev = membrane_energy(scalp, chart, state, material, true);
        rep.energy_history.push_back(ev.energy);
        g = free_gradient(ev);
        rep.gradient_norm = g.norm();
    }
    if (!rep.converged && rep.gradient_norm <= rep.tolerance) rep.converged = true;
    if (!rep.converged && rep.diagnostic.empty())
        rep.diagnostic = "stopped after " + std::to_string(rep.iterations) + " Newton iterations";
    rep.final_energy = ev.energy;
    return state;
}

std::vector<RelocatedRoot> relocate_roots(const ScalpPatch& scalp, const HeadPatch& head, const Points& deformed) {
    std::vector<RelocatedRoot> out(scalp.root_face.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(out.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto t = scalp.root_face[i];
        const auto& tri = scalp.local_faces[t];
        const Vec3& b = scalp.root_bary[i];
        const Vec3 old = b[0] * scalp.rest[tri[0]] + b[1] * scalp.rest[tri[1]] + b[2] * scalp.rest[tri[2]];
        RelocatedRoot& r = out[i];
        if (deformed[tri[0]] == scalp.rest[tri[0]] && deformed[tri[1]] == scalp.rest[tri[1]] &&
            deformed[tri[2]] == scalp.rest[tri[2]]) {
            r.where = {scalp.faces[t], b};
            r.position = old;
            r.travel = 0.0;
            continue;
        }
        const Vec3 carried = b[0] * deformed[tri[0]] + b[1] * deformed[tri[1]] + b[2] * deformed[tri[2]];
        r.where = head.project(carried);
        r.position = head.point(r.where);
        r.travel = (r.position - old).norm();
    }
    return out;
}

std::string to_string(Relocator r) {
    switch (r) {
        case Relocator::Membrane: return "membrane";
        case Relocator::Rbf3d: return "rbf3d";
        case Relocator::Rbf2d: return "rbf2d";
        case Relocator::Harmonic2d: return "harmonic2d";
    }
    return "membrane";
}

Relocator parse_relocator(const std::string& name) {
    for (const auto r : {Relocator::Membrane, Relocator::Rbf3d, Relocator::Rbf2d, Relocator::Harmonic2d})
        if (to_string(r) == name) return r;
    throw ValidationError("unknown relocation method '" + name + "'");
}

ThinPlateSpline::ThinPlateSpline(const std::vector<Eigen::VectorXd>& seeds, const std::vector<Eigen::VectorXd>& values)
    : seeds_(seeds) {
    if (seeds.empty() || seeds.size() != values.size()) throw ValidationError("RBF needs matching seeds and values");
    dim_ = static_cast<int>(seeds[0].size());
    const int out = static_cast<int>(values[0].size());
    const int n = static_cast<int>(seeds.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if ((seeds[i] - seeds[j]).norm() <= 1e-12) throw ValidationError("RBF system is singular (coincident seeds)");
    const int m = n + dim_ + 1;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, out);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) S(i, j) = kernel((seeds[i] - seeds[j]).norm());
        S(i, n) = S(n, i) = 1.0;
        for (int d = 0; d < dim_; ++d) S(i, n + 1 + d) = S(n + 1 + d, i) = seeds[i][d];
        rhs.row(i) = values[i].transpose();
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (lu.rank() < m) throw ValidationError("RBF system is singular");
    const Eigen::MatrixXd sol = lu.solve(rhs);
    weights_ = sol.topRows(n);
    affine_ = sol.bottomRows(dim_ + 1);
}

double ThinPlateSpline::kernel(double r) const {
    if (dim_ == 2) return r > 0.0 ? r * r * std::log(r) : 0.0;
    return r;
}

Eigen::VectorXd ThinPlateSpline::operator()(const Eigen::VectorXd& p) const {
    Eigen::VectorXd v = affine_.row(0).transpose();
    for (int d = 0; d < dim_; ++d) v += p[d] * affine_.row(1 + d).transpose();
    for (std::size_t i = 0; i < seeds_.size(); ++i) v += kernel((p - seeds_[i]).norm()) * weights_.row(i).transpose();
    return v;
}

Points deform_scalp(Relocator kind, const ScalpPatch& scalp, const HeadPatch& head, const ParamChart& chart,
                    const DirichletMap& h, const MembraneMaterial& material, MembraneReport* report) {
    const MembraneState rest = rest_state(scalp, head, chart);
    const MembraneState pinned = boundary_state(scalp, head, chart, h);
    const std::vector<char> fixed = dirichlet_mask(scalp, h);
    switch (kind) {
        case Relocator::Membrane:
            return solve_membrane(scalp, head, chart, h, material, {}, report).x;
        case Relocator::Harmonic2d:
            return embed_coordinates(chart, pinned, harmonic_extension(scalp, chart, rest, h)).x;
        case Relocator::Rbf2d: {
            std::vector<Eigen::VectorXd> seeds, values;
            bool moved = false;
            for (const auto v : h.vertices) {
                seeds.push_back(rest.u[v]);
                values.push_back(pinned.u[v] - rest.u[v]);
                moved = moved || pinned.u[v] != rest.u[v];
            }
            if (!moved) return rest.x;
            const ThinPlateSpline tps(seeds, values);
            std::vector<Vec2> u = pinned.u;
            for (std::size_t v = 0; v < u.size(); ++v) {
                if (fixed[v]) continue;
                Vec2 w = rest.u[v] + Vec2(tps(rest.u[v]));
                if (w.norm() >= 1.0) w *= (1.0 - 1e-9) / w.norm();
                u[v] = w;
            }
            return embed_coordinates(chart, pinned, u).x;
        }
        case Relocator::Rbf3d: {
            std::vector<Eigen::VectorXd> seeds, values;
            bool moved = false;
            for (const auto v : h.vertices) {
                seeds.push_back(rest.x[v]);
                values.push_back(pinned.x[v] - rest.x[v]);
                moved = moved || pinned.x[v] != rest.x[v];
            }
            if (!moved) return rest.x;
            const ThinPlateSpline tps(seeds, values);
            Points x = pinned.x;
            for (std::size_t v = 0; v < x.size(); ++v) {
                if (fixed[v]) continue;
                x[v] = head.point(head.project(rest.x[v] + Vec3(tps(rest.x[v]))));
            }
            return x;
        }
    }
    return rest.x;
}

}  // namespace hairadapt
