#include "hairadapt/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace hairadapt {

RegressionMetrics regression_metrics(const Hairstyle& a, const Hairstyle& b) {
    if (a.offsets() != b.offsets()) throw ValidationError("regression metrics need identical strand topology");
    RegressionMetrics m;
    m.particles = a.particle_count();
    const auto& pa = a.positions();
    const auto& pb = b.positions();
    double dist = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) dist += (pa[i] - pb[i]).norm();
    m.mean_distance = pa.empty() ? 0.0 : dist / static_cast<double>(pa.size());
    double angle = 0.0;
    for (std::size_t s = 0; s < a.strand_count(); ++s) {
        for (auto i = a.strand_begin(s) + 1; i < a.strand_end(s); ++i) {
            const Vec3 da = pa[i] - pa[i - 1], db = pb[i] - pb[i - 1];
            if (da.norm() < 1e-12 || db.norm() < 1e-12) {
                ++m.degenerate_segments;
                continue;
            }
            const Vec3 ua = da.normalized(), ub = db.normalized();
            angle += std::atan2(ua.cross(ub).norm(), ua.dot(ub));
            ++m.segments;
        }
    }
    m.mean_angle = m.segments ? angle / static_cast<double>(m.segments) : 0.0;
    return m;
}

nlohmann::json to_json(const RegressionMetrics& m) {
    return {{"meanDistance", m.mean_distance},
            {"meanAngle", m.mean_angle},
            {"particles", m.particles},
            {"segments", m.segments},
            {"degenerateSegments", m.degenerate_segments}};
}

namespace {

double area_of(const Points& x, const Eigen::Vector3i& t) {
    return 0.5 * (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
}

void finish(DensityChange& d) {
    d.l1_sum = 0.0;
    d.linf = 0.0;
    for (const auto& e : d.entries) {
        d.l1_sum += std::abs(e.change);
        d.linf = std::max(d.linf, std::abs(e.change));
    }
    d.l1_mean = d.entries.empty() ? 0.0 : d.l1_sum / static_cast<double>(d.entries.size());
}

}  // namespace

DensityChange density_change_deformed(const ScalpPatch& scalp, const Points& deformed) {
    DensityChange d;
    d.convention = "deformed-area";
    std::vector<std::uint32_t> count(scalp.local_faces.size(), 0);
    for (const auto f : scalp.root_face) ++count[f];
    for (std::size_t f = 0; f < scalp.local_faces.size(); ++f) {
        DensityEntry e;
        e.face = scalp.faces[f];
        e.rest_area = scalp.rest_area[f];
        e.area_after = area_of(deformed, scalp.local_faces[f]);
        e.before = e.after = count[f];
        if (count[f] > 0) {
            const double before = count[f] / e.rest_area;
            const double after = count[f] / e.area_after;
            e.change = (after - before) / before;
        }
        d.entries.push_back(e);
    }
    d.roots_before = d.roots_after = scalp.root_face.size();
    finish(d);
    return d;
}

DensityChange density_change_rest(const ScalpPatch& scalp, std::span<const RelocatedRoot> relocated) {
    if (relocated.size() != scalp.root_face.size()) throw ValidationError("relocation does not match the scalp roots");
    DensityChange d;
    d.convention = "rest-area";
    std::vector<std::uint32_t> before(scalp.local_faces.size(), 0), after(scalp.local_faces.size(), 0);
    for (const auto f : scalp.root_face) ++before[f];
    std::size_t outside = 0;
    for (const auto& r : relocated) {
        const auto it = std::lower_bound(scalp.faces.begin(), scalp.faces.end(), r.where.face);
        if (it == scalp.faces.end() || *it != r.where.face) {
            ++outside;
            continue;
        }
        ++after[static_cast<std::size_t>(it - scalp.faces.begin())];
    }
    d.roots_entering = outside;
    for (std::size_t f = 0; f < scalp.local_faces.size(); ++f) {
        DensityEntry e;
        e.face = scalp.faces[f];
        e.rest_area = e.area_after = scalp.rest_area[f];
        e.before = before[f];
        e.after = after[f];
        if (before[f] > 0)
            e.change = (static_cast<double>(after[f]) - before[f]) / before[f];
        else
            d.roots_entering += after[f];
        d.entries.push_back(e);
    }
    d.roots_before = relocated.size();
    d.roots_after = relocated.size();
    finish(d);
    return d;
}

nlohmann::json to_json(const DensityChange& d, bool with_entries) {
    nlohmann::json j = {{"convention", d.convention},
                        {"l1Sum", d.l1_sum},
                        {"l1Mean", d.l1_mean},
                        {"lInf", d.linf},
                        {"rootsBefore", d.roots_before},
                        {"rootsAfter", d.roots_after},
                        {"rootsEntering", d.roots_entering}};
    if (with_entries) {
        nlohmann::json faces = nlohmann::json::array(), change = nlohmann::json::array();
        for (const auto& e : d.entries) {
            faces.push_back(e.face);
            change.push_back(e.change);
        }
        j["faces"] = faces;
        j["change"] = change;
    }
    return j;
}

std::string density_csv(const DensityChange& d) {
    std::ostringstream os;
    os << std::setprecision(17) << "face,rest_area,area_after,before,after,change\n";
    for (const auto& e : d.entries)
        os << e.face << ',' << e.rest_area << ',' << e.area_after << ',' << e.before << ',' << e.after << ','
           << e.change << '\n';
    return os.str();
}

ObjectiveMaps objective_maps(const AdaptationProblem& pb, const Points& p) {
    const std::size_t n = pb.topology->particle_count();
    ObjectiveMaps m;
    m.strand_shape.assign(n, 0.0);
    m.inter_strand.assign(n, 0.0);
    m.hair_body.assign(n, 0.0);
    m.total.assign(n, 0.0);
    auto spread = [&](const ResidualSet& rows, std::vector<double>& out) {
        const auto e = rows.row_energies(p);
        for (std::size_t r = 0; r < rows.rows(); ++r) out[rows.owner(r)] += e[r];
    };
    spread(strand_shape_terms(p, *pb.topology).rows, m.strand_shape);
    spread(pb.inter_rows, m.inter_strand);
    spread(pb.body_rows, m.hair_body);
    const double ws = pb.toggles.strand_shape ? 1.0 : 0.0;
    const double wi = pb.toggles.inter_strand ? pb.config.alpha : 0.0;
    const double wb = pb.toggles.hair_body ? pb.config.beta : 0.0;
    for (std::size_t i = 0; i < n; ++i) m.total[i] = ws * m.strand_shape[i] + wi * m.inter_strand[i] + wb * m.hair_body[i];
    m.totals = evaluate_objective(pb, p);
    return m;
}

std::string objective_maps_csv(const ObjectiveMaps& m, const Hairstyle& topo) {
    const auto strand = topo.strand_ids();
    std::ostringstream os;
    os << std::setprecision(17) << "particle,strand,strand_shape,inter_strand,hair_body,total\n";
    for (std::size_t i = 0; i < m.total.size(); ++i)
        os << i << ',' << strand[i] << ',' << m.strand_shape[i] << ',' << m.inter_strand[i] << ',' << m.hair_body[i]
           << ',' << m.total[i] << '\n';
    return os.str();
}

nlohmann::json to_json(const RuntimeReport& r) {
    nlohmann::json j = {{"preprocess", r.preprocess},
                        {"initialTransfer", r.initial_transfer},
                        {"relocation", r.relocation},
                        {"multiscale", r.multiscale},
                        {"total", r.total}};
    if (r.full_solve > 0.0) {
        j["fullSolve"] = r.full_solve;
        j["speedup"] = r.speedup();
    }
    return j;
}

std::string runtime_table(const RuntimeReport& r) {
    std::ostringstream os;
    os << std::setprecision(6) << "preprocess,initial_transfer,relocation,multiscale,total,full_solve,speedup\n"
       << r.preprocess << ',' << r.initial_transfer << ',' << r.relocation << ',' << r.multiscale << ',' << r.total
       << ',';
    if (r.full_solve > 0.0)
        os << r.full_solve << ',' << r.speedup();
    else
        os << ',';
    os << '\n';
    return os.str();
}

}  // namespace hairadapt
