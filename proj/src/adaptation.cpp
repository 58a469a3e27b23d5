#include "hairadapt/adaptation.hpp"

#include <chrono>
#include <cmath>

namespace hairadapt {

namespace {

constexpr double kFeasibilityTol = 1e-6;

double max_displacement(const Points& a, const Points& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a[i] - b[i]).norm());
    return worst;
}

}  // namespace

AdaptationProblem make_problem(const Hairstyle& source, const Points& initial, const LaplacianFeatureSet& features,
                               const MeshQuery& target, const AdaptationConfig& config, ParticleWeightsView gamma,
                               const std::map<std::uint32_t, Vec3>* root_targets) {
    if (initial.size() != source.particle_count()) throw ValidationError("initializer size does not match hairstyle");
    AdaptationProblem pb;
    pb.topology = &source;
    pb.initial = initial;
    if (!features.empty()) pb.inter_rows = inter_strand_terms(features, gamma);
    pb.body_rows = hair_body_terms(initial, gamma);
    if (root_targets) {
        pb.root_targets = *root_targets;
    } else {
        for (std::size_t s = 0; s < source.strand_count(); ++s) {
            const auto r = source.strand_begin(s);
            pb.root_targets[r] = initial[r];
        }
    }
    for (const auto& [r, t] : pb.root_targets) pb.initial[r] = t;
    pb.target = &target;
    pb.config = config;
    return pb;
}

ObjectiveTerms evaluate_objective(const AdaptationProblem& pb, const Points& p) {
    ObjectiveTerms t;
    t.strand_shape = strand_shape_energy(p, *pb.topology);
    t.inter_strand = pb.inter_rows.energy(p);
    t.hair_body = pb.body_rows.energy(p);
    t.total = (pb.toggles.strand_shape ? t.strand_shape : 0.0) +
              (pb.toggles.inter_strand ? pb.config.alpha * t.inter_strand : 0.0) +
              (pb.toggles.hair_body ? pb.config.beta * t.hair_body : 0.0);
    return t;
}

nlohmann::json to_json(const SolverReport& r) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : r.history) {
        hist.push_back({{"objective", h.objective},
                        {"displacement", h.displacement},
                        {"maxViolation", h.max_violation},
                        {"admmIterations", h.admm_iterations},
                        {"qpConverged", h.qp_converged},
                        {"polished", h.polished}});
    }
    return {{"outerIterations", r.outer_iterations},
            {"initialObjective", r.initial_objective},
            {"finalObjective", r.final_objective()},
            {"history", hist},
            {"primalResidual", r.primal_residual},
            {"dualResidual", r.dual_residual},
            {"maxViolation", r.max_violation},
            {"tolOuter", r.tol_outer},
            {"wallSeconds", r.wall_seconds},
            {"converged", r.converged},
            {"diverged", r.diverged},
            {"diagnostic", r.diagnostic}};
}

QpSettings qp_settings(const AdaptationConfig& config) {
    QpSettings s;
    s.eps_primal = config.tol_primal;
    s.eps_dual = config.tol_dual;
    s.max_iter = config.max_admm_iters;
    return s;
}

AdaptationResult iterate_adaptation(const AdaptationProblem& pb, const ProgressCallback& progress) {
    const auto start = std::chrono::steady_clock::now();
    const Hairstyle& topo = *pb.topology;
    const AdaptationConfig& cfg = pb.config;
    const std::size_t n = topo.particle_count();

    AdaptationResult out;
    SolverReport& rep = out.report;
    rep.tol_outer = cfg.tol_outer_rel * topo.bounding_box_diagonal();

    Points p = pb.initial;
    rep.initial_objective = evaluate_objective(pb, p).total;

    const double shape_w = pb.toggles.strand_shape ? 1.0 : 0.0;
    const double inter_w = pb.toggles.inter_strand ? cfg.alpha : 0.0;
    const double body_w = pb.toggles.hair_body ? cfg.beta : 0.0;
    const QpSettings settings = qp_settings(cfg);

    KktCache cache;
    Eigen::VectorXd y;
    double previous = rep.initial_objective;
    double displacement_bound = topo.bounding_box_diagonal();
    for (int it = 1; it <= cfg.max_outer; ++it) {
        const auto shape = strand_shape_terms(p, topo);
        const WeightedTerms terms[] = {{&shape.rows, shape_w}, {&pb.inter_rows, inter_w}, {&pb.body_rows, body_w}};
        const double cutoff = cfg.penetration_cutoff ? 10.0 * cfg.eps_c + displacement_bound : 0.0;
        auto rows = penetration_constraints(p, topo, *pb.target, cfg.eps_c, cutoff);
        const QPProblem qp = assemble_qp(n, terms, pb.root_targets, std::move(rows));
        const QpData data = to_qp_data(qp);
        const Eigen::VectorXd x0 = qp.pack(p);
        const bool warm_dual = y.size() == data.A.rows();
        const QpResult res = solve_qp(data, settings, &x0, warm_dual ? &y : nullptr, &cache);
        y = res.y;

        const Points next = qp.unpack(res.x);
        OuterIterate h;
        h.displacement = max_displacement(next, p);
        h.objective = evaluate_objective(pb, next).total;
        h.admm_iterations = res.iterations;
        h.qp_converged = res.converged;
        h.polished = res.polished;
        p = next;
        h.max_violation = max_penetration_violation(p, topo, *pb.target, cfg.eps_c);
        rep.history.push_back(h);
        rep.outer_iterations = it;
        rep.primal_residual = res.primal_residual;
        rep.dual_residual = res.dual_residual;
        rep.max_violation = h.max_violation;
        displacement_bound = h.displacement;
        if (progress) progress(it, cfg.max_outer);

        if (h.objective > 10.0 * previous && h.objective > 1e-12) {
            rep.diverged = true;
            rep.diagnostic = "objective grew from " + std::to_string(previous) + " to " + std::to_string(h.objective) +
                             " at outer iteration " + std::to_string(it);
            break;
        }
        previous = h.objective;
        if (h.displacement < rep.tol_outer && h.max_violation <= kFeasibilityTol && res.converged) {
            rep.converged = true;
            break;
        }
    }
    if (!rep.converged && rep.diagnostic.empty())
        rep.diagnostic = "outer loop stopped after " + std::to_string(rep.outer_iterations) + " iterations";
    out.positions = std::move(p);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace hairadapt
