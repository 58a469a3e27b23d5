#include "hairadapt/multiscale.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace hairadapt {

namespace {

constexpr std::size_t kSwapPhaseLimit = 200;
constexpr std::size_t kDistanceMatrixLimit = 4000;
constexpr int kMaxVoronoiRounds = 100;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Descriptor distances, tabulated for small problems.
class DistanceOracle {
public:
    explicit DistanceOracle(const std::vector<StrandDescriptor>& d) : d_(d) {
        const std::size_t n = d.size();
        if (n <= kDistanceMatrixLimit) {
            table_.resize(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) table_[i * n + j] = (d[i] - d[j]).norm();
        }
    }
    double operator()(std::size_t i, std::size_t j) const {
        return table_.empty() ? (d_[i] - d_[j]).norm() : table_[i * d_.size() + j];
    }

private:
    const std::vector<StrandDescriptor>& d_;
    std::vector<double> table_;
};

/// Nearest medoid (position in `medoids`) of every item; ties go to the
/// earlier medoid.
std::vector<std::uint32_t> assign(const DistanceOracle& dist, std::size_t n, const std::vector<std::uint32_t>& medoids,
                                  double* cost) {
    std::vector<std::uint32_t> out(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            const double dm = dist(i, medoids[m]);
            if (dm < best) {
                best = dm;
                out[i] = static_cast<std::uint32_t>(m);
            }
        }
        total += best;
    }
    if (cost) *cost = total;
    return out;
}

ResidualSet filter_rows(const ResidualSet& rows, const std::vector<char>& keep_particle) {
    ResidualSet out;
    std::vector<std::pair<std::uint32_t, double>> coefs;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto cols = rows.row_columns(r);
        const auto c = rows.row_coefficients(r);
        if (!std::all_of(cols.begin(), cols.end(), [&](std::uint32_t j) { return keep_particle[j] != 0; })) continue;
        coefs.clear();
        for (std::size_t a = 0; a < cols.size(); ++a) coefs.emplace_back(cols[a], c[a]);
        out.add_row(coefs, rows.target(r), rows.weight(r));
    }
    return out;
}

}  // namespace

StrandDescriptor strand_descriptor(const Hairstyle& hair, std::size_t s) {
    const auto& p = hair.positions();
    const auto b = hair.strand_begin(s), e = hair.strand_end(s);
    std::vector<double> acc{0.0};
    for (auto i = b + 1; i < e; ++i) acc.push_back(acc.back() + (p[i] - p[i - 1]).norm());
    StrandDescriptor d;
    d.segment<3>(0) = p[b];
    std::size_t seg = 1;
    for (int k = 1; k <= kDescriptorPoints; ++k) {
        const double target = acc.back() * k / kDescriptorPoints;
        while (seg + 1 < acc.size() && acc[seg] < target) ++seg;
        const double len = acc[seg] - acc[seg - 1];
        const double t = len > 0.0 ? std::clamp((target - acc[seg - 1]) / len, 0.0, 1.0) : 1.0;
        d.segment<3>(3 * k) = p[b + seg - 1] + t * (p[b + seg] - p[b + seg - 1]);
    }
    return d;
}

std::vector<StrandDescriptor> strand_descriptors(const Hairstyle& hair) {
    std::vector<StrandDescriptor> out(hair.strand_count());
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(out.size()); ++s) out[s] = strand_descriptor(hair, s);
    return out;
}

std::uint64_t descriptor_hash(const std::vector<StrandDescriptor>& descriptors) {
    std::uint64_t h = fnv1a({});
    for (const auto& d : descriptors) {
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(d.data());
        h = fnv1a(std::span<const std::uint8_t>(bytes, sizeof(double) * d.size()), h);
    }
    return h;
}

double medoid_cost(const std::vector<StrandDescriptor>& descriptors, std::span<const std::uint32_t> medoids) {
    double total = 0.0;
    for (const auto& d : descriptors) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) best = std::min(best, (d - descriptors[m]).norm());
        total += best;
    }
    return total;
}

GuideSelection select_guides(const Hairstyle& source, int n_guides, std::uint64_t seed) {
    if (n_guides <= 0) throw ValidationError("guide count must be positive");
    const std::size_t n = source.strand_count();
    if (n == 0) throw ValidationError("hairstyle has no strands");
    const auto desc = strand_descriptors(source);
    GuideSelection sel;
    sel.hash = descriptor_hash(desc);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(n_guides), n);
    if (k == n) {
        sel.guides.resize(n);
        std::iota(sel.guides.begin(), sel.guides.end(), 0u);
        sel.assignment = sel.guides;
        return sel;
    }
    const DistanceOracle dist(desc);

    // Farthest-point seeding from a seeded first medoid.
    std::vector<std::uint32_t> medoids;
    std::mt19937_64 rng(seed);
    medoids.push_back(static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)));
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (medoids.size() < k) {
        const auto last = medoids.back();
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], dist(i, last));
            if (nearest[i] > far_d) {
                far_d = nearest[i];
                far = i;
            }
        }
        medoids.push_back(static_cast<std::uint32_t>(far));
    }

    // Alternate assignment and per-cluster medoid updates.
    double cost = 0.0;
    auto labels = assign(dist, n, medoids, &cost);
    for (int round = 0; round < kMaxVoronoiRounds; ++round) {
        std::vector<std::vector<std::uint32_t>> members(k);
        for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(static_cast<std::uint32_t>(i));
        bool changed = false;
        for (std::size_t c = 0; c < k; ++c) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t arg = medoids[c];
            for (auto cand : members[c]) {
                double sum = 0.0;
                for (auto other : members[c]) sum += dist(cand, other);
                if (sum < best - 1e-15 || (std::abs(sum - best) <= 1e-15 && cand < arg)) {
                    best = sum;
                    arg = cand;
                }
            }
            if (arg != medoids[c]) {
                medoids[c] = arg;
                changed = true;
            }
        }
        if (!changed) break;
        labels = assign(dist, n, medoids, &cost);
    }

    // Best-improvement swaps for small problems.
    if (n <= kSwapPhaseLimit) {
        std::vector<char> is_medoid(n, 0);
        for (auto m : medoids) is_medoid[m] = 1;
        for (;;) {
            double best_cost = cost;
            std::size_t best_m = 0, best_o = 0;
            for (std::size_t m = 0; m < k; ++m) {
                for (std::size_t o = 0; o < n; ++o) {
                    if (is_medoid[o]) continue;
                    auto trial = medoids;
                    trial[m] = static_cast<std::uint32_t>(o);
                    double c = 0.0;
                    assign(dist, n, trial, &c);
                    if (c < best_cost - 1e-12) {
                        best_cost = c;
                        best_m = m;
                        best_o = o;
                    }
                }
            }
            if (best_cost >= cost - 1e-12) break;
            is_medoid[medoids[best_m]] = 0;
            is_medoid[best_o] = 1;
            medoids[best_m] = static_cast<std::uint32_t>(best_o);
            cost = best_cost;
        }
    }

    std::sort(medoids.begin(), medoids.end());
    sel.guides = medoids;
    sel.assignment = assign(dist, n, sel.guides, &sel.cost);
    return sel;
}

std::vector<std::uint32_t> normal_strands(std::size_t strand_count, std::span<const std::uint32_t> guides) {
    std::vector<char> is_guide(strand_count, 0);
    for (auto g : guides) is_guide.at(g) = 1;
    std::vector<std::uint32_t> out;
    for (std::size_t s = 0; s < strand_count; ++s)
        if (!is_guide[s]) out.push_back(static_cast<std::uint32_t>(s));
    return out;
}

std::vector<std::uint32_t> particles_of(const Hairstyle& hair, std::span<const std::uint32_t> strands) {
    std::vector<std::uint32_t> out;
    for (auto s : strands)
        for (auto i = hair.strand_begin(s); i < hair.strand_end(s); ++i) out.push_back(i);
    return out;
}

LaplacianFeatureSet build_decoupled_features(const Hairstyle& source, std::span<const std::uint32_t> guides, int k) {
    const auto normals = normal_strands(source.strand_count(), guides);
    const auto queries = particles_of(source, normals);
    const auto candidates = particles_of(source, guides);
    return build_restricted_features(source, queries, candidates, k);
}

CoarseResult coarse_solve(const Hairstyle& source, std::span<const std::uint32_t> guides, const Points& initial,
                          const MeshQuery& target, const AdaptationConfig& config, ParticleWeightsView gamma,
                          const std::map<std::uint32_t, Vec3>* root_targets, const ProgressCallback& progress) {
    const Hairstyle sub = source.subset(guides);
    const auto global = particles_of(source, guides);
    Points init(global.size());
    std::vector<double> sub_gamma;
    if (!gamma.empty()) sub_gamma.resize(global.size());
    for (std::size_t j = 0; j < global.size(); ++j) {
        init[j] = initial[global[j]];
        if (!gamma.empty()) sub_gamma[j] = gamma[global[j]];
    }
    std::map<std::uint32_t, Vec3> roots;
    for (std::size_t s = 0; s < sub.strand_count(); ++s) {
        const auto local = sub.strand_begin(s);
        const auto g = global[local];
        roots[local] = root_targets && root_targets->count(g) ? root_targets->at(g) : initial[g];
    }
    const auto features = build_knn_features(sub, config.k);
    const auto pb = make_problem(sub, init, features, target, config, sub_gamma, &roots);
    auto res = iterate_adaptation(pb, progress);
    return {std::move(res.positions), std::move(res.report)};
}

FineReport fine_solve(const Hairstyle& source, std::span<const std::uint32_t> normals,
                      const LaplacianFeatureSet& decoupled, const Points& initial, const MeshQuery& target,
                      const AdaptationConfig& config, Points& positions, ParticleWeightsView gamma,
                      const std::map<std::uint32_t, Vec3>* root_targets) {
    const auto t0 = std::chrono::steady_clock::now();
    FineReport rep;
    rep.strands = normals.size();
    std::vector<int> outer(normals.size(), 0);
    std::vector<char> converged(normals.size(), 0);
    std::vector<std::string> failure(normals.size());

#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(normals.size()); ++k) {
        const auto s = normals[k];
        const auto b = source.strand_begin(s), e = source.strand_end(s);
        try {
            const std::uint32_t strand[] = {s};
            const Hairstyle sub = source.subset(strand);
            std::vector<std::uint32_t> particles(e - b);
            std::iota(particles.begin(), particles.end(), b);

            AdaptationProblem pb;
            pb.topology = &sub;
            pb.initial.assign(initial.begin() + b, initial.begin() + e);
            pb.inter_rows = decoupled_inter_strand_terms(decoupled, positions, particles,
                                                         [b](std::uint32_t i) { return i - b; }, gamma);
            pb.body_rows = hair_body_terms(pb.initial, gamma.empty() ? gamma : gamma.subspan(b, e - b));
            const Vec3 root = root_targets && root_targets->count(b) ? root_targets->at(b) : initial[b];
            pb.root_targets[0] = root;
            pb.initial[0] = root;
            pb.target = &target;
            pb.config = config;

            const auto res = iterate_adaptation(pb);
            outer[k] = res.report.outer_iterations;
            converged[k] = res.report.converged;
            if (res.report.diverged) {
                failure[k] = res.report.diagnostic;
                std::copy(pb.initial.begin(), pb.initial.end(), positions.begin() + b);
            } else {
                std::copy(res.positions.begin(), res.positions.end(), positions.begin() + b);
            }
        } catch (const std::exception& ex) {
            failure[k] = ex.what();
            std::copy(initial.begin() + b, initial.begin() + e, positions.begin() + b);
            if (root_targets && root_targets->count(b)) positions[b] = root_targets->at(b);
        }
    }
    for (std::size_t k = 0; k < normals.size(); ++k) {
        rep.max_outer_iterations = std::max(rep.max_outer_iterations, outer[k]);
        rep.converged += converged[k];
        if (!failure[k].empty()) rep.failures.emplace_back(normals[k], failure[k]);
    }
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

SparseMatrix fine_stage_hessian(const Hairstyle& source, std::span<const std::uint32_t> normals,
                                const LaplacianFeatureSet& decoupled, const Points& current,
                                const AdaptationConfig& config) {
    std::vector<char> keep(source.particle_count(), 0);
    for (auto i : particles_of(source, normals)) keep[i] = 1;
    const auto particles = particles_of(source, normals);
    const auto shape = filter_rows(strand_shape_terms(current, source).rows, keep);
    const auto inter =
        decoupled_inter_strand_terms(decoupled, current, particles, [](std::uint32_t i) { return i; });
    const auto body = filter_rows(hair_body_terms(current), keep);
    const WeightedTerms terms[] = {{&shape, 1.0}, {&inter, config.alpha}, {&body, config.beta}};
    return residual_hessian(source.particle_count(), terms);
}

std::size_t cross_strand_nonzeros(const SparseMatrix& h, const Hairstyle& hair) {
    const auto strand = hair.strand_ids();
    std::size_t count = 0;
    for (int c = 0; c < h.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(h, c); it; ++it)
            if (it.value() != 0.0 && strand[it.row()] != strand[it.col()]) ++count;
    return count;
}

MultiscaleResult multiscale_solve(const Hairstyle& source, const GuideSelection& selection,
                                  const LaplacianFeatureSet& decoupled, const Points& initial,
                                  const MeshQuery& target, const AdaptationConfig& config, ParticleWeightsView gamma,
                                  const std::map<std::uint32_t, Vec3>* root_targets,
                                  const ProgressCallback& progress) {
    MultiscaleResult out;
    out.guides = selection;
    out.positions = initial;
    if (root_targets)
        for (const auto& [r, t] : *root_targets) out.positions[r] = t;

    auto t0 = std::chrono::steady_clock::now();
    out.coarse = coarse_solve(source, selection.guides, initial, target, config, gamma, root_targets, progress);
    const auto global = particles_of(source, selection.guides);
    for (std::size_t j = 0; j < global.size(); ++j) out.positions[global[j]] = out.coarse.positions[j];
    out.coarse_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto normals = normal_strands(source.strand_count(), selection.guides);
    out.fine = fine_solve(source, normals, decoupled, initial, target, config, out.positions, gamma, root_targets);
    out.fine_seconds = seconds_since(t0);
    return out;
}

}  // namespace hairadapt
