#include "hairadapt/energies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hairadapt {

std::vector<double> laplacian_weights(std::span<const double> distances) {
    std::vector<double> w(distances.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < distances.size(); ++j) {
        w[j] = 1.0 / std::max(distances[j], 1e-12);
        sum += w[j];
    }
    for (auto& x : w) x /= sum;
    return w;
}

namespace {

void append_feature(LaplacianFeatureSet& set, const Points& p, std::size_t i, const std::vector<Neighbor>& nbrs) {
    std::vector<double> dist(nbrs.size());
    for (std::size_t j = 0; j < nbrs.size(); ++j) dist[j] = nbrs[j].distance;
    const auto w = laplacian_weights(dist);
    Vec3 ref = Vec3::Zero();
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
        set.neighbors.push_back(nbrs[j].index);
        set.weights.push_back(w[j]);
        ref += w[j] * (p[i] - p[nbrs[j].index]);
    }
    set.reference[i] = ref;
    set.offsets[i + 1] = static_cast<std::uint32_t>(set.neighbors.size());
    if (nbrs.size() < static_cast<std::size_t>(set.k)) set.sparse.push_back(static_cast<std::uint32_t>(i));
}

LaplacianFeatureSet features_from_tree(const Hairstyle& source, const PointKdTree& tree,
                                       std::span<const std::uint32_t> queries, int k) {
    const auto& p = source.positions();
    const auto strand = source.strand_ids();
    const std::size_t n = p.size();

    std::vector<std::vector<Neighbor>> found(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t qi = 0; qi < static_cast<std::int64_t>(queries.size()); ++qi) {
        const auto i = queries[qi];
        const auto own = strand[i];
        found[qi] = tree.knn(p[i], static_cast<std::size_t>(k), [&](std::uint32_t j) { return strand[j] == own; });
    }

    LaplacianFeatureSet set;
    set.k = k;
    set.offsets.assign(n + 1, 0);
    set.reference.assign(n, Vec3::Zero());
    std::vector<std::size_t> slot(n, static_cast<std::size_t>(-1));
    for (std::size_t qi = 0; qi < queries.size(); ++qi) slot[queries[qi]] = qi;
    static const std::vector<Neighbor> none;
    for (std::size_t i = 0; i < n; ++i) {
        set.offsets[i + 1] = set.offsets[i];
        if (slot[i] == static_cast<std::size_t>(-1)) continue;
        append_feature(set, p, i, found[slot[i]]);
    }
    return set;
}

}  // namespace

LaplacianFeatureSet build_knn_features(const Hairstyle& source, int k) {
    if (k < 1) throw ValidationError("k must be at least 1");
    LaplacianFeatureSet set;
    set.k = k;
    if (source.strand_count() < 2) {
        set.offsets.assign(source.particle_count() + 1, 0);
        set.reference.assign(source.particle_count(), Vec3::Zero());
        return set;
    }
    const PointKdTree tree(source.positions());
    std::vector<std::uint32_t> all(source.particle_count());
    std::iota(all.begin(), all.end(), 0u);
    return features_from_tree(source, tree, all, k);
}

LaplacianFeatureSet build_restricted_features(const Hairstyle& source, std::span<const std::uint32_t> queries,
                                              std::span<const std::uint32_t> candidates, int k) {
    if (k < 1) throw ValidationError("k must be at least 1");
    const PointKdTree tree(source.positions(), std::vector<std::uint32_t>(candidates.begin(), candidates.end()));
    return features_from_tree(source, tree, queries, k);
}

void refresh_reference(LaplacianFeatureSet& features, const Points& p) {
    for (std::size_t i = 0; i < features.particle_count(); ++i) {
        Vec3 ref = Vec3::Zero();
        for (auto e = features.offsets[i]; e < features.offsets[i + 1]; ++e)
            ref += features.weights[e] * (p[i] - p[features.neighbors[e]]);
        features.reference[i] = ref;
    }
}

// --- ResidualSet -------------------------------------------------------------------

void ResidualSet::add_row(std::span<const std::pair<std::uint32_t, double>> coefficients, const Vec3& target,
                          double weight) {
    for (const auto& [col, c] : coefficients) {
        columns_.push_back(col);
        coefficients_.push_back(c);
    }
    offsets_.push_back(static_cast<std::uint32_t>(columns_.size()));
    targets_.push_back(target);
    weights_.push_back(weight);
    owners_.push_back(coefficients.empty() ? 0 : coefficients.front().first);
}

void ResidualSet::append(const ResidualSet& other) {
    for (std::size_t r = 0; r < other.rows(); ++r) {
        const auto cols = other.row_columns(r);
        const auto coefs = other.row_coefficients(r);
        columns_.insert(columns_.end(), cols.begin(), cols.end());
        coefficients_.insert(coefficients_.end(), coefs.begin(), coefs.end());
        offsets_.push_back(static_cast<std::uint32_t>(columns_.size()));
        targets_.push_back(other.targets_[r]);
        weights_.push_back(other.weights_[r]);
        owners_.push_back(other.owners_[r]);
    }
}

std::span<const std::uint32_t> ResidualSet::row_columns(std::size_t r) const {
    return std::span(columns_).subspan(offsets_[r], offsets_[r + 1] - offsets_[r]);
}

std::span<const double> ResidualSet::row_coefficients(std::size_t r) const {
    return std::span(coefficients_).subspan(offsets_[r], offsets_[r + 1] - offsets_[r]);
}

std::vector<double> ResidualSet::row_energies(const Points& p) const {
    std::vector<double> e(rows());
    for (std::size_t r = 0; r < rows(); ++r) {
        Vec3 res = -targets_[r];
        for (auto k = offsets_[r]; k < offsets_[r + 1]; ++k) res += coefficients_[k] * p[columns_[k]];
        e[r] = weights_[r] * res.squaredNorm();
    }
    return e;
}

double ResidualSet::energy(const Points& p) const {
    const auto e = row_energies(p);
    return std::accumulate(e.begin(), e.end(), 0.0);
}

Points ResidualSet::gradient(const Points& p) const {
    Points g(p.size(), Vec3::Zero());
    for (std::size_t r = 0; r < rows(); ++r) {
        Vec3 res = -targets_[r];
        for (auto k = offsets_[r]; k < offsets_[r + 1]; ++k) res += coefficients_[k] * p[columns_[k]];
        for (auto k = offsets_[r]; k < offsets_[r + 1]; ++k)
            g[columns_[k]] += 2.0 * weights_[r] * coefficients_[k] * res;
    }
    return g;
}

void ResidualSet::scale(double factor) {
    for (auto& w : weights_) w *= factor;
}

// --- term builders -----------------------------------------------------------------------

StrandShapeTerms strand_shape_terms(const Points& p_current, const Hairstyle& source) {
    StrandShapeTerms out;
    const auto& src = source.positions();
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        for (auto a = source.strand_begin(s); a + 1 < source.strand_end(s); ++a) {
            const auto b = a + 1;
            const Vec3 seg_src = src[a] - src[b];
            const double len_src = seg_src.norm();
            if (len_src < 1e-12) throw ValidationError("zero-length source segment at particle " + std::to_string(a));
            double len = (p_current[a] - p_current[b]).norm();
            if (len < 1e-9) {
                len = len_src;
                out.flagged.push_back(b);
            }
            const std::pair<std::uint32_t, double> coefs[] = {{a, 1.0 / len}, {b, -1.0 / len}};
            out.rows.add_row(coefs, seg_src / len_src, 1.0);
            out.rows.set_owner(out.rows.rows() - 1, b);
        }
    }
    return out;
}

double strand_shape_energy(const Points& p, const Hairstyle& source) {
    const auto& src = source.positions();
    double e = 0.0;
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        for (auto a = source.strand_begin(s); a + 1 < source.strand_end(s); ++a) {
            const Vec3 d = p[a] - p[a + 1];
            const double len = d.norm();
            if (len < 1e-300) continue;
            e += (d / len - (src[a] - src[a + 1]).normalized()).squaredNorm();
        }
    }
    return e;
}

ResidualSet inter_strand_terms(const LaplacianFeatureSet& f, ParticleWeightsView gamma) {
    ResidualSet rows;
    std::vector<std::pair<std::uint32_t, double>> coefs;
    for (std::size_t i = 0; i < f.particle_count(); ++i) {
        if (!f.has_feature(i)) continue;
        const double w = gamma.empty() ? 1.0 : gamma[i];
        coefs.clear();
        coefs.emplace_back(static_cast<std::uint32_t>(i), 1.0);
        for (auto e = f.offsets[i]; e < f.offsets[i + 1]; ++e) coefs.emplace_back(f.neighbors[e], -f.weights[e]);
        rows.add_row(coefs, f.reference[i], w);
    }
    return rows;
}

ResidualSet decoupled_inter_strand_terms(const LaplacianFeatureSet& f, const Points& neighbor_positions,
                                         std::span<const std::uint32_t> particles,
                                         const std::function<std::uint32_t(std::uint32_t)>& local_index,
                                         ParticleWeightsView gamma) {
    ResidualSet rows;
    for (auto i : particles) {
        if (!f.has_feature(i)) continue;
        Vec3 target = f.reference[i];
        for (auto e = f.offsets[i]; e < f.offsets[i + 1]; ++e)
            target += f.weights[e] * neighbor_positions[f.neighbors[e]];
        const std::pair<std::uint32_t, double> coef[] = {{local_index(i), 1.0}};
        rows.add_row(coef, target, gamma.empty() ? 1.0 : gamma[i]);
    }
    return rows;
}

double inter_strand_energy(const LaplacianFeatureSet& f, const Points& p, ParticleWeightsView gamma) {
    double e = 0.0;
    for (std::size_t i = 0; i < f.particle_count(); ++i) {
        if (!f.has_feature(i)) continue;
        Vec3 l = Vec3::Zero();
        for (auto k = f.offsets[i]; k < f.offsets[i + 1]; ++k) l += f.weights[k] * (p[i] - p[f.neighbors[k]]);
        e += (gamma.empty() ? 1.0 : gamma[i]) * (l - f.reference[i]).squaredNorm();
    }
    return e;
}

ResidualSet hair_body_terms(const Points& p_hat, ParticleWeightsView gamma) {
    ResidualSet rows;
    for (std::size_t i = 0; i < p_hat.size(); ++i) {
        const std::pair<std::uint32_t, double> coef[] = {{static_cast<std::uint32_t>(i), 1.0}};
        rows.add_row(coef, p_hat[i], gamma.empty() ? 1.0 : gamma[i]);
    }
    return rows;
}

std::vector<HalfSpace> penetration_constraints(const Points& p, const Hairstyle& topology, const MeshQuery& target,
                                               double eps_c, double cutoff) {
    std::vector<std::uint32_t> particles;
    for (std::size_t s = 0; s < topology.strand_count(); ++s)
        for (auto i = topology.strand_begin(s) + 1; i < topology.strand_end(s); ++i) particles.push_back(i);

    std::vector<HalfSpace> rows(particles.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(particles.size()); ++r) {
        const auto i = particles[r];
        const auto hit = target.closest(p[i]);
        rows[r] = HalfSpace{i, hit.normal, hit.normal.dot(hit.point) + eps_c, (p[i] - hit.point).dot(hit.normal)};
    }
    if (cutoff > 0.0) {
        std::erase_if(rows, [&](const HalfSpace& h) { return h.clearance >= cutoff; });
    }
    return rows;
}

double max_penetration_violation(const Points& p, const Hairstyle& topology, const MeshQuery& target, double eps_c) {
    double worst = 0.0;
    for (const auto& h : penetration_constraints(p, topology, target, eps_c))
        worst = std::max(worst, eps_c - h.clearance);
    return worst;
}

// --- QP assembly ---------------------------------------------------------------------------

Eigen::VectorXd QPProblem::pack(const Points& p) const {
    const auto n = free_count();
    Eigen::VectorXd x(3 * n);
    for (std::size_t f = 0; f < n; ++f)
        for (int d = 0; d < 3; ++d) x[d * n + f] = p[free_particles[f]][d];
    return x;
}

Points QPProblem::unpack(const Eigen::VectorXd& x) const {
    Points p(particle_count, Vec3::Zero());
    const auto n = free_count();
    for (std::size_t f = 0; f < n; ++f) p[free_particles[f]] = Vec3(x[f], x[n + f], x[2 * n + f]);
    for (const auto& [i, target] : root_targets) p[i] = target;
    return p;
}

double QPProblem::objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(P.selfadjointView<Eigen::Upper>() * x) + q.dot(x) + constant;
}

SparseMatrix residual_hessian(std::size_t n, std::span<const WeightedTerms> terms) {
    std::vector<Triplet> trips;
    for (const auto& [rows, scale] : terms) {
        if (scale == 0.0) continue;
        for (std::size_t r = 0; r < rows->rows(); ++r) {
            const auto cols = rows->row_columns(r);
            const auto c = rows->row_coefficients(r);
            const double w = scale * rows->weight(r);
            for (std::size_t a = 0; a < cols.size(); ++a)
                for (std::size_t b = 0; b < cols.size(); ++b) trips.emplace_back(cols[a], cols[b], w * c[a] * c[b]);
        }
    }
    SparseMatrix H(static_cast<int>(n), static_cast<int>(n));
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
}

QPProblem assemble_qp(std::size_t particle_count, std::span<const WeightedTerms> terms,
                      std::map<std::uint32_t, Vec3> root_targets, std::vector<HalfSpace> constraints) {
    QPProblem qp;
    qp.particle_count = particle_count;
    qp.root_targets = std::move(root_targets);
    qp.constraints = std::move(constraints);

    std::vector<std::int64_t> local(particle_count, -1);
    for (std::size_t i = 0; i < particle_count; ++i) {
        if (qp.root_targets.count(static_cast<std::uint32_t>(i))) continue;
        local[i] = static_cast<std::int64_t>(qp.free_particles.size());
        qp.free_particles.push_back(static_cast<std::uint32_t>(i));
    }
    for (const auto& h : qp.constraints) {
        if (local[h.particle] < 0) throw ValidationError("half-space row references an eliminated particle");
    }
    const auto n = static_cast<std::int64_t>(qp.free_particles.size());
    std::vector<Vec3> fixed(particle_count, Vec3::Zero());
    for (const auto& [i, t] : qp.root_targets) fixed[i] = t;

    std::vector<Triplet> trips;
    Eigen::MatrixXd lin = Eigen::MatrixXd::Zero(n, 3);
    double constant = 0.0;
    for (const auto& [rows, scale] : terms) {
        if (scale == 0.0) continue;
        for (std::size_t r = 0; r < rows->rows(); ++r) {
            const auto cols = rows->row_columns(r);
            const auto c = rows->row_coefficients(r);
            const double w = scale * rows->weight(r);
            if (w == 0.0) continue;
            const Vec3& t = rows->target(r);
            // residual = sum_free c x + (sum_fixed c r - t)
            Vec3 shift = -t;
            for (std::size_t a = 0; a < cols.size(); ++a)
                if (local[cols[a]] < 0) shift += c[a] * fixed[cols[a]];
            for (std::size_t a = 0; a < cols.size(); ++a) {
                const auto la = local[cols[a]];
                if (la < 0) continue;
                for (std::size_t b = 0; b < cols.size(); ++b) {
                    const auto lb = local[cols[b]];
                    if (lb < 0 || lb < la) continue;  // upper triangle only
                    trips.emplace_back(static_cast<int>(la), static_cast<int>(lb), 2.0 * w * c[a] * c[b]);
                }
                lin.row(la) += 2.0 * w * c[a] * shift.transpose();
            }
            constant += w * shift.squaredNorm();
        }
    }
    // Replicate the scalar block for x, y and z.
    std::vector<Triplet> full;
    full.reserve(3 * trips.size());
    for (int d = 0; d < 3; ++d) {
        const int off = static_cast<int>(d * n);
        for (const auto& tr : trips) full.emplace_back(tr.row() + off, tr.col() + off, tr.value());
    }
    qp.P.resize(static_cast<int>(3 * n), static_cast<int>(3 * n));
    qp.P.setFromTriplets(full.begin(), full.end());
    qp.q.resize(3 * n);
    for (int d = 0; d < 3; ++d) qp.q.segment(d * n, n) = lin.col(d);
    qp.constant = constant;
    return qp;
}

}  // namespace hairadapt
