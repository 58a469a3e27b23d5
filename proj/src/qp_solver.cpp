#include "hairadapt/qp_solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hairadapt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqScale = 1e3;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Symmetric positive definite (or quasi-definite) solve, sparse or dense.
class LinearSystem {
public:
    /// Returns true on success.
    bool factor(const SparseMatrix& upper, bool dense, bool reuse_pattern) {
        dense_ = dense;
        if (dense_) {
            const SparseMatrix full = upper.selfadjointView<Eigen::Upper>();
            const Eigen::MatrixXd K(full);
            ldlt_dense_.compute(K);
            return ldlt_dense_.info() == Eigen::Success;
        }
        const bool same = reuse_pattern && analyzed_ && same_pattern(upper);
        if (!same) {
            sparse_.analyzePattern(upper);
            outer_.assign(upper.outerIndexPtr(), upper.outerIndexPtr() + upper.outerSize() + 1);
            inner_.assign(upper.innerIndexPtr(), upper.innerIndexPtr() + upper.nonZeros());
            analyzed_ = true;
        }
        sparse_.factorize(upper);
        return sparse_.info() == Eigen::Success;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        return dense_ ? Eigen::VectorXd(ldlt_dense_.solve(b)) : Eigen::VectorXd(sparse_.solve(b));
    }

private:
    bool same_pattern(const SparseMatrix& m) const {
        if (static_cast<std::size_t>(m.outerSize() + 1) != outer_.size()) return false;
        if (static_cast<std::size_t>(m.nonZeros()) != inner_.size()) return false;
        return std::equal(outer_.begin(), outer_.end(), m.outerIndexPtr()) &&
               std::equal(inner_.begin(), inner_.end(), m.innerIndexPtr());
    }

    bool dense_ = false;
    bool analyzed_ = false;
    std::vector<int> outer_, inner_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper> sparse_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_dense_;
};

SparseMatrix upper_of(const SparseMatrix& m) { return SparseMatrix(m.triangularView<Eigen::Upper>()); }

SparseMatrix identity(int n, double value) {
    SparseMatrix I(n, n);
    I.setIdentity();
    return I * value;
}

struct Geometry {
    std::vector<int> block_of;  // row -> block index or -1
};

Geometry classify_rows(const QpData& d) {
    Geometry g;
    g.block_of.assign(d.A.rows(), -1);
    for (std::size_t b = 0; b < d.blocks.size(); ++b) {
        for (int r : d.blocks[b].rows) g.block_of[r] = static_cast<int>(b);
    }
    return g;
}

}  // namespace

struct KktCache::Impl {
    LinearSystem admm;
};

KktCache::KktCache() : impl_(std::make_unique<Impl>()) {}
KktCache::~KktCache() = default;
KktCache::KktCache(KktCache&&) noexcept = default;
KktCache& KktCache::operator=(KktCache&&) noexcept = default;

Eigen::VectorXd project_onto_constraints(const QpData& d, const Eigen::VectorXd& v) {
    Eigen::VectorXd out = v;
    std::vector<char> in_block(v.size(), 0);
    for (const auto& blk : d.blocks) {
        double s = -blk.offset;
        for (std::size_t k = 0; k < blk.rows.size(); ++k) s += blk.normal[k] * v[blk.rows[k]];
        if (s < 0.0) {
            const double nn = blk.normal.squaredNorm();
            for (std::size_t k = 0; k < blk.rows.size(); ++k) out[blk.rows[k]] -= s * blk.normal[k] / nn;
        }
        for (int r : blk.rows) in_block[r] = 1;
    }
    for (Eigen::Index r = 0; r < v.size(); ++r) {
        if (!in_block[r]) out[r] = std::clamp(v[r], d.l[r], d.u[r]);
    }
    return out;
}

namespace {

struct PolishOutcome {
    Eigen::VectorXd x, y;
    bool ok = false;
};

PolishOutcome polish(const QpData& d, const Geometry& geo, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                     const QpSettings& s) {
    const int n = static_cast<int>(d.P.rows());
    const int m = static_cast<int>(d.A.rows());
    const SparseMatrix At = d.A.transpose();  // column r of At is row r of A

    // Every one-sided constraint a.x >= b (Lower, Block), a.x <= b (Upper)
    // or a.x = b (Equal); multipliers follow the sign convention of y.
    enum class Kind { Lower, Upper, Equal, Block };
    struct Unit {
        Eigen::SparseVector<double> row;
        double rhs;
        Kind kind;
        int index;  // interval row or block index
        bool active;
    };
    std::vector<Unit> units;
    for (int r = 0; r < m; ++r) {
        if (geo.block_of[r] >= 0) continue;
        const bool has_l = d.l[r] > -kInf, has_u = d.u[r] < kInf;
        if (has_l && has_u && d.l[r] == d.u[r]) {
            units.push_back({At.col(r), d.l[r], Kind::Equal, r, true});
            continue;
        }
        if (has_l) units.push_back({At.col(r), d.l[r], Kind::Lower, r, z[r] - d.l[r] < -y[r]});
        if (has_u) units.push_back({At.col(r), d.u[r], Kind::Upper, r, d.u[r] - z[r] < y[r]});
    }
    for (std::size_t b = 0; b < d.blocks.size(); ++b) {
        const auto& blk = d.blocks[b];
        double slack = -blk.offset, lambda = 0.0;
        Eigen::SparseVector<double> row(n);
        for (std::size_t k = 0; k < blk.rows.size(); ++k) {
            slack += blk.normal[k] * z[blk.rows[k]];
            lambda -= blk.normal[k] * y[blk.rows[k]];
            row += blk.normal[k] * Eigen::SparseVector<double>(At.col(blk.rows[k]));
        }
        units.push_back({row, blk.offset, Kind::Block, static_cast<int>(b), slack < lambda});
    }

    std::vector<Triplet> p_upper;
    for (int c = 0; c < n; ++c)
        for (SparseMatrix::InnerIterator it(d.P, c); it; ++it)
            if (it.row() <= it.col()) p_upper.emplace_back(it.row(), it.col(), it.value());

    const double delta = 1e-9;
    const double rhs_scale = std::max(1.0, inf_norm(d.q));
    PolishOutcome out;
    for (int round = 0; round < 10; ++round) {
        std::vector<int> act;
        for (int u = 0; u < static_cast<int>(units.size()); ++u)
            if (units[u].active) act.push_back(u);
        const int na = static_cast<int>(act.size());
        std::vector<Triplet> trips = p_upper, exact = p_upper;
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
        for (int a = 0; a < na; ++a) {
            for (Eigen::SparseVector<double>::InnerIterator it(units[act[a]].row); it; ++it) {
                trips.emplace_back(static_cast<int>(it.index()), n + a, it.value());
                exact.emplace_back(static_cast<int>(it.index()), n + a, it.value());
            }
            trips.emplace_back(n + a, n + a, -delta);
        }
        SparseMatrix K(n + na, n + na), K0(n + na, n + na);
        K.setFromTriplets(trips.begin(), trips.end());
        K0.setFromTriplets(exact.begin(), exact.end());

        Eigen::VectorXd rhs(n + na);
        rhs.head(n) = -d.q;
        for (int a = 0; a < na; ++a) rhs[n + a] = units[act[a]].rhs;

        LinearSystem sys;
        if (!sys.factor(K, n + na < s.dense_threshold, false)) return out;
        Eigen::VectorXd sol = sys.solve(rhs);
        for (int it = 0; it < 5; ++it) {
            const Eigen::VectorXd res = rhs - K0.selfadjointView<Eigen::Upper>() * sol;
            sol += sys.solve(res);
        }
        if (!sol.allFinite()) return out;

        const Eigen::VectorXd x = sol.head(n);
        const double mult_tol = 1e-9 * std::max(rhs_scale, inf_norm(sol.tail(na)));
        const double feas_tol = 1e-9 * std::max(1.0, inf_norm(rhs.tail(na)));
        bool changed = false;
        for (int a = 0; a < na; ++a) {
            Unit& unit = units[act[a]];
            const double mult = sol[n + a];
            const bool wrong = (unit.kind == Kind::Upper) ? mult < -mult_tol
                                                            : unit.kind != Kind::Equal && mult > mult_tol;
            if (wrong) {
                unit.active = false;
                changed = true;
            }
        }
        for (auto& unit : units) {
            if (unit.active || unit.kind == Kind::Equal) continue;
            const double ax = unit.row.dot(x);
            const bool violated = unit.kind == Kind::Upper ? ax > unit.rhs + feas_tol : ax < unit.rhs - feas_tol;
            if (violated) {
                unit.active = true;
                changed = true;
            }
        }
        if (changed) continue;

        out.x = x;
        out.y = Eigen::VectorXd::Zero(m);
        for (int a = 0; a < na; ++a) {
            const Unit& unit = units[act[a]];
            const double mult = sol[n + a];
            if (unit.kind == Kind::Block) {
                const auto& blk = d.blocks[unit.index];
                for (std::size_t k = 0; k < blk.rows.size(); ++k) out.y[blk.rows[k]] += mult * blk.normal[k];
            } else {
                out.y[unit.index] += mult;
            }
        }
        out.ok = true;
        return out;
    }
    return out;
}

}  // namespace

QpResult solve_qp(const QpData& d, const QpSettings& s, const Eigen::VectorXd* x0, const Eigen::VectorXd* y0,
                  KktCache* cache) {
    const int n = static_cast<int>(d.P.rows());
    const int m = static_cast<int>(d.A.rows());
    if (d.P.cols() != n || d.q.size() != n || d.A.cols() != n || d.l.size() != m || d.u.size() != m)
        throw std::invalid_argument("solve_qp: inconsistent dimensions");
    const Geometry geo = classify_rows(d);
    const bool dense = n < s.dense_threshold;

    KktCache local_cache;
    LinearSystem& sys = (cache ? *cache : local_cache).impl().admm;

    const SparseMatrix At = d.A.transpose();
    const SparseMatrix Pu = upper_of(d.P);
    auto P_times = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Pu.selfadjointView<Eigen::Upper>() * v; };

    Eigen::VectorXd rho_vec(m);
    double rho = std::clamp(s.rho, kRhoMin, kRhoMax);
    auto set_rho = [&](double value) {
        rho = value;
        for (int r = 0; r < m; ++r) {
            if (geo.block_of[r] >= 0) rho_vec[r] = rho;
            else if (d.l[r] == -kInf && d.u[r] == kInf) rho_vec[r] = kRhoMin;
            else if (d.l[r] == d.u[r]) rho_vec[r] = kRhoEqScale * rho;
            else rho_vec[r] = rho;
        }
    };
    set_rho(rho);

    QpResult res;
    auto refactor = [&](bool reuse) {
        SparseMatrix K = Pu + upper_of(SparseMatrix(At * rho_vec.asDiagonal() * d.A)) + identity(n, s.sigma);
        K.makeCompressed();
        if (!sys.factor(K, dense, reuse)) throw std::runtime_error("solve_qp: KKT factorization failed");
        ++res.factorizations;
    };
    refactor(true);

    Eigen::VectorXd x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = y0 && y0->size() == m ? *y0 : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd z = project_onto_constraints(d, d.A * x);

    double prim = 0.0, dual = 0.0, eps_prim = 0.0, eps_dual = 0.0;
    double ax_norm = 0.0, z_norm = 0.0, px_norm = 0.0, aty_norm = 0.0;
    const double q_norm = inf_norm(d.q);
    auto residuals = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& zv, const Eigen::VectorXd& yv) {
        const Eigen::VectorXd Ax = d.A * xv;
        const Eigen::VectorXd Px = P_times(xv);
        const Eigen::VectorXd Aty = At * yv;
        ax_norm = inf_norm(Ax);
        z_norm = inf_norm(zv);
        px_norm = inf_norm(Px);
        aty_norm = inf_norm(Aty);
        prim = m ? inf_norm(Ax - zv) : 0.0;
        dual = inf_norm(Px + d.q + Aty);
        eps_prim = s.eps_primal + s.eps_rel * std::max(ax_norm, z_norm);
        eps_dual = s.eps_dual + s.eps_rel * std::max({px_norm, aty_norm, q_norm});
    };

    residuals(x, z, y);
    bool converged = prim <= eps_prim && dual <= eps_dual;
    int iter = 0;
    while (!converged && iter < s.max_iter) {
        ++iter;
        const Eigen::VectorXd rhs = s.sigma * x - d.q + At * (rho_vec.cwiseProduct(z) - y);
        const Eigen::VectorXd x_tilde = sys.solve(rhs);
        const Eigen::VectorXd z_tilde = d.A * x_tilde;
        const Eigen::VectorXd x_next = s.alpha * x_tilde + (1.0 - s.alpha) * x;
        const Eigen::VectorXd z_relax = s.alpha * z_tilde + (1.0 - s.alpha) * z;
        const Eigen::VectorXd z_next = project_onto_constraints(d, z_relax + y.cwiseQuotient(rho_vec));
        y += rho_vec.cwiseProduct(z_relax - z_next);
        x = x_next;
        z = z_next;

        residuals(x, z, y);
        converged = prim <= eps_prim && dual <= eps_dual;
        if (converged) break;

        if (s.adaptive_rho && iter % s.adaptive_rho_interval == 0 && m > 0) {
            const double prim_rel = prim / std::max({ax_norm, z_norm, 1e-30});
            const double dual_rel = dual / std::max({px_norm, aty_norm, q_norm, 1e-30});
            const double candidate = std::clamp(rho * std::sqrt(prim_rel / std::max(dual_rel, 1e-30)), kRhoMin, kRhoMax);
            if (candidate > rho * s.adaptive_rho_tolerance || candidate < rho / s.adaptive_rho_tolerance) {
                set_rho(candidate);
                refactor(true);
            }
        }
    }

    res.iterations = iter;
    res.converged = converged;
    res.x = x;
    res.y = y;
    res.z = z;
    res.primal_residual = prim;
    res.dual_residual = dual;

    if (s.polish) {
        const auto pol = polish(d, geo, z, y, s);
        if (pol.ok) {
            const Eigen::VectorXd zp = project_onto_constraints(d, d.A * pol.x);
            const double prim_before = prim, dual_before = dual;
            const double eps_p = eps_prim, eps_d = eps_dual;
            residuals(pol.x, zp, pol.y);
            if (prim <= std::max(prim_before, eps_p) && dual <= std::max(dual_before, eps_d)) {
                res.x = pol.x;
                res.y = pol.y;
                res.z = zp;
                res.polished = true;
                res.primal_residual = prim;
                res.dual_residual = dual;
                res.converged = prim <= eps_prim && dual <= eps_dual;
            } else {
                prim = prim_before;
                dual = dual_before;
            }
        }
    }

    const Eigen::VectorXd Ax = d.A * res.x;
    res.max_violation = m ? inf_norm(Ax - project_onto_constraints(d, Ax)) : 0.0;
    res.objective = 0.5 * res.x.dot(P_times(res.x)) + d.q.dot(res.x);
    return res;
}

QpData to_qp_data(const QPProblem& problem) {
    QpData d;
    const int n = static_cast<int>(problem.free_count());
    d.P = problem.P;
    d.q = problem.q;
    d.A = identity(3 * n, 1.0);
    d.l = Eigen::VectorXd::Constant(3 * n, -kInf);
    d.u = Eigen::VectorXd::Constant(3 * n, kInf);

    std::vector<int> local(problem.particle_count, -1);
    for (int f = 0; f < n; ++f) local[problem.free_particles[f]] = f;
    d.blocks.reserve(problem.constraints.size());
    for (const auto& h : problem.constraints) {
        const int f = local[h.particle];
        HalfSpaceBlock blk;
        blk.rows = {f, n + f, 2 * n + f};
        blk.normal = Eigen::Vector3d(h.normal);
        blk.offset = h.offset;
        d.blocks.push_back(std::move(blk));
    }
    return d;
}

}  // namespace hairadapt
