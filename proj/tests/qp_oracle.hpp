#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace oracle {

/// minimize 1/2 x'Px + q'x s.t. G x >= h, by trying every active set.
/// P must be positive definite so the minimizer is unique.
inline std::optional<Eigen::VectorXd> exhaustive_active_set(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                                                            const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                                            double tol = 1e-10) {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(G.rows());
    std::optional<Eigen::VectorXd> best;
    double best_obj = 0.0;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) act.push_back(i);
        const int a = static_cast<int>(act.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + a, n + a);
        Eigen::VectorXd rhs(n + a);
        K.topLeftCorner(n, n) = P;
        rhs.head(n) = -q;
        for (int j = 0; j < a; ++j) {
            K.block(n + j, 0, 1, n) = G.row(act[j]);
            K.block(0, n + j, n, 1) = -G.row(act[j]).transpose();
            rhs[n + j] = h[act[j]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        if (lu.rank() < n + a) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd x = sol.head(n);
        if (((G * x - h).array() < -tol).any()) continue;
        if ((sol.tail(a).array() < -tol).any()) continue;
        const double obj = 0.5 * x.dot(P * x) + q.dot(x);
        if (!best || obj < best_obj) {
            best = x;
            best_obj = obj;
        }
    }
    return best;
}

}  // namespace oracle

#include <random>

namespace oracle {

struct RandomQp {
    Eigen::MatrixXd P;
    Eigen::VectorXd q;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
};

/// Strictly convex QP with a nonempty feasible set; roughly half the
/// half-spaces pass through a point near the unconstrained minimizer.
inline RandomQp random_qp(std::mt19937_64& rng, int n, int m) {
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    RandomQp r;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = N(rng);
    r.P = M.transpose() * M / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
    r.q.resize(n);
    for (int i = 0; i < n; ++i) r.q[i] = N(rng);
    const Eigen::VectorXd x_free = r.P.ldlt().solve(-r.q);
    Eigen::VectorXd anchor = x_free;
    for (int i = 0; i < n; ++i) anchor[i] += 0.5 * N(rng);
    r.G.resize(m, n);
    r.h.resize(m);
    for (int k = 0; k < m; ++k) {
        for (int j = 0; j < n; ++j) r.G(k, j) = N(rng);
        r.G.row(k).normalize();
        r.h[k] = r.G.row(k).dot(anchor) - (U(rng) < 0.5 ? 0.0 : U(rng));
    }
    return r;
}

}  // namespace oracle
