#pragma once

#include "hairadapt/energies.hpp"

#include <Eigen/Dense>

#include <memory>

namespace hairadapt {

/// Rows of A whose stacked value w must satisfy normal . w >= offset.
/// Rows listed in a block ignore their l/u bounds.
struct HalfSpaceBlock {
    std::vector<int> rows;
    Eigen::VectorXd normal;
    double offset = 0.0;
};

/// minimize 1/2 x'Px + q'x  subject to  A x in C, where C is the product of
/// the intervals [l, u] (rows outside blocks) and the half-space blocks.
/// Only the upper triangle of P is read.
struct QpData {
    SparseMatrix P;
    Eigen::VectorXd q;
    SparseMatrix A;
    Eigen::VectorXd l, u;
    std::vector<HalfSpaceBlock> blocks;
};

struct QpSettings {
    double eps_primal = 1e-6;
    double eps_dual = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 4000;
    double rho = 1.0;
    double sigma = 1e-6;
    double alpha = 1.6;
    bool adaptive_rho = true;
    int adaptive_rho_interval = 25;
    double adaptive_rho_tolerance = 5.0;
    bool polish = true;
    /// Systems with fewer unknowns use dense factorizations.
    int dense_threshold = 512;
};

struct QpResult {
    Eigen::VectorXd x, y, z;
    bool converged = false;
    bool polished = false;
    int iterations = 0;
    int factorizations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    /// Largest distance of A x from the constraint set.
    double max_violation = 0.0;
    double objective = 0.0;
};

/// Reusable symbolic analysis for the ADMM linear system. Passing the same
/// cache to consecutive solves with an unchanged sparsity pattern skips the
/// ordering step.
class KktCache {
public:
    KktCache();
    ~KktCache();
    KktCache(KktCache&&) noexcept;
    KktCache& operator=(KktCache&&) noexcept;

    struct Impl;
    Impl& impl() { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

/// Operator-splitting (ADMM) QP solver with adaptive penalty and an optional
/// active-set polishing step. `x0`/`y0` warm-start the iteration.
QpResult solve_qp(const QpData& data, const QpSettings& settings, const Eigen::VectorXd* x0 = nullptr,
                  const Eigen::VectorXd* y0 = nullptr, KktCache* cache = nullptr);

/// Convert an assembled adaptation problem (free particles, one half-space
/// block per constrained particle) into solver form.
QpData to_qp_data(const QPProblem& problem);

/// Euclidean projection of v onto the constraint set.
Eigen::VectorXd project_onto_constraints(const QpData& data, const Eigen::VectorXd& v);

}  // namespace hairadapt
