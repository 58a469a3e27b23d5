#include "doctest.h"
#include "hairadapt/qp_solver.hpp"
#include "qp_oracle.hpp"

using namespace hairadapt;

namespace {

SparseMatrix sparse_upper(const Eigen::MatrixXd& m) {
    const SparseMatrix full = m.sparseView();
    return full.triangularView<Eigen::Upper>();
}

QpData as_intervals(const oracle::RandomQp& r) {
    QpData d;
    d.P = sparse_upper(r.P);
    d.q = r.q;
    d.A = r.G.sparseView();
    d.l = r.h;
    d.u = Eigen::VectorXd::Constant(r.h.size(), std::numeric_limits<double>::infinity());
    return d;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("identity quadratic recovers the target") {
    QpData d;
    d.P = sparse_upper(Eigen::MatrixXd::Identity(3, 3));
    const Eigen::Vector3d target(1.0, -2.0, 0.5);
    d.q = -target;
    d.A.resize(0, 3);
    d.l.resize(0);
    d.u.resize(0);
    const auto res = solve_qp(d, {});
    CHECK(res.converged);
    CHECK((res.x - target).norm() < 1e-9);
}

TEST_CASE("one-dimensional active bound") {
    QpData d;
    d.P = sparse_upper(Eigen::MatrixXd::Constant(1, 1, 2.0));
    d.q = Eigen::VectorXd::Constant(1, -2.0);
    d.A = sparse_upper(Eigen::MatrixXd::Identity(1, 1));
    d.l = Eigen::VectorXd::Constant(1, 2.0);
    d.u = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
    const auto res = solve_qp(d, {});
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("half-space block equals the interval form") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int groups = 1 + trial % 4;
        const int n = 3 * groups;
        auto r = oracle::random_qp(rng, n, 0);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(groups, n);
        Eigen::VectorXd h(groups);
        std::normal_distribution<double> N(0.0, 1.0);
        QpData d;
        d.P = sparse_upper(r.P);
        d.q = r.q;
        d.A = sparse_upper(Eigen::MatrixXd::Identity(n, n));
        d.l = Eigen::VectorXd::Constant(n, -1e300);
        d.u = Eigen::VectorXd::Constant(n, 1e300);
        const Eigen::VectorXd x_free = r.P.ldlt().solve(-r.q);
        for (int g = 0; g < groups; ++g) {
            Eigen::Vector3d nrm(N(rng), N(rng), N(rng));
            nrm.normalize();
            G.block(g, 3 * g, 1, 3) = nrm.transpose();
            h[g] = nrm.dot(x_free.segment<3>(3 * g)) + 0.3;
            d.blocks.push_back({{3 * g, 3 * g + 1, 3 * g + 2}, nrm, h[g]});
        }
        const auto expect = oracle::exhaustive_active_set(r.P, r.q, G, h);
        REQUIRE(expect);
        const auto res = solve_qp(d, {});
        CHECK(res.converged);
        CHECK((res.x - *expect).norm() < 1e-6);
        CHECK(res.max_violation < 1e-9);
    }
}

TEST_CASE("random QPs agree with the exhaustive active-set oracle") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> dn(1, 20), dm(0, 10);
    int worst_trial = -1;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto r = oracle::random_qp(rng, dn(rng), dm(rng));
        const auto expect = oracle::exhaustive_active_set(r.P, r.q, r.G, r.h);
        REQUIRE(expect);
        const auto res = solve_qp(as_intervals(r), {});
        const double err = (res.x - *expect).norm();
        if (err > worst) {
            worst = err;
            worst_trial = trial;
        }
    }
    INFO("worst trial " << worst_trial);
    CHECK(worst < 1e-6);
}

TEST_CASE("warm start at the optimum needs no iterations") {
    std::mt19937_64 rng(3);
    const auto r = oracle::random_qp(rng, 6, 0);
    QpData d = as_intervals(r);
    const Eigen::VectorXd x0 = r.P.ldlt().solve(-r.q);
    const auto res = solve_qp(d, {}, &x0);
    CHECK(res.converged);
    CHECK(res.iterations == 0);
}

TEST_CASE("projection onto a block lands on the plane") {
    QpData d;
    d.A = sparse_upper(Eigen::MatrixXd::Identity(3, 3));
    d.l = Eigen::VectorXd::Constant(3, -1e300);
    d.u = Eigen::VectorXd::Constant(3, 1e300);
    d.blocks.push_back({{0, 1, 2}, Eigen::Vector3d(0, 0, 1), 1.0});
    const Eigen::VectorXd p = project_onto_constraints(d, Eigen::Vector3d(2, 3, -1));
    CHECK((p - Eigen::Vector3d(2, 3, 1)).norm() < 1e-15);
}

}
