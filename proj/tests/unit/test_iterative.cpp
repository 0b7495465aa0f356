#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "stwave/iterative.hpp"

using namespace stwave;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd A(r, c);
    for (Eigen::Index k = 0; k < A.size(); ++k)
        A.data()[k] = g(rng);
    return A;
}

struct Wave {
    TimeMatrices tm;
    SpaceMatrices sm;
    SpaceTimeMatrices mats;
    KronOperator op;
    Eigen::MatrixXd G;
};

Wave wave(int nt, int nh, int dim = 1)
{
    const WaveProblem pb = make_case1(dim);
    Wave w{assemble_time_matrices(pb.T, nt), assemble_space_matrices(pb, nh), {}, {}, {}};
    w.mats = collect_matrices(w.tm, w.sm);
    w.op = build_stiffness(StiffnessFlavor::optimal, w.tm, w.sm);
    w.G = assemble_rhs(pb, w.tm, w.sm).dense();
    return w;
}

// K^T M^{-1} K with K = N_t^T (x) M_h + M_t (x) N_h.
Eigen::MatrixXd dense_kmk(const Wave& w)
{
    const Eigen::MatrixXd Mh(w.sm.M), Nh(w.sm.N);
    const Eigen::MatrixXd K = Eigen::kroneckerProduct(Eigen::MatrixXd(w.tm.N.transpose()), Mh).eval() +
                              Eigen::kroneckerProduct(w.tm.M, Nh).eval();
    const Eigen::MatrixXd M = Eigen::kroneckerProduct(w.tm.M, Mh);
    return K.transpose() * M.llt().solve(K);
}

}  // namespace

TEST(TruncateRank, RankOneExact)
{
    const Eigen::MatrixXd X = random_matrix(20, 1, 1) * random_matrix(1, 7, 2);
    EXPECT_LT((truncate_rank(X, 4).dense() - X).norm(), 1e-12 * X.norm());
}

TEST(TruncateRank, FullRankRetained)
{
    const Eigen::MatrixXd X = random_matrix(50, 8, 3);
    EXPECT_LT((truncate_rank(X, 8).dense() - X).norm(), 1e-12 * X.norm());
}

TEST(TruncateRank, ErrorIsSingularValueTail)
{
    const Eigen::MatrixXd X = random_matrix(30, 10, 4);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues();
    for (int r = 1; r <= 9; ++r)
        EXPECT_NEAR((truncate_rank(X, r).dense() - X).norm(), sv.tail(10 - r).norm(), 1e-10);
}

TEST(TruncateRank, FactoredInputMatchesDense)
{
    const LowRankMatrix F{random_matrix(40, 6, 5), random_matrix(9, 6, 6)};
    const Eigen::MatrixXd a = truncate_rank(F, 3).dense(), b = truncate_rank(F.dense(), 3).dense();
    EXPECT_LT((a - b).norm(), 1e-10 * b.norm());
    EXPECT_THROW(truncate_rank(F, 0), std::invalid_argument);
}

TEST(BackwardError, MatchesRawFactors)
{
    const auto w = wave(6, 10);
    const Eigen::MatrixXd U = random_matrix(10, 6, 7);
    const Eigen::MatrixXd R = w.G - w.op.apply(U);
    const double scale = Eigen::MatrixXd(w.sm.M).norm() * w.tm.Q.norm() +
                         Eigen::MatrixXd(w.sm.Q).norm() * w.tm.M.norm() +
                         2.0 * Eigen::MatrixXd(w.sm.N).norm() * w.tm.N.norm();
    const double ref = R.norm() / (w.G.norm() + U.norm() * scale);
    EXPECT_NEAR(backward_error(R.norm(), w.G.norm(), U.norm(), operator_scale(w.op)), ref, 1e-12 * ref);
}

TEST(Pcg, IdentityOperatorOneIteration)
{
    KronOperator op;
    SparseMatrix I(6, 6);
    I.setIdentity();
    op.terms.push_back({Eigen::MatrixXd::Identity(4, 4), I});
    const Eigen::MatrixXd G = random_matrix(6, 4, 8);
    const SolveReport rep = matrix_pcg(op, G, {});
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    EXPECT_LT((rep.U - G).norm(), 1e-14);
}

TEST(Pcg, UnpreconditionedMatchesDenseOracle)
{
    const auto w = wave(8, 16);
    PcgConfig cfg;
    cfg.tolerance = 1e-9;  // forward agreement needs more than backward error 1e-5
    const SolveReport rep = matrix_pcg(w.op, w.G, cfg);
    ASSERT_TRUE(rep.converged) << rep.message;
    const Eigen::MatrixXd U = dense_kron_solve(w.op, w.G);
    EXPECT_LT((rep.U - U).norm() / U.norm(), 1e-4);
    for (double e : rep.backward_errors)
        EXPECT_TRUE(std::isfinite(e));
    EXPECT_LE(rep.backward_errors.back(), cfg.tolerance);
    EXPECT_EQ(rep.backward_errors.size(), static_cast<std::size_t>(rep.iterations));
}

TEST(Pcg, EnergyErrorIsMonotone)
{
    const auto w = wave(6, 12);
    const Eigen::MatrixXd U = dense_kron_solve(w.op, w.G);
    std::vector<double> energy;
    PcgConfig cfg;
    cfg.tolerance = 1e-12;
    cfg.max_iterations = 60;
    cfg.on_iterate = [&](int, const Eigen::MatrixXd& X) {
        const Eigen::MatrixXd E = X - U;
        energy.push_back((E.array() * w.op.apply(E).array()).sum());
    };
    matrix_pcg(w.op, w.G, cfg);
    ASSERT_GT(energy.size(), 5u);
    for (std::size_t k = 1; k < energy.size(); ++k)
        EXPECT_LE(energy[k], energy[k - 1] + 1e-12 * energy.front());
}

TEST(Pcg, PreconditionedRunsAgreeWithUnpreconditioned)
{
    const auto w = wave(8, 24);
    PcgConfig cfg;
    cfg.tolerance = 1e-7;
    const double scale = operator_scale(w.op);
    const SolveReport plain = matrix_pcg(w.op, w.G, cfg);
    ASSERT_TRUE(plain.converged);
    for (const auto kind : {PreconditionerKind::sylvester, PreconditionerKind::kmk}) {
        const auto P = make_preconditioner(kind, w.mats, cfg);
        const SolveReport rep = matrix_pcg(w.op, w.G, cfg, P.get());
        ASSERT_TRUE(rep.converged) << to_string(kind) << ": " << rep.message;
        EXPECT_EQ(P->fallbacks(), 0);
        // agreement measured in the backward-error metric
        const Eigen::MatrixXd D = w.op.apply(rep.U - plain.U);
        EXPECT_LE(D.norm() / (w.G.norm() + plain.U.norm() * scale), 10 * cfg.tolerance);
        EXPECT_LT((rep.U - plain.U).norm() / plain.U.norm(), 1e-3);
    }
}

TEST(Pcg, MaxIterationsReportsHistory)
{
    const auto w = wave(6, 12);
    PcgConfig cfg;
    cfg.max_iterations = 3;
    cfg.tolerance = 1e-14;
    const SolveReport rep = matrix_pcg(w.op, w.G, cfg);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 3);
    EXPECT_EQ(rep.backward_errors.size(), 3u);
    EXPECT_FALSE(rep.message.empty());
}

TEST(Pcg, BreakdownOnIndefiniteOperator)
{
    KronOperator op;
    SparseMatrix I(3, 3);
    I.setIdentity();
    op.terms.push_back({-Eigen::MatrixXd::Identity(2, 2), I});
    const SolveReport rep = matrix_pcg(op, random_matrix(3, 2, 9), {});
    EXPECT_FALSE(rep.converged);
    EXPECT_NE(rep.message.find("breakdown at iteration 1"), std::string::npos);
}

TEST(Pcg, ZeroRhs)
{
    const auto w = wave(4, 8);
    const SolveReport rep = matrix_pcg(w.op, Eigen::MatrixXd::Zero(8, 4), {});
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 0);
}

TEST(PcgConfig, Validation)
{
    PcgConfig c;
    c.tolerance = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.truncation_rank = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_EQ(parse_preconditioner("sylv"), PreconditionerKind::sylvester);
    EXPECT_THROW(parse_preconditioner("ilu"), std::invalid_argument);
}

TEST(SylvesterPrecond, DirectResidual)
{
    const auto w = wave(6, 16);
    const SylvesterPreconditioner P(w.mats, {});
    ASSERT_FALSE(P.projected());
    Eigen::VectorXd scale(6);
    scale << 1, 2, 3, 4, 5, 6;
    const Eigen::MatrixXd R = Eigen::MatrixXd(w.sm.M).leftCols(6) * scale.asDiagonal();
    const Eigen::MatrixXd Z = P.apply(R);
    const Eigen::MatrixXd res = Eigen::MatrixXd(w.sm.M) * Z * w.tm.Q.transpose() + Eigen::MatrixXd(w.sm.Q) * Z * w.tm.M - R;
    EXPECT_LT(res.norm() / R.norm(), 1e-10);
    EXPECT_EQ(P.apply(Eigen::MatrixXd::Zero(16, 6)).norm(), 0.0);
}

TEST(SylvesterPrecond, ProjectedRankOne)
{
    const auto w = wave(6, 160);
    PcgConfig cfg;
    cfg.large_space_threshold = 100;
    const SylvesterPreconditioner P(w.mats, cfg);
    ASSERT_TRUE(P.projected());
    const Eigen::MatrixXd R = w.G;  // rank one
    const Eigen::MatrixXd Z = P.apply(R);
    EXPECT_EQ(P.fallbacks(), 0);
    const Eigen::MatrixXd res = w.sm.M * Z * w.tm.Q.transpose() + w.sm.Q * Z * w.tm.M - R;
    EXPECT_LT(res.norm() / R.norm(), 1e-6);
    EXPECT_EQ(P.apply(Eigen::MatrixXd::Zero(160, 6)).norm(), 0.0);
}

TEST(SylvesterPrecond, InnerFailureFallsBackToIdentity)
{
    const auto w = wave(6, 160);
    PcgConfig cfg;
    cfg.large_space_threshold = 100;
    cfg.inner_max_dim = 1;
    const SylvesterPreconditioner P(w.mats, cfg);
    const Eigen::MatrixXd R = random_matrix(160, 6, 10);
    EXPECT_LT((P.apply(R) - R).norm(), 1e-15);
    EXPECT_EQ(P.fallbacks(), 1);
    EXPECT_TRUE(P.degraded());
}

TEST(KmkPrecond, MatchesDenseInverse)
{
    const auto w = wave(4, 6);
    const KmkPreconditioner P(w.mats, {});
    const Eigen::MatrixXd R = random_matrix(6, 4, 11);
    const Eigen::VectorXd z = dense_kmk(w).llt().solve(R.reshaped());
    const Eigen::MatrixXd Z = P.apply(R);
    EXPECT_LT((Z.reshaped() - z).norm() / z.norm(), 1e-8);
    EXPECT_EQ(P.apply(Eigen::MatrixXd::Zero(6, 4)).norm(), 0.0);
}

TEST(KmkPrecond, InverseRoundTrip)
{
    const auto w = wave(4, 8);
    const KmkPreconditioner P(w.mats, {});
    const Eigen::MatrixXd Z0 = random_matrix(8, 4, 12);
    const Eigen::VectorXd r = dense_kmk(w) * Z0.reshaped();
    const Eigen::MatrixXd Z = P.apply(r.reshaped(8, 4));
    EXPECT_LT((Z - Z0).norm() / Z0.norm(), 1e-8);
}

TEST(KmkPrecond, BoundedByStiffness)
{
    // K^T M^{-1} K is the projected part of B, so eig(B, KMK) >= 1.
    const auto w = wave(6, 10);
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(w.op.dense(), dense_kmk(w));
    EXPECT_GT(ges.eigenvalues().minCoeff(), 1.0 - 1e-8);
}

TEST(KmkPrecond, ProjectedPathApproximatesDirect)
{
    const auto w = wave(6, 160);
    PcgConfig cfg;
    const KmkPreconditioner direct(w.mats, cfg);
    cfg.large_space_threshold = 100;
    const KmkPreconditioner proj(w.mats, cfg);
    ASSERT_TRUE(proj.projected());
    const Eigen::MatrixXd R = w.G;  // rank one: no truncation loss on the first equation
    const Eigen::MatrixXd a = direct.apply(R), b = proj.apply(R);
    EXPECT_EQ(proj.fallbacks(), 0);
    EXPECT_LT((a - b).norm() / a.norm(), 1e-3);
}
