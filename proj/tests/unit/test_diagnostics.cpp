#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stwave/diagnostics.hpp"
#include "stwave/mateq_direct.hpp"

using namespace stwave;

namespace {

// Extreme eigenvalues of an SPD matrix by power and inverse power iteration.
std::pair<double, double> power_extremes(const Eigen::MatrixXd& A)
{
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows()), y = x;
    for (int k = 0; k < 1 + (A.rows() == 1 ? 0 : 20000); ++k) {
        x = (A * x).normalized();
        y = llt.solve(y).normalized();
    }
    return {y.dot(A * y), x.dot(A * x)};
}

// sigma_max / sigma_min of a square matrix, inverse iteration through LU.
double power_condition(const Eigen::MatrixXd& A)
{
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows()), y = x;
    for (int k = 0; k < 20000; ++k) {
        x = (A.transpose() * (A * x)).normalized();
        y = lu.solve(lu.transpose().solve(y)).normalized();
    }
    return (A * x).norm() / (A * y).norm();
}

WaveProblem unit1d()
{
    WaveProblem p;
    p.dim = 1;
    return p;
}

}  // namespace

TEST(InfSup, IdentityIsOne)
{
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
    EXPECT_NEAR(infsup_constant(I, I, I), 1.0, 1e-14);
}

TEST(InfSup, OptimalPairingIsOne)
{
    for (int n : {4, 8}) {
        const double beta = optimal_infsup(assemble_time_matrices(1.0, n), assemble_space_matrices(make_case1(1), n));
        EXPECT_NEAR(beta, 1.0, 1e-8);
    }
}

TEST(InfSup, ScaledIdentityPencil)
{
    // B = 2 G with G_U = G_V = G gives beta = 2
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 6);
    const Eigen::MatrixXd G = X * X.transpose() + 6.0 * Eigen::MatrixXd::Identity(6, 6);
    EXPECT_NEAR(infsup_constant(2.0 * G, G, G), 2.0, 1e-12);
}

TEST(InfSup, InvariantUnderTestScaling)
{
    // 1/3 pairing matrices, rebuilt by hand from the Grams
    const int n = 12;
    const SplineBasis test = make_uniform_basis(0.0, 1.0, n, 2, BoundaryCondition::terminal_h2);
    const SplineBasis trial = make_uniform_basis(0.0, 1.0, n, 0, BoundaryCondition::none);
    const Eigen::MatrixXd B = -assemble_gram_1d(test, trial).N;
    const Eigen::MatrixXd GU = assemble_gram_1d(trial, trial).M;
    const Eigen::MatrixXd GV = assemble_gram_1d(test, test).Q;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i)
        d[i] = u(rng);
    const double b0 = infsup_constant(B, GU, GV);
    const double b1 = infsup_constant(d.asDiagonal() * B, GU, d.asDiagonal() * GV * d.asDiagonal());
    EXPECT_NEAR(b0, b1, 1e-10);
}

TEST(InfSup, SingularGramSignalled)
{
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd S = I;
    S(2, 2) = 0.0;
    EXPECT_THROW(infsup_constant(I, S, I), NumericalError);
    EXPECT_THROW(infsup_constant(I, I, Eigen::MatrixXd::Identity(4, 4)), std::invalid_argument);
}

TEST(Condition, OneByOne)
{
    EXPECT_EQ(condition_number(Eigen::MatrixXd::Constant(1, 1, -3.0)), 1.0);
    EXPECT_TRUE(std::isinf(condition_number(Eigen::MatrixXd::Zero(2, 2))));
}

TEST(Condition, PowerIterationCrossCheck)
{
    const int n = 8;
    const TimeMatrices tm = assemble_time_matrices(1.0, n);
    const SpaceMatrices sm = assemble_space_matrices(unit1d(), n);
    for (const Eigen::MatrixXd& A :
         {Eigen::MatrixXd(sm.M), Eigen::MatrixXd(sm.N), Eigen::MatrixXd(sm.Q), tm.M, tm.Q}) {
        const auto [lo, hi] = power_extremes(A);
        EXPECT_NEAR(condition_number(A), hi / lo, 1e-6 * hi / lo);
    }
    EXPECT_NEAR(condition_number(tm.N), power_condition(tm.N), 1e-6 * power_condition(tm.N));
}

TEST(Condition, Slopes)
{
    const StudyResult r = condition_numbers({8, 16, 32, 64});
    EXPECT_NEAR(r.slope_in_h("kappa_Mh"), 0.0, 0.3);
    EXPECT_NEAR(r.slope_in_h("kappa_Mt"), 0.0, 0.3);
    EXPECT_NEAR(r.slope_in_h("kappa_Nh"), -2.0, 0.3);
    EXPECT_NEAR(r.slope_in_h("kappa_Qh"), -4.0, 0.4);
    EXPECT_NEAR(r.slope_in_h("kappa_Qt"), -4.0, 0.4);
    EXPECT_EQ(r.values("kappa_B").size(), 3u);  // 64 x 64 exceeds the stiffness cap
    for (const StudyRow& row : r.rows)
        EXPECT_TRUE(std::isfinite(row.value));
    EXPECT_THROW(condition_numbers({8, 8}), std::invalid_argument);
}

TEST(Slope, PowerLaw)
{
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0}, y{3.0, 12.0, 48.0, 192.0};
    EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
    EXPECT_THROW(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Equivalence, IdentityRatios)
{
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
    const EquivalenceRatio r = spectral_equivalence_ratio(I, I, I);
    EXPECT_NEAR(r.min, 1.0, 1e-14);
    EXPECT_NEAR(r.max, 1.0, 1e-14);
}

TEST(Equivalence, MatchesGeneralizedEigensolver)
{
    const SpaceMatrices sm = assemble_space_matrices(unit1d(), 16);
    const Eigen::MatrixXd M(sm.M), N(sm.N), Q(sm.Q);
    const Eigen::MatrixXd A = N.transpose() * M.llt().solve(N);
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, Q);
    const EquivalenceRatio r = spectral_equivalence_ratio(Q, N, M);
    EXPECT_NEAR(r.min, ges.eigenvalues().minCoeff(), 1e-6 * r.min);
    EXPECT_NEAR(r.max, ges.eigenvalues().maxCoeff(), 1e-6 * r.max);
}

TEST(Equivalence, SpaceBoundedTimeDegenerates)
{
    const StudyResult r = equivalence_study({8, 16, 32});
    const auto s = r.values("space_min"), t = r.values("time_min");
    EXPECT_LT(*std::max_element(s.begin(), s.end()) / *std::min_element(s.begin(), s.end()), 2.0);
    EXPECT_GT(s.front(), 0.1);
    EXPECT_GT(t[0], t[1]);
    EXPECT_GT(t[1], t[2]);
    for (double v : r.values("space_max"))
        EXPECT_LE(v, 1.0 + 1e-10);  // N M^{-1} N <= Q on the spatial side
}

TEST(Ode, OptimalAndStandardLowOrderCoincide)
{
    for (OdeKind kind : {OdeKind::bvp, OdeKind::ivp})
        for (int n : {8, 16, 32}) {
            const OdeData data = ode_manufactured(kind);
            const OdeSolution a = ode1d_solve(kind, OdePairing::optimal_1_3, n, data);
            const OdeSolution b = ode1d_solve(kind, OdePairing::p1_3, n, data);
            for (int i = 0; i < 200; ++i) {
                const double x = (i + 0.5) / 200.0;
                EXPECT_NEAR(a.evaluate(x), b.evaluate(x), 1e-10);
            }
        }
}

TEST(Ode, BetaIsOneForAllPairings)
{
    for (OdeKind kind : {OdeKind::bvp, OdeKind::ivp})
        for (OdePairing p : {OdePairing::optimal_1_3, OdePairing::p1_3, OdePairing::p2_4}) {
            const StudyResult r = ode1d_study(kind, p, {4, 8, 16, 32}, ode_manufactured(kind));
            for (double beta : r.values("beta"))
                EXPECT_NEAR(beta, 1.0, 1e-8) << to_string(kind) << " " << to_string(p);
        }
}

TEST(Ode, HigherOrderPairingConvergesFaster)
{
    const OdeKind kind = OdeKind::ivp;
    const StudyResult lo = ode1d_study(kind, OdePairing::p1_3, {8, 16, 32, 64}, ode_manufactured(kind));
    const StudyResult hi = ode1d_study(kind, OdePairing::p2_4, {8, 16, 32, 64}, ode_manufactured(kind));
    EXPECT_NEAR(lo.slope_in_h("l2_error"), 1.0, 0.2);
    EXPECT_NEAR(hi.slope_in_h("l2_error"), 2.0, 0.2);
    EXPECT_NEAR(lo.slope_in_h("kappa_B"), -2.0, 0.3);
    const StudyResult opt = ode1d_study(kind, OdePairing::optimal_1_3, {8, 16, 32, 64}, ode_manufactured(kind));
    EXPECT_NEAR(opt.slope_in_h("kappa_B"), -4.0, 0.4);
}

TEST(Ode, ZeroForcingGivesZero)
{
    const OdeData zero{[](double) { return 0.0; }, [](double) { return 0.0; }};
    for (OdePairing p : {OdePairing::optimal_1_3, OdePairing::p1_3, OdePairing::p2_4}) {
        const OdeSolution s = ode1d_solve(OdeKind::bvp, p, 10, zero);
        EXPECT_EQ(s.l2_error, 0.0);
        EXPECT_EQ(s.evaluate(0.37), 0.0);
    }
}

TEST(Ode, Parsing)
{
    EXPECT_EQ(parse_ode_pairing("1*/3"), OdePairing::optimal_1_3);
    EXPECT_EQ(parse_ode_kind("ode-ivp"), OdeKind::ivp);
    EXPECT_EQ(to_string(OdePairing::p2_4), "2/4");
    EXPECT_THROW(parse_ode_pairing("3/5"), std::invalid_argument);
}
