#pragma once

// Inf-sup constants, condition numbers, spectral-equivalence ratios and the
// univariate convergence study.

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"

namespace stwave {

/// Largest dense size accepted by the dense diagnostics.
inline constexpr int kDenseDiagnosticsCap = 5000;

/// beta = sqrt(lambda_min) of B^T G_V^{-1} B x = lambda G_U x, computed as the
/// smallest singular value of L_V^{-1} B L_U^{-T} with Cholesky factors of the
/// Grams. B(i, j) = b(trial_j, test_i). Throws NumericalError when a Gram is
/// not SPD.
double infsup_constant(const Eigen::MatrixXd& B, const Eigen::MatrixXd& gram_trial, const Eigen::MatrixXd& gram_test);

/// Inf-sup constant of the optimal space-time pairing, where the trial Gram,
/// the test Gram in the graph norm and the form matrix all equal the
/// stiffness matrix.
double optimal_infsup(const TimeMatrices& tm, const SpaceMatrices& sm);

/// 2-norm condition number; 1 for 1x1 nonzero matrices, infinity if singular.
double condition_number(const Eigen::MatrixXd& A);

struct EquivalenceRatio {
    double min = 0.0;
    double max = 0.0;
};

/// Extreme generalized eigenvalues of (N^T M^{-1} N, Q), computed as squared
/// extreme singular values of L_M^{-1} N L_Q^{-T}.
EquivalenceRatio spectral_equivalence_ratio(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                                            const Eigen::MatrixXd& M);

struct StudyRow {
    int refinement = 0;
    long long dof = 0;
    std::string metric;
    double value = 0.0;
};

struct StudyResult {
    std::string name;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<StudyRow> rows;

    void add(int refinement, long long dof, std::string metric, double value);
    std::vector<const StudyRow*> select(const std::string& metric) const;
    std::vector<double> values(const std::string& metric) const;
    /// Least-squares slope of log(value) against log(h), h = 1/refinement.
    double slope_in_h(const std::string& metric) const;
    /// Least-squares slope of log(value) against log(dof).
    double slope_in_dof(const std::string& metric) const;
};

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Condition numbers of M, N, Q in time (N_t = n) and in 1D space (N_h = n)
/// and of the stiffness matrix while N_t N_h <= max_stiffness_size.
/// Metrics: kappa_Mt, kappa_Nt, kappa_Qt, kappa_Mh, kappa_Nh, kappa_Qh,
/// kappa_B.
StudyResult condition_numbers(const std::vector<int>& refinements, StiffnessFlavor flavor = StiffnessFlavor::optimal,
                              int max_stiffness_size = 1024);

/// Spatial ratios of (N_h M_h^{-1} N_h, Q_h) and temporal ratios of
/// (N_t M_t^{-1} N_t^T, Q_t) per refinement. Metrics: space_min, space_max,
/// time_min, time_max.
StudyResult equivalence_study(const std::vector<int>& refinements);

enum class OdeKind { bvp, ivp };
/// Trial/test B-spline orders: 1*/3 (trial = second derivatives of the test
/// space), 1/3 and 2/4.
enum class OdePairing { optimal_1_3, p1_3, p2_4 };

std::string_view to_string(OdeKind kind);
std::string_view to_string(OdePairing pairing);
OdeKind parse_ode_kind(std::string_view name);
OdePairing parse_ode_pairing(std::string_view name);

struct OdeData {
    std::function<double(double)> f;
    std::function<double(double)> u;  // exact solution of -u'' = f
};

/// Smooth manufactured data: u = (1 + x) sin(pi x) for the boundary value
/// problem, u = 1 - cos(pi x) for the initial value problem.
OdeData ode_manufactured(OdeKind kind);

/// Discrete solution of -(u, v'') = (f, v) on n uniform intervals.
struct OdeSolution {
    int dof = 0;
    double l2_error = 0.0;
    double condition = 0.0;
    double beta = 0.0;
    std::function<double(double)> evaluate;
};

OdeSolution ode1d_solve(OdeKind kind, OdePairing pairing, int intervals, const OdeData& data);

/// Metrics per refinement: l2_error, kappa_B, beta.
StudyResult ode1d_study(OdeKind kind, OdePairing pairing, const std::vector<int>& refinements, const OdeData& data);

}  // namespace stwave
