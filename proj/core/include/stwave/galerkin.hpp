#pragma once

// Galerkin projection onto pairs of rational Krylov spaces for the four-term
// matrix equation, plus the primitives shared with the inexact preconditioners.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"
#include "stwave/report.hpp"

namespace stwave {

struct SpectralInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Extreme eigenvalues of the SPD pencil (A, M) by power and inverse power
/// iteration. Accurate to a few digits, which is all shift selection needs.
SpectralInterval estimate_pencil_bounds(const SparseMatrix& A, const SparseMatrix& M, int iterations = 60);

/// Exact extreme eigenvalues of a small dense SPD pencil.
SpectralInterval exact_pencil_bounds(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M);

/// Number of log-spaced candidates scanned by adaptive_shift.
inline constexpr int kShiftGridSize = 200;

/// Candidate s in [lo, hi] maximizing prod_j |s - theta_j| / |s + theta_j|.
/// No Ritz values: sqrt(lo * hi).
double adaptive_shift(const SpectralInterval& bounds, std::span<const double> ritz, int grid = kShiftGridSize);

/// Generalized eigenvalues of the projected pencil (V^T A V, V^T M V).
std::vector<double> ritz_values(const Eigen::MatrixXd& Ahat, const Eigen::MatrixXd& Mhat);

/// Solves (A + sigma M) x = b. Sparse LDLT below `direct_limit` unknowns,
/// conjugate gradients with relative tolerance `cg_tolerance` above. An
/// indefinite shifted matrix (sigma < 0) goes through sparse LU.
class ShiftedSparseSolver {
public:
    ShiftedSparseSolver(SparseMatrix A, SparseMatrix M, int direct_limit = 50000,
                        double cg_tolerance = 1e-8);
    /// Solves with shift sigma; throws NumericalError when the shifted matrix
    /// is numerically singular.
    Eigen::MatrixXd solve(double sigma, const Eigen::MatrixXd& b) const;

private:
    SparseMatrix A_, M_;
    int direct_limit_;
    double cg_tol_;
};

/// Dense counterpart, LU with a conditioning check.
class ShiftedDenseSolver {
public:
    ShiftedDenseSolver(Eigen::MatrixXd A, Eigen::MatrixXd M) : A_(std::move(A)), M_(std::move(M)) {}
    Eigen::MatrixXd solve(double sigma, const Eigen::MatrixXd& b) const;

private:
    Eigen::MatrixXd A_, M_;
};

using ShiftedSolve = std::function<Eigen::MatrixXd(double sigma, const Eigen::MatrixXd& b)>;

/// Retries a shifted solve once with the shift enlarged by 10 percent.
Eigen::MatrixXd solve_with_retry(const ShiftedSolve& solve, double sigma, const Eigen::MatrixXd& b);

/// Orthonormal basis grown by shifted solves applied to its own columns.
class RationalKrylovBasis {
public:
    /// Orthonormalizes the seed columns; dependent columns are dropped.
    explicit RationalKrylovBasis(const Eigen::MatrixXd& seed);

    const Eigen::MatrixXd& matrix() const { return V_; }
    int dim() const { return static_cast<int>(V_.cols()); }
    const std::vector<double>& shifts() const { return shifts_; }
    const std::vector<int>& added_per_step() const { return added_; }

    /// Orthogonalizes candidates (two passes) and appends the ones whose norm
    /// after orthogonalization stays above 1e-10 of the norm before.
    int append(const Eigen::MatrixXd& candidates);
    void record_step(double shift, int added);

private:
    Eigen::MatrixXd V_;
    std::vector<double> shifts_;
    std::vector<int> added_;
};

/// One family of shifted operators for a basis side. `first` receives the
/// shift s, `second` receives sqrt(s).
struct ShiftFamily {
    ShiftedSolve first;
    ShiftedSolve second;  // may be empty
};

/// Adds up to two columns: first(s)^{-1} v_k and second(sqrt s)^{-1} v_k,
/// with v_k column k of the current basis. Returns the number added; 0 also
/// when column k does not exist.
int extend_basis(RationalKrylovBasis& basis, const ShiftFamily& family, double shift, int k);

/// Projected equation Mh Y Qt + Nh Y St + Qh Y Mt = G1 G2^T, all factors
/// symmetric, solved in Kronecker form.
struct ReducedProblem {
    Eigen::MatrixXd Mh, Nh, Qh;
    Eigen::MatrixXd Mt, St, Qt;
    Eigen::MatrixXd G1, G2;
};

Eigen::MatrixXd solve_reduced(const ReducedProblem& red);

/// Two-term equation M Z P + A Z Q = F with sparse symmetric spatial factors
/// (M SPD) and small dense temporal factors, projected onto a rational Krylov
/// space of (A, M) generated by the left factor of F. The poles are the real
/// parts of the eigenvalues of Q^{-1} P, visited in a greedy spread-out order;
/// for a diagonalizable real temporal pencil the space contains the exact
/// solution once every pole has been used on every seed column.
struct ProjectedSolveResult {
    Eigen::MatrixXd Z;
    double relative_residual = 0.0;
    int basis_dim = 0;
    bool converged = false;
};

class ProjectedSylvesterSolver {
public:
    /// max_dim = 0 selects rank(F) * (size(P) + 1).
    ProjectedSylvesterSolver(SparseMatrix M, SparseMatrix A, Eigen::MatrixXd P, Eigen::MatrixXd Q,
                             double tolerance = 1e-8, int max_dim = 0, int direct_limit = 50000);

    ProjectedSolveResult solve(const LowRankMatrix& F) const;
    const std::vector<double>& poles() const { return poles_; }

private:
    SparseMatrix M_, A_;
    Eigen::MatrixXd P_, Q_;
    double tol_;
    int max_dim_;
    ShiftedSparseSolver shifted_;
    std::vector<double> poles_;
};

/// Dense and sparse data of the optimal operator.
struct SpaceTimeMatrices {
    SparseMatrix Mh, Nh, Qh;
    Eigen::MatrixXd Mt, Nt, Qt;
};

SpaceTimeMatrices collect_matrices(const TimeMatrices& tm, const SpaceMatrices& sm);

struct GalerkinConfig {
    double tolerance = 1e-5;
    int max_iterations = 200;
    int direct_limit = 50000;
    double inner_tolerance = 1e-8;
};

/// Galerkin solve with U_k = V_k Y_k W_k^T; the report carries the dense U.
SolveReport galerkin_solve(const SpaceTimeMatrices& mats, const LowRankMatrix& G, const GalerkinConfig& config = {});

}  // namespace stwave
