#pragma once

// Dense solvers for the generalized Sylvester equations behind the
// preconditioners, and the dense Kronecker oracle.

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"

namespace stwave {

/// Raised when a numerical procedure cannot deliver a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A X = B X diag(lambda), X^T B X = I, lambda ascending.
struct SpdPencil {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd X;
};

SpdPencil decompose_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Relative residual threshold applied to every direct Sylvester solve.
inline constexpr double kSylvesterCheckTolerance = 1e-9;

/// M_h Z Q_t^T + Q_h Z M_t = R, with both pencils diagonalized once.
class SymSylvesterSolver {
public:
    SymSylvesterSolver(const Eigen::MatrixXd& M_h, const Eigen::MatrixXd& Q_h, const Eigen::MatrixXd& M_t,
                       const Eigen::MatrixXd& Q_t, double check_tolerance = kSylvesterCheckTolerance);

    Eigen::MatrixXd solve(const Eigen::MatrixXd& R) const;
    /// Relative residual of the last solve.
    double last_residual() const { return last_residual_; }

private:
    Eigen::MatrixXd M_h_, Q_h_, M_t_, Q_t_;
    SpdPencil space_, time_;
    Eigen::MatrixXd denom_;
    double check_tol_;
    mutable double last_residual_ = 0.0;
};

Eigen::MatrixXd solve_sym_sylvester(const Eigen::MatrixXd& M_h, const Eigen::MatrixXd& Q_h, const Eigen::MatrixXd& M_t,
                                    const Eigen::MatrixXd& Q_t, const Eigen::MatrixXd& R);

/// W M_t^{-1} N_t + M_h^{-1} N_h W = R. The spatial pencil (N_h, M_h) is
/// diagonalized, the temporal factor M_t^{-1} N_t goes through a complex Schur
/// form.
class ShiftedSylvesterSolver {
public:
    ShiftedSylvesterSolver(const Eigen::MatrixXd& N_h, const Eigen::MatrixXd& M_h, const Eigen::MatrixXd& N_t,
                           const Eigen::MatrixXd& M_t, double check_tolerance = kSylvesterCheckTolerance);

    /// Reuses the spatial decomposition of another solver with the same N_h, M_h.
    ShiftedSylvesterSolver(const ShiftedSylvesterSolver& spatial_donor, const Eigen::MatrixXd& N_t,
                           const Eigen::MatrixXd& M_t);

    Eigen::MatrixXd solve(const Eigen::MatrixXd& R) const;
    double last_residual() const { return last_residual_; }

    const SpdPencil& space_pencil() const { return space_; }
    const Eigen::MatrixXd& space_mass() const { return M_h_; }

private:
    void setup_time(const Eigen::MatrixXd& N_t, const Eigen::MatrixXd& M_t);

    Eigen::MatrixXd N_h_, M_h_;
    Eigen::MatrixXd S_;  // M_t^{-1} N_t
    SpdPencil space_;
    Eigen::MatrixXcd schur_T_, schur_U_;
    double check_tol_;
    mutable double last_residual_ = 0.0;
};

Eigen::MatrixXd solve_shifted_sylvester(const Eigen::MatrixXd& N_h, const Eigen::MatrixXd& M_h,
                                        const Eigen::MatrixXd& N_t, const Eigen::MatrixXd& M_t,
                                        const Eigen::MatrixXd& R);

/// Largest N_t * N_h^d accepted by dense_kron_solve.
inline constexpr Eigen::Index kDenseKronCap = 20000;

/// Solves sum_j S_j U T_j^T = G through the materialized Kronecker matrix.
Eigen::MatrixXd dense_kron_solve(const KronOperator& op, const Eigen::MatrixXd& G);

}  // namespace stwave
