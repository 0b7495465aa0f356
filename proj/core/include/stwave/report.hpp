#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"

namespace stwave {

/// Outcome of an iterative or projection solve.
struct SolveReport {
    bool converged = false;
    int iterations = 0;
    std::vector<double> backward_errors;
    std::vector<double> residual_norms;  // Frobenius
    double seconds = 0.0;
    Eigen::MatrixXd U;  // space x time
    std::string message;

    // projection solves only
    int space_basis_dim = 0;
    int time_basis_dim = 0;
    std::vector<double> galerkin_defects;  // ||V^T R W||_F per iterate

    // preconditioned solves only
    int preconditioner_fallbacks = 0;
};

/// ||R||_F / (||G||_F + ||U||_F * sum_j ||S_j||_F ||T_j||_F). For the optimal
/// operator the sum is ||M_h|| ||Q_t|| + ||Q_h|| ||M_t|| + 2 ||N_h|| ||N_t||.
double backward_error(double residual_norm, double rhs_norm, double solution_norm, double operator_scale);

/// sum_j ||S_j||_F ||T_j||_F over the operator terms.
double operator_scale(const KronOperator& op);

}  // namespace stwave
