#pragma once

// Space-time test/trial pair, Kronecker stiffness operator, right-hand side and
// evaluation of the discrete solution.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stwave/problem.hpp"
#include "stwave/spline.hpp"

namespace stwave {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Kronecker product A (x) B of sparse matrices.
SparseMatrix kron(const SparseMatrix& A, const SparseMatrix& B);

/// Spatial matrices on (0,1)^d. Index of a tensor function is
/// i_0 + n*i_1 + n^2*i_2, so the last axis is the outer Kronecker factor.
struct SpaceMatrices {
    int dim = 1;
    int n_per_axis = 0;
    double c = 1.0;
    SplineBasis basis1d;
    GramSet1D gram1d;
    SparseMatrix M;  // (phi_j, phi_i)
    SparseMatrix N;  // (A phi_j, phi_i) = c^2 (grad phi_j, grad phi_i)
    SparseMatrix Q;  // (A phi_j, A phi_i)

    int size() const { return static_cast<int>(M.rows()); }
};

/// Upper bound on N_h^d accepted by assemble_space_matrices by default.
inline constexpr std::size_t kDefaultSpaceSizeCap = 1u << 21;

SpaceMatrices assemble_space_matrices(const WaveProblem& problem, int n_per_axis,
                                      std::size_t max_size = kDefaultSpaceSizeCap);

/// Temporal matrices; N(l,k) = (rho_l'', rho_k) is not symmetric.
struct TimeMatrices {
    double T = 1.0;
    SplineBasis basis;
    Eigen::MatrixXd M;
    Eigen::MatrixXd N;
    Eigen::MatrixXd Q;

    int size() const { return static_cast<int>(M.rows()); }
};

TimeMatrices assemble_time_matrices(double T, int n_t);

/// One term T (x) S of a Kronecker operator acting on vec(U), U of size
/// (space x time): (T (x) S) vec(U) = vec(S U T^T).
struct KronTerm {
    Eigen::MatrixXd time;
    SparseMatrix space;
};

enum class StiffnessFlavor { optimal, general };

struct KronOperator {
    StiffnessFlavor flavor = StiffnessFlavor::optimal;
    std::vector<KronTerm> terms;

    int space_size() const { return terms.empty() ? 0 : static_cast<int>(terms.front().space.rows()); }
    int time_size() const { return terms.empty() ? 0 : static_cast<int>(terms.front().time.rows()); }

    /// sum_j S_j U T_j^T
    Eigen::MatrixXd apply(const Eigen::MatrixXd& U) const;
    /// Dense sum_j T_j (x) S_j; oracle use only.
    Eigen::MatrixXd dense() const;
};

/// optimal: [(Q_t, M_h), (N_t, N_h^T), (N_t^T, N_h), (M_t, Q_h)]
/// general: [(N_t, M_h), (M_t, N_h)]
KronOperator build_stiffness(StiffnessFlavor flavor, const TimeMatrices& tm, const SpaceMatrices& sm);

/// Factored matrix left * right^T.
struct LowRankMatrix {
    Eigen::MatrixXd left;   // space x r
    Eigen::MatrixXd right;  // time x r

    int rank() const { return static_cast<int>(left.cols()); }
    Eigen::MatrixXd dense() const { return left * right.transpose(); }
    /// Frobenius norm from the factors.
    double norm() const;
    /// Same product with orthonormal left factor and the right factor absorbing
    /// the triangular part.
    LowRankMatrix orthonormalized() const;
};

/// Depth of dyadic subdivision used when integrating data across a kink.
inline constexpr int kDataSubdivisionDepth = 6;

/// Load vector (g, phi_i) for every spatial basis function. Radial data are
/// integrated with elements cut by a kink sphere subdivided recursively.
Eigen::VectorXd project_space_function(const SpaceMatrices& sm, const SpaceFunction& g,
                                       const RadialProfile* radial = nullptr,
                                       int depth = kDataSubdivisionDepth);

/// (a, rho_k) for every temporal basis function.
Eigen::VectorXd project_time_function(const TimeMatrices& tm, const TimeFunction& a);

/// G = G1 G2^T with G(i,k) = (u1, phi_i) rho_k(0) - (u0, phi_i) rho_k'(0)
///                          + sum_terms (b, phi_i) (a, rho_k).
LowRankMatrix assemble_rhs(const WaveProblem& problem, const TimeMatrices& tm, const SpaceMatrices& sm);

/// Nonzero tensor-product basis functions at a spatial point.
struct LocalSpaceValues {
    std::vector<int> index;
    std::vector<double> value;
    std::vector<double> applied;  // (A phi)(x)
};

void local_space_values(const SpaceMatrices& sm, std::span<const double> x, LocalSpaceValues& out);

/// Space-time point (t, x_0, ..., x_{d-1}).
struct SpaceTimePoint {
    double t = 0.0;
    std::vector<double> x;
};

/// u(t,x) = sum_{i,k} U(i,k) (rho_k''(t) phi_i(x) + rho_k(t) A phi_i(x)).
std::vector<double> evaluate_solution(const Eigen::MatrixXd& U, const TimeMatrices& tm, const SpaceMatrices& sm,
                                      std::span<const SpaceTimePoint> points);

/// Samples of a spatial coefficient expansion on a tensor grid, with the
/// first axis varying fastest. Returns sum_i a_i phi_i + sum_i b_i A phi_i.
Eigen::VectorXd evaluate_space_grid(const SpaceMatrices& sm, const Eigen::VectorXd& a, const Eigen::VectorXd* b,
                                    const std::vector<std::vector<double>>& axis_points);

/// Values of the time basis (deriv 0 or 2) at t.
Eigen::VectorXd time_basis_values(const TimeMatrices& tm, double t, int deriv);

}  // namespace stwave
