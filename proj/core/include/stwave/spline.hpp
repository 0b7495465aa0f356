#pragma once

// Univariate B-spline bases, Gauss quadrature and 1D Gram matrices.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stwave {

/// Breakpoints with multiplicities; the expanded knot sequence follows.
class KnotVector {
public:
    KnotVector(std::vector<double> breakpoints, std::vector<int> multiplicities, int degree);

    /// Uniform breakpoints on [a,b] with multiplicity degree+1 at both ends and
    /// simple interior knots.
    static KnotVector open_uniform(double a, double b, int intervals, int degree);

    int degree() const { return degree_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<int>& multiplicities() const { return multiplicities_; }
    const std::vector<double>& knots() const { return knots_; }

    /// Number of B-splines on the expanded sequence.
    int dimension() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int num_intervals() const { return static_cast<int>(breakpoints_.size()) - 1; }
    double front() const { return breakpoints_.front(); }
    double back() const { return breakpoints_.back(); }

    /// Knot span index mu with knots[mu] <= x < knots[mu+1]. Right-continuous at
    /// interior knots; x == back() maps to the last non-empty span.
    int find_span(double x) const;

private:
    std::vector<double> breakpoints_;
    std::vector<int> multiplicities_;
    int degree_;
    std::vector<double> knots_;
};

enum class BoundaryCondition {
    none,
    dirichlet,    // v(a) = v(b) = 0
    terminal_h2,  // v(b) = v'(b) = 0
};

/// Local evaluation result: derivatives 0..nderiv of the degree+1 raw B-splines
/// that are possibly nonzero on the span containing x.
struct LocalBasis {
    int first_raw = 0;
    Eigen::MatrixXd values;  // (nderiv+1) x (degree+1)
};

/// B-spline space on a clamped knot vector (end multiplicity degree+1) with
/// boundary functions removed according to the boundary condition. Retained
/// functions keep their raw ordering.
class SplineBasis {
public:
    SplineBasis(KnotVector knots, BoundaryCondition bc);

    const KnotVector& knots() const { return knots_; }
    BoundaryCondition bc() const { return bc_; }
    int degree() const { return knots_.degree(); }
    int size() const { return static_cast<int>(index_map_.size()); }
    int raw_size() const { return knots_.dimension(); }

    /// retained index -> raw index
    const std::vector<int>& index_map() const { return index_map_; }
    /// raw index -> retained index, or -1 if removed
    int retained_index(int raw) const { return raw_to_retained_[static_cast<std::size_t>(raw)]; }

    LocalBasis local(double x, int nderiv) const;

    /// All raw B-splines (before boundary removal) at x.
    Eigen::VectorXd eval_raw(double x, int deriv) const;

private:
    KnotVector knots_;
    BoundaryCondition bc_;
    std::vector<int> index_map_;
    std::vector<int> raw_to_retained_;
};

/// Degree-2 space of dimension n_t on [0,T] with v(T) = v'(T) = 0. The first
/// function lives on the triple knot at 0, the second on the double knot.
SplineBasis make_temporal_test_basis(double T, int n_t);

/// Degree-2 space of dimension n_h on [0,1] vanishing at both endpoints.
SplineBasis make_spatial_test_basis_1d(int n_h);

/// Uniform open-knot basis of arbitrary degree with the given boundary condition.
SplineBasis make_uniform_basis(double a, double b, int intervals, int degree, BoundaryCondition bc);

/// Values (deriv 0, 1, 2, ...) of all retained functions at x. deriv > degree
/// yields zeros.
Eigen::VectorXd eval_basis(const SplineBasis& basis, double x, int deriv);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

/// Composite Gauss rule, one copy per interval between consecutive breakpoints.
class QuadratureRule {
public:
    QuadratureRule(std::span<const double> breakpoints, int points_per_interval);

    /// Rule exact for every Gram integrand of degree-p splines.
    static QuadratureRule for_degree(std::span<const double> breakpoints, int degree);

    int points_per_interval() const { return npts_; }
    int num_intervals() const { return static_cast<int>(breakpoints_.size()) - 1; }
    /// Polynomial degree integrated exactly.
    int order() const { return 2 * npts_ - 1; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    /// Points/weights of interval e occupy [e*n, (e+1)*n).
    double point(int e, int q) const { return points_[static_cast<std::size_t>(e * npts_ + q)]; }
    double weight(int e, int q) const { return weights_[static_cast<std::size_t>(e * npts_ + q)]; }

private:
    std::vector<double> breakpoints_;
    int npts_;
    std::vector<double> points_;
    std::vector<double> weights_;
};

/// 1D Grams between a test basis (rows) and a trial basis (columns):
///   M(i,j) = (v_i,   u_j)      N(i,j) = (v_i'', u_j)
///   Q(i,j) = (v_i'', u_j'')    K(i,j) = (v_i',  u_j')
struct GramSet1D {
    Eigen::MatrixXd M;
    Eigen::MatrixXd N;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd K;
    double length = 0.0;
    int test_size = 0;
    int trial_size = 0;
};

GramSet1D assemble_gram_1d(const SplineBasis& test, const SplineBasis& trial, const QuadratureRule& quad);
GramSet1D assemble_gram_1d(const SplineBasis& test, const SplineBasis& trial);

}  // namespace stwave
