#pragma once

// Ground-truth solutions, the Crank-Nicolson baseline and the space-time L2
// error.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"
#include "stwave/problem.hpp"

namespace stwave {

/// Values on the tensor grid axes[0] x ... x axes[d-1] at time t, first axis
/// fastest.
using GridEvaluator = std::function<Eigen::VectorXd(double t, const std::vector<std::vector<double>>& axes)>;

/// Evaluates a pointwise function (t, x) on tensor grids.
GridEvaluator pointwise_evaluator(std::function<double(double, std::span<const double>)> f);

/// Free-space radial solution for u1 = 0, f = 0 in three dimensions:
/// [g(r+ct) + g(r-ct)] / (2r) with g(s) = s u0(|s|) odd. Below r = 1e-8 the
/// limit g'(ct) is returned.
double dalembert_radial(const RadialProfile& u0, double c, double r, double t);

/// Planar solution [u0(|s-ct|) + u0(|s+ct|)] / 2 in one dimension, s = x - 1/2.
double dalembert_planar(const RadialProfile& u0, double c, double x, double t);

/// Sine series of the radially reduced problem: v = r u solves the 1D wave
/// equation on (0, R) with v(0) = v(R) = 0. Exact for the free-space problem
/// while the support stays inside r < R.
class RadialSeries {
public:
    RadialSeries(const RadialProfile& u0, double c, int cutoff, double R = 0.5);

    double value(double r, double t) const;
    /// Estimate of sum_{n > cutoff} |beta_n| / r bounding the pointwise
    /// truncation error of value(r, t).
    double tail_bound(double r) const;
    double coefficient_tail() const { return tail_; }
    int cutoff() const { return static_cast<int>(beta_.size()); }
    const Eigen::VectorXd& coefficients() const { return beta_; }

private:
    double c_, R_;
    Eigen::VectorXd beta_;
    double tail_ = 0.0;
};

/// Sine series on the box (0,1)^d, e_n = prod_a sqrt(2) sin(n_a pi x_a).
/// Mode index n_0 + K n_1 + K^2 n_2 with n_a = 1..K stored at n_a - 1.
class SpectralSolution {
public:
    int dim() const { return dim_; }
    int cutoff() const { return K_; }
    double wave_speed() const { return c_; }
    int num_modes() const { return static_cast<int>(lambda_.size()); }

    const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    const Eigen::VectorXd& u0_coefficients() const { return a_; }
    const Eigen::VectorXd& u1_coefficients() const { return b_; }

    /// L2 truncation estimate of the solution at any t <= T, and whether it
    /// met the tolerance requested at construction.
    double tail_estimate() const { return tail_; }
    bool tail_within_tolerance() const { return tail_ok_; }

    /// w_n(t) and its derivatives (deriv 0, 1 or 2) for every mode.
    Eigen::VectorXd modes(double t, int deriv = 0) const;
    /// f_n(t) for every mode.
    Eigen::VectorXd forcing_modes(double t) const;

    double value(double t, std::span<const double> x) const;
    Eigen::VectorXd grid(double t, const std::vector<std::vector<double>>& axes) const;

    /// sum_n w_n'(t)^2 / lambda_n + w_n(t)^2.
    double energy(double t) const;

private:
    friend SpectralSolution spectral_solve(const WaveProblem&, int, double);

    struct Forcing {
        TimeFunction time;
        Eigen::VectorXd coefficients;
    };

    // int_0^t sin(omega (t - tau)) a(tau) dtau and the cosine companion.
    void duhamel(const TimeFunction& a, double t, Eigen::VectorXd& s, Eigen::VectorXd& c) const;

    int dim_ = 1;
    int K_ = 0;
    double c_ = 1.0;
    double T_ = 1.0;
    Eigen::VectorXd lambda_, a_, b_;
    std::vector<Forcing> forcing_;
    double tail_ = 0.0;
    bool tail_ok_ = true;
};

/// Coefficients by tensor Gauss quadrature, refined near the kinks of radial
/// data. A tail estimate above `tail_tolerance` is logged, not thrown.
SpectralSolution spectral_solve(const WaveProblem& problem, int cutoff, double tail_tolerance = 1e-3);

struct ReferenceOptions {
    int cutoff = 96;
    double tail_tolerance = 1e-3;
};

/// Exact solution of a problem: closed forms for radial data with zero
/// velocity and forcing in 1D and 3D, the box series otherwise.
GridEvaluator reference_evaluator(const WaveProblem& problem, const ReferenceOptions& options = {});

/// Evaluator of U_{ik} (rho_k'' phi_i + rho_k A phi_i). Keeps references to
/// tm and sm, which must outlive it.
GridEvaluator solution_evaluator(const Eigen::MatrixXd& U, const TimeMatrices& tm, const SpaceMatrices& sm);

struct CnConfig {
    int steps = 16;
    double inner_tolerance = 1e-6;
    int max_inner_iterations = 20000;

    void validate() const;
};

/// States of the first-order system at t_n = n T / steps, n = 0..steps.
struct CnTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> u, v;
    std::vector<int> inner_iterations;
    double seconds = 0.0;
};

/// v^T M v / 2 + u^T N u / 2 with N = c^2 (grad phi_j, grad phi_i).
double discrete_energy(const SpaceMatrices& sm, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Trapezoidal rule on u' = v, M v' = -N u + f. Each step solves
/// (M + dt^2/4 N) v^{n+1} = (M - dt^2/4 N) v^n - dt N u^n + dt/2 (f^n + f^{n+1})
/// by conjugate gradients. Initial data are L2 projections.
CnTrajectory crank_nicolson_solve(const WaveProblem& problem, const SpaceMatrices& sm, const CnConfig& config);

/// Piecewise linear interpolation in time of the trajectory. Keeps references.
GridEvaluator trajectory_evaluator(const CnTrajectory& traj, const SpaceMatrices& sm);

struct SpaceTimeMesh {
    int dim = 1;
    std::vector<double> time_breaks;
    std::vector<double> space_breaks;  // same on every axis
};

SpaceTimeMesh mesh_of(const TimeMatrices& tm, const SpaceMatrices& sm);
SpaceTimeMesh mesh_of(const CnTrajectory& traj, const SpaceMatrices& sm);

struct L2Options {
    int points = 3;  // Gauss points per subcell and direction
    int depth = 3;   // each cell split into 2^depth pieces per direction
    bool estimate_uncertainty = true;
};

/// Error and |E(depth) - E(depth - 1)| as an uncertainty of the quadrature.
struct L2Error {
    double error = 0.0;
    double uncertainty = 0.0;
};

/// ||numeric - exact||_{L2(I x Omega)} by composite Gauss quadrature on the
/// uniformly subdivided cells of the mesh.
L2Error l2_error_spacetime(const GridEvaluator& numeric, const GridEvaluator& exact, const SpaceTimeMesh& mesh,
                           const L2Options& options = {});

}  // namespace stwave
