#pragma once

// Matrix-oriented preconditioned conjugate gradients on sum_j S_j U T_j^T = G
// with the two operator preconditioners.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "stwave/discretization.hpp"
#include "stwave/galerkin.hpp"
#include "stwave/mateq_direct.hpp"
#include "stwave/report.hpp"

namespace stwave {

enum class PreconditionerKind { none, sylvester, kmk };

std::string_view to_string(PreconditionerKind kind);
/// Accepts "none", "sylvester" ("sylv") and "kmk".
PreconditionerKind parse_preconditioner(std::string_view name);

struct PcgConfig {
    double tolerance = 1e-5;
    int max_iterations = 1000;
    PreconditionerKind preconditioner = PreconditionerKind::kmk;
    /// Spatial sizes above this use truncated, projected inner solves.
    int large_space_threshold = 1024;
    int truncation_rank = 4;
    double inner_tolerance = 1e-8;
    int inner_max_dim = 0;  // 0: automatic
    /// Residual threshold of the direct Sylvester solves inside the preconditioners.
    double direct_check_tolerance = 1e-6;
    /// Called with (iteration, U) after every update; may be empty.
    std::function<void(int, const Eigen::MatrixXd&)> on_iterate;

    void validate() const;
};

/// Best rank-r approximation in the Frobenius norm.
LowRankMatrix truncate_rank(const Eigen::MatrixXd& X, int r);
LowRankMatrix truncate_rank(const LowRankMatrix& X, int r);

/// Z = P^{-1}(R). A failed inner solve switches the instance to the identity
/// for the rest of its life and logs a warning.
class Preconditioner {
public:
    virtual ~Preconditioner() = default;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& R) const;
    virtual std::string_view name() const = 0;
    int fallbacks() const { return fallbacks_; }
    bool degraded() const { return degraded_; }

protected:
    virtual Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& R) const = 0;

private:
    mutable int fallbacks_ = 0;
    mutable bool degraded_ = false;
};

class IdentityPreconditioner final : public Preconditioner {
public:
    std::string_view name() const override { return "none"; }

protected:
    Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& R) const override { return R; }
};

/// Leading part Q_t (x) M_h + M_t (x) Q_h.
class SylvesterPreconditioner final : public Preconditioner {
public:
    SylvesterPreconditioner(const SpaceTimeMatrices& mats, const PcgConfig& config);
    std::string_view name() const override { return "sylvester"; }
    bool projected() const { return !direct_; }
    /// Relative residual of the last inner solve.
    double last_residual() const { return last_residual_; }

protected:
    Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& R) const override;

private:
    int rank_;
    std::optional<SymSylvesterSolver> direct_;
    std::unique_ptr<ProjectedSylvesterSolver> projected_;
    mutable double last_residual_ = 0.0;
};

/// Exact inverse of K^T M^{-1} K with K = N_t^T (x) M_h + M_t (x) N_h and
/// M = M_t (x) M_h, so that K^T M^{-1} K <= B. Rows of N_t carry the second
/// derivative. Two shifted Sylvester solves and one temporal mass solve.
class KmkPreconditioner final : public Preconditioner {
public:
    KmkPreconditioner(const SpaceTimeMatrices& mats, const PcgConfig& config);
    std::string_view name() const override { return "kmk"; }
    bool projected() const { return !first_; }

protected:
    Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& R) const override;

private:
    int rank_;
    SparseMatrix Mh_;
    Eigen::LLT<Eigen::MatrixXd> Mt_llt_;
    Eigen::LLT<Eigen::MatrixXd> Mh_llt_;  // direct path only
    std::optional<ShiftedSylvesterSolver> first_, second_;
    std::unique_ptr<ProjectedSylvesterSolver> proj_first_, proj_second_;
};

std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind, const SpaceTimeMatrices& mats,
                                                    const PcgConfig& config);

/// Matrix-oriented PCG started from U = 0, recomputing the true residual
/// G - A(U) at every step; stops once the backward error reaches the
/// tolerance. `precond` may be null (identity).
SolveReport matrix_pcg(const KronOperator& op, const Eigen::MatrixXd& G, const PcgConfig& config,
                       const Preconditioner* precond = nullptr);

}  // namespace stwave
