#include "stwave/iterative.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace stwave {

double backward_error(double residual_norm, double rhs_norm, double solution_norm, double operator_scale)
{
    const double denom = rhs_norm + solution_norm * operator_scale;
    if (denom == 0.0)
        return residual_norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return residual_norm / denom;
}

double operator_scale(const KronOperator& op)
{
    double s = 0.0;
    for (const KronTerm& t : op.terms)
        s += t.space.norm() * t.time.norm();
    return s;
}

std::string_view to_string(PreconditionerKind kind)
{
    switch (kind) {
    case PreconditionerKind::none: return "none";
    case PreconditionerKind::sylvester: return "sylvester";
    case PreconditionerKind::kmk: return "kmk";
    }
    return "none";
}

PreconditionerKind parse_preconditioner(std::string_view name)
{
    if (name == "none")
        return PreconditionerKind::none;
    if (name == "sylvester" || name == "sylv")
        return PreconditionerKind::sylvester;
    if (name == "kmk")
        return PreconditionerKind::kmk;
    throw std::invalid_argument("unknown preconditioner '" + std::string(name) + "'");
}

void PcgConfig::validate() const
{
    if (!(tolerance > 0.0))
        throw std::invalid_argument("pcg: tolerance must be positive");
    if (truncation_rank < 1)
        throw std::invalid_argument("pcg: truncation rank must be at least 1");
    if (max_iterations < 1)
        throw std::invalid_argument("pcg: max_iterations must be at least 1");
    if (!(inner_tolerance > 0.0) || inner_max_dim < 0 || large_space_threshold < 1)
        throw std::invalid_argument("pcg: invalid inner solver settings");
}

LowRankMatrix truncate_rank(const Eigen::MatrixXd& X, int r)
{
    if (r < 1)
        throw std::invalid_argument("truncate_rank: r must be at least 1");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index k = std::min<Eigen::Index>(r, svd.singularValues().size());
    LowRankMatrix out;
    out.left = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
    out.right = svd.matrixV().leftCols(k);
    return out;
}

LowRankMatrix truncate_rank(const LowRankMatrix& X, int r)
{
    if (r < 1)
        throw std::invalid_argument("truncate_rank: r must be at least 1");
    if (X.rank() == 0)
        return X;
    const Eigen::HouseholderQR<Eigen::MatrixXd> ql(X.left), qr(X.right);
    const Eigen::Index kl = std::min(X.left.rows(), X.left.cols()), kr = std::min(X.right.rows(), X.right.cols());
    const Eigen::MatrixXd Rl = ql.matrixQR().topRows(kl).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rr = qr.matrixQR().topRows(kr).triangularView<Eigen::Upper>();
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(Rl * Rr.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index k = std::min<Eigen::Index>(r, svd.singularValues().size());
    const Eigen::MatrixXd Ql = ql.householderQ() * Eigen::MatrixXd::Identity(X.left.rows(), kl);
    const Eigen::MatrixXd Qr = qr.householderQ() * Eigen::MatrixXd::Identity(X.right.rows(), kr);
    LowRankMatrix out;
    out.left = Ql * (svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal());
    out.right = Qr * svd.matrixV().leftCols(k);
    return out;
}

Eigen::MatrixXd Preconditioner::apply(const Eigen::MatrixXd& R) const
{
    if (degraded_)
        return R;
    try {
        return apply_impl(R);
    } catch (const NumericalError& e) {
        spdlog::warn("{} preconditioner failed ({}); continuing with the identity", name(), e.what());
        ++fallbacks_;
        degraded_ = true;
        return R;
    }
}

SylvesterPreconditioner::SylvesterPreconditioner(const SpaceTimeMatrices& mats, const PcgConfig& config)
    : rank_(config.truncation_rank)
{
    config.validate();
    if (mats.Mh.rows() <= config.large_space_threshold) {
        direct_.emplace(Eigen::MatrixXd(mats.Mh), Eigen::MatrixXd(mats.Qh), mats.Mt, mats.Qt, config.direct_check_tolerance);
    } else {
        projected_ = std::make_unique<ProjectedSylvesterSolver>(mats.Mh, mats.Qh, mats.Qt.transpose(), mats.Mt,
                                                                config.inner_tolerance, config.inner_max_dim);
    }
}

Eigen::MatrixXd SylvesterPreconditioner::apply_impl(const Eigen::MatrixXd& R) const
{
    if (direct_) {
        Eigen::MatrixXd Z = direct_->solve(R);
        last_residual_ = direct_->last_residual();
        return Z;
    }
    const ProjectedSolveResult res = projected_->solve(truncate_rank(R, rank_));
    last_residual_ = res.relative_residual;
    if (!res.converged)
        throw NumericalError("projected Sylvester solve stalled at relative residual " +
                             std::to_string(res.relative_residual));
    return res.Z;
}

KmkPreconditioner::KmkPreconditioner(const SpaceTimeMatrices& mats, const PcgConfig& config)
    : rank_(config.truncation_rank), Mh_(mats.Mh), Mt_llt_(mats.Mt)
{
    config.validate();
    if (Mt_llt_.info() != Eigen::Success)
        throw NumericalError("kmk: temporal mass is not SPD");
    if (mats.Mh.rows() <= config.large_space_threshold) {
        const Eigen::MatrixXd Mh(mats.Mh), Nh(mats.Nh);
        Mh_llt_.compute(Mh);
        if (Mh_llt_.info() != Eigen::Success)
            throw NumericalError("kmk: spatial mass is not SPD");
        first_.emplace(Nh, Mh, Eigen::MatrixXd(mats.Nt.transpose()), mats.Mt, config.direct_check_tolerance);
        second_.emplace(*first_, mats.Nt, mats.Mt);
    } else {
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(mats.Mt.rows(), mats.Mt.cols());
        const Eigen::MatrixXd S1 = Mt_llt_.solve(Eigen::MatrixXd(mats.Nt.transpose()));
        const Eigen::MatrixXd S2 = Mt_llt_.solve(mats.Nt);
        proj_first_ = std::make_unique<ProjectedSylvesterSolver>(mats.Mh, mats.Nh, S1, I, config.inner_tolerance,
                                                                 config.inner_max_dim);
        proj_second_ = std::make_unique<ProjectedSylvesterSolver>(mats.Mh, mats.Nh, S2, I, config.inner_tolerance,
                                                                  config.inner_max_dim);
    }
}

Eigen::MatrixXd KmkPreconditioner::apply_impl(const Eigen::MatrixXd& R) const
{
    if (first_) {
        const Eigen::MatrixXd V = first_->solve(Mh_llt_.solve(R));
        const Eigen::MatrixXd Y = second_->solve(V);
        return Mt_llt_.solve(Y.transpose()).transpose();
    }
    // M_h V S1 + N_h V = R and M_h Y S2 + N_h Y = M_h V, on truncated data
    const ProjectedSolveResult a = proj_first_->solve(truncate_rank(R, rank_));
    if (!a.converged)
        throw NumericalError("kmk: first projected solve stalled");
    LowRankMatrix w = truncate_rank(a.Z, rank_);
    w.left = Mh_ * w.left;
    const ProjectedSolveResult b = proj_second_->solve(w);
    if (!b.converged)
        throw NumericalError("kmk: second projected solve stalled");
    return Mt_llt_.solve(b.Z.transpose()).transpose();
}

std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind, const SpaceTimeMatrices& mats,
                                                    const PcgConfig& config)
{
    switch (kind) {
    case PreconditionerKind::none: return std::make_unique<IdentityPreconditioner>();
    case PreconditionerKind::sylvester: return std::make_unique<SylvesterPreconditioner>(mats, config);
    case PreconditionerKind::kmk: return std::make_unique<KmkPreconditioner>(mats, config);
    }
    throw std::invalid_argument("unknown preconditioner");
}

namespace {

double trace_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    return (A.array() * B.array()).sum();
}

}  // namespace

SolveReport matrix_pcg(const KronOperator& op, const Eigen::MatrixXd& G, const PcgConfig& config,
                       const Preconditioner* precond)
{
    config.validate();
    if (G.rows() != op.space_size() || G.cols() != op.time_size())
        throw std::invalid_argument("matrix_pcg: right-hand side does not match the operator");
    const auto start = std::chrono::steady_clock::now();
    const IdentityPreconditioner identity;
    const Preconditioner& P = precond ? *precond : identity;

    SolveReport rep;
    const double gnorm = G.norm();
    const double scale = operator_scale(op);
    rep.U = Eigen::MatrixXd::Zero(G.rows(), G.cols());
    auto finish = [&]() {
        rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rep.preconditioner_fallbacks = P.fallbacks();
        return rep;
    };
    if (gnorm == 0.0) {
        rep.converged = true;
        rep.backward_errors.push_back(0.0);
        rep.residual_norms.push_back(0.0);
        return finish();
    }

    Eigen::MatrixXd R = G;
    Eigen::MatrixXd Z = P.apply(R);
    Eigen::MatrixXd D = Z;
    double gamma = trace_inner(R, Z);
    for (int k = 0; k < config.max_iterations; ++k) {
        const Eigen::MatrixXd W = op.apply(D);
        const double delta = trace_inner(D, W);
        if (!std::isfinite(gamma) || !std::isfinite(delta) || delta <= 0.0) {
            rep.message = "breakdown at iteration " + std::to_string(k + 1);
            return finish();
        }
        const double alpha = gamma / delta;
        rep.U += alpha * D;
        R = G - op.apply(rep.U);
        rep.iterations = k + 1;
        const double rnorm = R.norm();
        rep.residual_norms.push_back(rnorm);
        rep.backward_errors.push_back(backward_error(rnorm, gnorm, rep.U.norm(), scale));
        if (config.on_iterate)
            config.on_iterate(k + 1, rep.U);
        if (rep.backward_errors.back() <= config.tolerance) {
            rep.converged = true;
            return finish();
        }
        Z = P.apply(R);
        const double gamma_next = trace_inner(R, Z);
        D = Z + (gamma_next / gamma) * D;
        gamma = gamma_next;
    }
    rep.message = "maximum number of iterations reached";
    return finish();
}

}  // namespace stwave
