#include "stwave/mateq_direct.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/Eigenvalues>

namespace stwave {

namespace {

std::string residual_text(double r)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", r);
    return buf;
}

}  // namespace

SpdPencil decompose_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw std::invalid_argument("decompose_pencil: A and B must be square of equal size");
    const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (B + B.transpose()));
    if (llt.info() != Eigen::Success)
        throw NumericalError("decompose_pencil: B is not symmetric positive definite");
    const auto L = llt.matrixL();
    Eigen::MatrixXd C = L.solve(0.5 * (A + A.transpose()));
    C = L.solve(C.transpose().eval());
    C = 0.5 * (C + C.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success)
        throw NumericalError("decompose_pencil: eigensolver failed");
    SpdPencil p;
    p.lambda = es.eigenvalues();
    p.X = llt.matrixU().solve(es.eigenvectors());
    return p;
}

SymSylvesterSolver::SymSylvesterSolver(const Eigen::MatrixXd& M_h, const Eigen::MatrixXd& Q_h,
                                       const Eigen::MatrixXd& M_t, const Eigen::MatrixXd& Q_t,
                                       double check_tolerance)
    : M_h_(M_h), Q_h_(Q_h), M_t_(M_t), Q_t_(Q_t), space_(decompose_pencil(Q_h, M_h)),
      time_(decompose_pencil(Q_t, M_t)), check_tol_(check_tolerance)
{
    denom_.resize(space_.lambda.size(), time_.lambda.size());
    for (Eigen::Index i = 0; i < denom_.rows(); ++i)
        for (Eigen::Index j = 0; j < denom_.cols(); ++j) {
            const double s = space_.lambda(i) + time_.lambda(j);
            if (!(s > 0.0))
                throw NumericalError("SymSylvesterSolver: ill-posed, eigenvalue sum " + std::to_string(s));
            denom_(i, j) = s;
        }
}

Eigen::MatrixXd SymSylvesterSolver::solve(const Eigen::MatrixXd& R) const
{
    if (R.rows() != M_h_.rows() || R.cols() != M_t_.rows())
        throw std::invalid_argument("SymSylvesterSolver::solve: right-hand side has the wrong shape");
    const double rn = R.norm();
    if (rn == 0.0) {
        last_residual_ = 0.0;
        return Eigen::MatrixXd::Zero(R.rows(), R.cols());
    }
    Eigen::MatrixXd Rh = space_.X.transpose() * R * time_.X;
    Rh.array() /= denom_.array();
    Eigen::MatrixXd Z = space_.X * Rh * time_.X.transpose();
    last_residual_ = (M_h_ * Z * Q_t_.transpose() + Q_h_ * Z * M_t_ - R).norm() / rn;
    if (!(last_residual_ <= check_tol_))
        throw NumericalError("SymSylvesterSolver: relative residual " + residual_text(last_residual_) +
                             " above tolerance");
    return Z;
}

Eigen::MatrixXd solve_sym_sylvester(const Eigen::MatrixXd& M_h, const Eigen::MatrixXd& Q_h, const Eigen::MatrixXd& M_t,
                                    const Eigen::MatrixXd& Q_t, const Eigen::MatrixXd& R)
{
    return SymSylvesterSolver(M_h, Q_h, M_t, Q_t).solve(R);
}

ShiftedSylvesterSolver::ShiftedSylvesterSolver(const Eigen::MatrixXd& N_h, const Eigen::MatrixXd& M_h,
                                               const Eigen::MatrixXd& N_t, const Eigen::MatrixXd& M_t,
                                               double check_tolerance)
    : N_h_(N_h), M_h_(M_h), space_(decompose_pencil(N_h, M_h)), check_tol_(check_tolerance)
{
    setup_time(N_t, M_t);
}

ShiftedSylvesterSolver::ShiftedSylvesterSolver(const ShiftedSylvesterSolver& donor, const Eigen::MatrixXd& N_t,
                                               const Eigen::MatrixXd& M_t)
    : N_h_(donor.N_h_), M_h_(donor.M_h_), space_(donor.space_), check_tol_(donor.check_tol_)
{
    setup_time(N_t, M_t);
}

void ShiftedSylvesterSolver::setup_time(const Eigen::MatrixXd& N_t, const Eigen::MatrixXd& M_t)
{
    if (N_t.rows() != N_t.cols() || M_t.rows() != N_t.rows())
        throw std::invalid_argument("ShiftedSylvesterSolver: temporal matrices must be square of equal size");
    const Eigen::LLT<Eigen::MatrixXd> llt(M_t);
    if (llt.info() != Eigen::Success)
        throw NumericalError("ShiftedSylvesterSolver: temporal mass is not positive definite");
    S_ = llt.solve(N_t);
    const Eigen::ComplexSchur<Eigen::MatrixXd> cs(S_);
    if (cs.info() != Eigen::Success)
        throw NumericalError("ShiftedSylvesterSolver: Schur decomposition failed");
    schur_T_ = cs.matrixT();
    schur_U_ = cs.matrixU();

    const double scale = space_.lambda.cwiseAbs().maxCoeff() + schur_T_.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < space_.lambda.size(); ++i)
        for (Eigen::Index j = 0; j < schur_T_.rows(); ++j)
            if (std::abs(schur_T_(j, j) + space_.lambda(i)) <= 1e-14 * scale)
                throw NumericalError("ShiftedSylvesterSolver: singular shifted diagonal");
}

Eigen::MatrixXd ShiftedSylvesterSolver::solve(const Eigen::MatrixXd& R) const
{
    if (R.rows() != M_h_.rows() || R.cols() != S_.rows())
        throw std::invalid_argument("ShiftedSylvesterSolver::solve: right-hand side has the wrong shape");
    const double rn = R.norm();
    if (rn == 0.0) {
        last_residual_ = 0.0;
        return Eigen::MatrixXd::Zero(R.rows(), R.cols());
    }
    // X^{-1} = X^T M_h
    const Eigen::MatrixXd Rt = space_.X.transpose() * (M_h_ * R);
    const Eigen::MatrixXcd Rhat = Rt.cast<std::complex<double>>() * schur_U_;
    const Eigen::Index n = Rhat.rows(), m = Rhat.cols();
    Eigen::MatrixXcd What(n, m);
    // Row i solves w (T + lambda_i I) = r; T upper triangular, so forward sweep.
    for (Eigen::Index i = 0; i < n; ++i) {
        const double li = space_.lambda(i);
        for (Eigen::Index j = 0; j < m; ++j) {
            std::complex<double> s = Rhat(i, j);
            for (Eigen::Index k = 0; k < j; ++k)
                s -= What(i, k) * schur_T_(k, j);
            What(i, j) = s / (schur_T_(j, j) + li);
        }
    }
    const Eigen::MatrixXcd Wc = space_.X.cast<std::complex<double>>() * What * schur_U_.adjoint();
    const Eigen::MatrixXd W = Wc.real();
    const double wn = W.norm();
    if (Wc.imag().norm() > 1e-10 * std::max(wn, 1e-300))
        throw NumericalError("ShiftedSylvesterSolver: solution has a non-negligible imaginary part");

    const Eigen::MatrixXd HW = Eigen::LLT<Eigen::MatrixXd>(M_h_).solve(N_h_ * W);
    last_residual_ = (W * S_ + HW - R).norm() / rn;
    if (!(last_residual_ <= check_tol_))
        throw NumericalError("ShiftedSylvesterSolver: relative residual " + residual_text(last_residual_) +
                             " above tolerance");
    return W;
}

Eigen::MatrixXd solve_shifted_sylvester(const Eigen::MatrixXd& N_h, const Eigen::MatrixXd& M_h,
                                        const Eigen::MatrixXd& N_t, const Eigen::MatrixXd& M_t,
                                        const Eigen::MatrixXd& R)
{
    return ShiftedSylvesterSolver(N_h, M_h, N_t, M_t).solve(R);
}

Eigen::MatrixXd dense_kron_solve(const KronOperator& op, const Eigen::MatrixXd& G)
{
    const Eigen::Index ns = op.space_size(), nt = op.time_size();
    if (ns * nt > kDenseKronCap)
        throw std::invalid_argument("dense_kron_solve: " + std::to_string(ns * nt) + " unknowns exceed the cap of " +
                                    std::to_string(kDenseKronCap));
    if (G.rows() != ns || G.cols() != nt)
        throw std::invalid_argument("dense_kron_solve: right-hand side has the wrong shape");
    const Eigen::MatrixXd A = op.dense();
    const Eigen::VectorXd b = G.reshaped();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(b);
    x += lu.solve(b - A * x);  // one refinement sweep
    const double bn = b.norm();
    const double rel = (A * x - b).norm() / (A.norm() * x.norm() + bn);
    if (bn > 0.0 && !(rel < 1e-10))
        throw NumericalError("dense_kron_solve: normwise backward error " + std::to_string(rel) + " too large");
    return x.reshaped(ns, nt);
}

}  // namespace stwave
