#include "stwave/galerkin.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

#include "stwave/mateq_direct.hpp"

namespace stwave {

namespace {

constexpr double kDropRatio = 1e-10;

Eigen::MatrixXd sparse_lu_solve(const SparseMatrix& K, const Eigen::MatrixXd& b)
{
    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(K);
    lu.factorize(K);
    if (lu.info() != Eigen::Success)
        throw NumericalError("shifted sparse matrix is singular");
    Eigen::MatrixXd x = lu.solve(b);
    const double scale = K.norm() * x.norm() + b.norm();
    if (!x.allFinite() || (K * x - b).norm() > 1e-8 * scale)
        throw NumericalError("shifted sparse matrix is numerically singular");
    return x;
}

Eigen::MatrixXd sparse_solve(const SparseMatrix& K, const Eigen::MatrixXd& b, int direct_limit, double cg_tol,
                             bool definite = true)
{
    if (!definite)
        return sparse_lu_solve(K, b);
    if (K.rows() < direct_limit) {
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(K);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("sparse LDLT failed");
        const Eigen::VectorXd d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (!(d.minCoeff() > 1e-14 * dmax))
            throw NumericalError("shifted sparse matrix is numerically singular");
        return ldlt.solve(b);
    }
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg(K);
    cg.setTolerance(cg_tol);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 4 * K.rows()));
    Eigen::MatrixXd x(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        x.col(j) = cg.solve(b.col(j));
        if (cg.info() != Eigen::Success)
            throw NumericalError("inner conjugate gradients did not converge");
    }
    return x;
}

}  // namespace

SpectralInterval estimate_pencil_bounds(const SparseMatrix& A, const SparseMatrix& M, int iterations)
{
    const Eigen::Index n = A.rows();
    if (n == 0)
        throw std::invalid_argument("estimate_pencil_bounds: empty pencil");
    const int direct_limit = 50000;
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
    double hi = 0.0;
    for (int it = 0; it < iterations; ++it) {
        x = sparse_solve(M, A * x, direct_limit, 1e-10);
        x /= std::sqrt(x.dot(M * x));
        hi = x.dot(A * x);
    }
    // Inverse iteration converges much faster; the smallest modes are smooth.
    Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
    double lo = 0.0;
    for (int it = 0; it < std::max(4, iterations / 3); ++it) {
        y = sparse_solve(A, M * y, direct_limit, 1e-10);
        y /= std::sqrt(y.dot(M * y));
        lo = y.dot(A * y);
    }
    if (!(lo > 0.0) || !(hi >= lo))
        throw NumericalError("pencil bounds: pencil is not positive definite");
    return {lo, hi};
}

SpectralInterval exact_pencil_bounds(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M)
{
    const SpdPencil p = decompose_pencil(A, M);
    if (!(p.lambda(0) > 0.0))
        throw NumericalError("pencil bounds: pencil is not positive definite");
    return {p.lambda(0), p.lambda(p.lambda.size() - 1)};
}

double adaptive_shift(const SpectralInterval& bounds, std::span<const double> ritz, int grid)
{
    if (!(bounds.lo > 0.0) || !(bounds.hi >= bounds.lo))
        throw std::invalid_argument("adaptive_shift: need 0 < lo <= hi");
    if (ritz.empty() || bounds.hi == bounds.lo)
        return std::sqrt(bounds.lo * bounds.hi);
    const double a = std::log(bounds.lo), b = std::log(bounds.hi);
    double best = bounds.lo, best_val = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
        const double s = std::exp(a + (b - a) * g / (grid - 1));
        double val = 0.0;  // log of the product ratio
        for (const double th : ritz)
            val += std::log(std::abs(s - th) + 1e-300) - std::log(std::abs(s + th));
        if (val > best_val) {
            best_val = val;
            best = s;
        }
    }
    return std::clamp(best, bounds.lo, bounds.hi);
}

std::vector<double> ritz_values(const Eigen::MatrixXd& Ahat, const Eigen::MatrixXd& Mhat)
{
    if (Ahat.rows() == 0)
        return {};
    const SpdPencil p = decompose_pencil(Ahat, Mhat);
    return {p.lambda.data(), p.lambda.data() + p.lambda.size()};
}

ShiftedSparseSolver::ShiftedSparseSolver(SparseMatrix A, SparseMatrix M, int direct_limit, double cg_tolerance)
    : A_(std::move(A)), M_(std::move(M)), direct_limit_(direct_limit), cg_tol_(cg_tolerance)
{
    if (A_.rows() != M_.rows() || A_.rows() != A_.cols())
        throw std::invalid_argument("ShiftedSparseSolver: size mismatch");
}

Eigen::MatrixXd ShiftedSparseSolver::solve(double sigma, const Eigen::MatrixXd& b) const
{
    SparseMatrix K = A_ + sigma * M_;
    K.makeCompressed();
    return sparse_solve(K, b, direct_limit_, cg_tol_, sigma >= 0.0);
}

Eigen::MatrixXd ShiftedDenseSolver::solve(double sigma, const Eigen::MatrixXd& b) const
{
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A_ + sigma * M_);
    if (!(lu.rcond() > 1e-14))
        throw NumericalError("shifted dense matrix is numerically singular");
    return lu.solve(b);
}

Eigen::MatrixXd solve_with_retry(const ShiftedSolve& solve, double sigma, const Eigen::MatrixXd& b)
{
    try {
        return solve(sigma, b);
    } catch (const NumericalError&) {
        return solve(1.1 * sigma, b);
    }
}

RationalKrylovBasis::RationalKrylovBasis(const Eigen::MatrixXd& seed) : V_(seed.rows(), 0)
{
    append(seed);
}

int RationalKrylovBasis::append(const Eigen::MatrixXd& candidates)
{
    int added = 0;
    for (Eigen::Index j = 0; j < candidates.cols(); ++j) {
        Eigen::VectorXd v = candidates.col(j);
        const double pre = v.norm();
        if (!(pre > 0.0) || !std::isfinite(pre))
            continue;
        for (int pass = 0; pass < 2; ++pass)
            v -= V_ * (V_.transpose() * v);
        const double post = v.norm();
        if (!(post >= kDropRatio * pre))
            continue;
        V_.conservativeResize(Eigen::NoChange, V_.cols() + 1);
        V_.col(V_.cols() - 1) = v / post;
        ++added;
    }
    return added;
}

void RationalKrylovBasis::record_step(double shift, int added)
{
    shifts_.push_back(shift);
    added_.push_back(added);
}

int extend_basis(RationalKrylovBasis& basis, const ShiftFamily& family, double shift, int k)
{
    if (!(shift > 0.0))
        throw std::invalid_argument("extend_basis: shift must be positive");
    if (k < 0 || k >= basis.dim()) {
        basis.record_step(shift, 0);
        return 0;
    }
    const Eigen::VectorXd v = basis.matrix().col(k);
    Eigen::MatrixXd cand(v.size(), family.second ? 2 : 1);
    cand.col(0) = solve_with_retry(family.first, shift, v);
    if (family.second)
        cand.col(1) = solve_with_retry(family.second, std::sqrt(shift), v);
    const int added = basis.append(cand);
    basis.record_step(shift, added);
    return added;
}

Eigen::MatrixXd solve_reduced(const ReducedProblem& red)
{
    const Eigen::Index kv = red.Mh.rows(), kw = red.Mt.rows();
    const Eigen::MatrixXd K = Eigen::kroneckerProduct(red.Qt, red.Mh).eval() +
                              Eigen::kroneckerProduct(red.St, red.Nh).eval() +
                              Eigen::kroneckerProduct(red.Mt, red.Qh).eval();
    const Eigen::MatrixXd Gm = red.G1 * red.G2.transpose();
    const Eigen::VectorXd g = Gm.reshaped();
    Eigen::VectorXd y;
    const Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) {
        y = llt.solve(g);
        y += llt.solve(g - K * y);
    } else {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
        if (!(lu.rcond() > 1e-15))
            throw NumericalError("reduced system is singular");
        y = lu.solve(g);
        y += lu.solve(g - K * y);
    }
    const double scale = K.norm() * y.norm() + g.norm();
    if (!y.allFinite() || (scale > 0.0 && (g - K * y).norm() > 1e-12 * scale))
        throw NumericalError("reduced solve inaccurate");
    return y.reshaped(kv, kw);
}

namespace {

// Greedy order spreading consecutive poles apart on a log scale.
std::vector<double> spread_order(std::vector<double> poles)
{
    std::sort(poles.begin(), poles.end());
    std::vector<double> uniq;
    for (const double p : poles)
        if (uniq.empty() || std::abs(p - uniq.back()) > 1e-8 * std::max(std::abs(p), 1e-300))
            uniq.push_back(p);
    auto key = [](double p) { return std::log(std::abs(p) + 1e-300) + (p < 0.0 ? 1000.0 : 0.0); };
    std::vector<double> out;
    std::vector<bool> used(uniq.size(), false);
    double mean = 0.0;
    for (const double p : uniq)
        mean += key(p) / static_cast<double>(uniq.size());
    while (out.size() < uniq.size()) {
        std::size_t best = 0;
        double best_val = -1.0;
        for (std::size_t i = 0; i < uniq.size(); ++i) {
            if (used[i])
                continue;
            double d = std::numeric_limits<double>::infinity();
            if (out.empty())
                d = -std::abs(key(uniq[i]) - mean);
            for (const double q : out)
                d = std::min(d, std::abs(key(uniq[i]) - key(q)));
            if (best_val == -1.0 || d > best_val) {
                best_val = d;
                best = i;
            }
        }
        used[best] = true;
        out.push_back(uniq[best]);
    }
    return out;
}

}  // namespace

ProjectedSylvesterSolver::ProjectedSylvesterSolver(SparseMatrix M, SparseMatrix A, Eigen::MatrixXd P,
                                                   Eigen::MatrixXd Q, double tolerance, int max_dim,
                                                   int direct_limit)
    : M_(std::move(M)), A_(std::move(A)), P_(std::move(P)), Q_(std::move(Q)), tol_(tolerance), max_dim_(max_dim),
      shifted_(A_, M_, direct_limit)
{
    if (P_.rows() != Q_.rows() || P_.rows() != P_.cols() || M_.rows() != A_.rows())
        throw std::invalid_argument("ProjectedSylvesterSolver: size mismatch");
    const Eigen::VectorXcd ev = Eigen::PartialPivLU<Eigen::MatrixXd>(Q_).solve(P_).eigenvalues();
    std::vector<double> re(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        re[static_cast<std::size_t>(i)] = ev(i).real();
    poles_ = spread_order(std::move(re));
}

ProjectedSolveResult ProjectedSylvesterSolver::solve(const LowRankMatrix& F) const
{
    ProjectedSolveResult out;
    const Eigen::Index n = M_.rows(), m = P_.rows();
    const double fnorm = F.norm();
    if (fnorm == 0.0) {
        out.Z = Eigen::MatrixXd::Zero(n, m);
        out.converged = true;
        return out;
    }
    const int limit = max_dim_ > 0 ? max_dim_ : F.rank() * (static_cast<int>(m) + 1);
    RationalKrylovBasis basis(F.left);
    const ShiftedSolve solve = [this](double s, const Eigen::MatrixXd& b) { return shifted_.solve(s, b); };
    for (std::size_t step = 0;; ++step) {
        const Eigen::MatrixXd& V = basis.matrix();
        const Eigen::MatrixXd MV = M_ * V, AV = A_ * V;
        const Eigen::MatrixXd Mhat = V.transpose() * MV, Ahat = V.transpose() * AV;

        // X^T Mhat X = I, X^T Ahat X = diag(lambda); row i of X^{-1} Y solves
        // y (P + lambda_i Q) = f.
        const SpdPencil pen = decompose_pencil(0.5 * (Ahat + Ahat.transpose()), 0.5 * (Mhat + Mhat.transpose()));
        const Eigen::MatrixXd Ft = pen.X.transpose() * (V.transpose() * F.left) * F.right.transpose();
        Eigen::MatrixXd Yt(V.cols(), m);
        for (Eigen::Index i = 0; i < V.cols(); ++i) {
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu((P_ + pen.lambda(i) * Q_).transpose());
            Yt.row(i) = lu.solve(Ft.row(i).transpose()).transpose();
        }
        const Eigen::MatrixXd Y = pen.X * Yt;

        LowRankMatrix R;
        R.left.resize(n, F.rank() + 2 * V.cols());
        R.left << F.left, MV, AV;
        R.right.resize(m, F.rank() + 2 * V.cols());
        R.right << F.right, -(Y * P_).transpose(), -(Y * Q_).transpose();
        out.relative_residual = R.norm() / fnorm;
        out.basis_dim = basis.dim();
        out.converged = out.relative_residual <= tol_;
        if (out.converged || basis.dim() >= limit || basis.dim() >= n || step >= poles_.size()) {
            out.Z = V * Y;
            return out;
        }
        const double s = poles_[step];
        basis.record_step(s, basis.append(solve_with_retry(solve, s, F.left)));
    }
}

SpaceTimeMatrices collect_matrices(const TimeMatrices& tm, const SpaceMatrices& sm)
{
    return {sm.M, sm.N, sm.Q, tm.M, tm.N, tm.Q};
}

SolveReport galerkin_solve(const SpaceTimeMatrices& mats, const LowRankMatrix& G, const GalerkinConfig& config)
{
    if (!(config.tolerance > 0.0) || config.max_iterations < 1)
        throw std::invalid_argument("galerkin_solve: invalid configuration");
    const auto start = std::chrono::steady_clock::now();
    SolveReport rep;
    const Eigen::Index n = mats.Mh.rows(), m = mats.Mt.rows();
    const Eigen::MatrixXd St = mats.Nt + mats.Nt.transpose();
    const double gnorm = G.norm();
    const double scale = mats.Mh.norm() * mats.Qt.norm() + mats.Qh.norm() * mats.Mt.norm() +
                         2.0 * mats.Nh.norm() * mats.Nt.norm();
    auto finish = [&](SolveReport& r) {
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
    };
    if (gnorm == 0.0) {
        rep.U = Eigen::MatrixXd::Zero(n, m);
        rep.converged = true;
        rep.backward_errors.push_back(0.0);
        rep.residual_norms.push_back(0.0);
        return finish(rep);
    }

    RationalKrylovBasis V(G.left), W(G.right);
    const ShiftedSparseSolver sq(mats.Qh, mats.Mh, config.direct_limit, config.inner_tolerance);
    const ShiftedSparseSolver sn(mats.Nh, mats.Mh, config.direct_limit, config.inner_tolerance);
    const ShiftedDenseSolver tq(mats.Qt, mats.Mt), tn(St, mats.Mt);
    const ShiftFamily space_family{[&](double s, const Eigen::MatrixXd& b) { return sq.solve(s, b); },
                                   [&](double s, const Eigen::MatrixXd& b) { return sn.solve(s, b); }};
    const ShiftFamily time_family{[&](double s, const Eigen::MatrixXd& b) { return tq.solve(s, b); },
                                  [&](double s, const Eigen::MatrixXd& b) { return tn.solve(s, b); }};
    const SpectralInterval space_bounds = estimate_pencil_bounds(mats.Qh, mats.Mh);
    const SpectralInterval time_bounds = exact_pencil_bounds(mats.Qt, mats.Mt);

    Eigen::MatrixXd Y;
    for (int it = 0;; ++it) {
        const Eigen::MatrixXd& Vm = V.matrix();
        const Eigen::MatrixXd& Wm = W.matrix();
        const Eigen::MatrixXd MV = mats.Mh * Vm, NV = mats.Nh * Vm, QV = mats.Qh * Vm;
        const Eigen::MatrixXd QtW = mats.Qt * Wm, StW = St * Wm, MtW = mats.Mt * Wm;
        ReducedProblem red{Vm.transpose() * MV, Vm.transpose() * NV, Vm.transpose() * QV,
                           Wm.transpose() * MtW, Wm.transpose() * StW, Wm.transpose() * QtW,
                           Vm.transpose() * G.left, Wm.transpose() * G.right};
        rep.iterations = it + 1;
        rep.space_basis_dim = V.dim();
        rep.time_basis_dim = W.dim();
        bool accepted = true;
        try {
            Y = solve_reduced(red);
        } catch (const NumericalError&) {
            accepted = false;
        }
        if (accepted) {
            LowRankMatrix R;
            const Eigen::Index r = G.rank(), kv = Vm.cols();
            R.left.resize(n, r + 3 * kv);
            R.left << G.left, MV, NV, QV;
            R.right.resize(m, r + 3 * kv);
            R.right << G.right, -QtW * Y.transpose(), -StW * Y.transpose(), -MtW * Y.transpose();
            const double rnorm = R.norm();
            const double defect = (red.G1 * red.G2.transpose() - red.Mh * Y * red.Qt - red.Nh * Y * red.St -
                                   red.Qh * Y * red.Mt)
                                      .norm();
            rep.residual_norms.push_back(rnorm);
            rep.backward_errors.push_back(backward_error(rnorm, gnorm, Y.norm(), scale));
            rep.galerkin_defects.push_back(defect);
            if (rep.backward_errors.back() <= config.tolerance) {
                rep.converged = true;
                break;
            }
        }
        if (it + 1 >= config.max_iterations) {
            rep.message = "maximum number of iterations reached";
            break;
        }
        const double sv = adaptive_shift(space_bounds, ritz_values(red.Qh, red.Mh));
        const double sw = adaptive_shift(time_bounds, ritz_values(red.Qt, red.Mt));
        const int added = extend_basis(V, space_family, sv, it) + extend_basis(W, time_family, sw, it);
        if (added == 0 && it + 1 >= V.dim() && it + 1 >= W.dim()) {
            rep.message = "rational Krylov bases saturated";
            break;
        }
    }
    if (Y.size() == 0)
        Y = Eigen::MatrixXd::Zero(V.dim(), W.dim());
    if (Y.rows() != V.dim() || Y.cols() != W.dim()) {
        // last reduced solve failed after an extension; pad with zeros
        Eigen::MatrixXd Yp = Eigen::MatrixXd::Zero(V.dim(), W.dim());
        Yp.topLeftCorner(Y.rows(), Y.cols()) = Y;
        Y = Yp;
    }
    rep.U = V.matrix() * Y * W.matrix().transpose();
    return finish(rep);
}

}  // namespace stwave
