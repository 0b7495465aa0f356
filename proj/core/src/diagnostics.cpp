#include "stwave/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include "stwave/mateq_direct.hpp"
#include "stwave/spline.hpp"

namespace stwave {

namespace {

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& G, const char* what)
{
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(what) + " is not symmetric positive definite");
    return llt;
}

// L_V^{-1} X L_U^{-T}
Eigen::MatrixXd whiten(const Eigen::LLT<Eigen::MatrixXd>& left, const Eigen::MatrixXd& X,
                       const Eigen::LLT<Eigen::MatrixXd>& right)
{
    const Eigen::MatrixXd Y = left.matrixL().solve(X);
    return right.matrixL().solve(Y.transpose()).transpose();
}

void check_dense(Eigen::Index n, const char* what)
{
    if (n > kDenseDiagnosticsCap)
        throw std::invalid_argument(std::string(what) + ": size exceeds the dense diagnostics cap");
}

WaveProblem unit_problem()
{
    WaveProblem p;
    p.dim = 1;
    p.c = 1.0;
    p.T = 1.0;
    return p;
}

}  // namespace

double infsup_constant(const Eigen::MatrixXd& B, const Eigen::MatrixXd& gram_trial, const Eigen::MatrixXd& gram_test)
{
    if (gram_trial.rows() != B.cols() || gram_test.rows() != B.rows() || gram_trial.cols() != gram_trial.rows() ||
        gram_test.cols() != gram_test.rows())
        throw std::invalid_argument("infsup_constant: dimension mismatch");
    check_dense(std::max(B.rows(), B.cols()), "infsup_constant");
    const auto lu = cholesky(gram_trial, "trial Gram");
    const auto lv = cholesky(gram_test, "test Gram");
    const Eigen::MatrixXd C = whiten(lv, B, lu);
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(C);
    // rectangular B: the infimum runs over the trial side
    if (B.rows() < B.cols())
        return 0.0;
    return svd.singularValues()(svd.singularValues().size() - 1);
}

double optimal_infsup(const TimeMatrices& tm, const SpaceMatrices& sm)
{
    const Eigen::MatrixXd B = build_stiffness(StiffnessFlavor::optimal, tm, sm).dense();
    return infsup_constant(B, B, B);
}

double condition_number(const Eigen::MatrixXd& A)
{
    check_dense(std::max(A.rows(), A.cols()), "condition_number");
    Eigen::VectorXd s;
    if (A.rows() == A.cols() && (A - A.transpose()).norm() <= 1e-14 * A.norm())
        s = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs();
    else
        s = Eigen::BDCSVD<Eigen::MatrixXd>(A).singularValues();
    if (s.size() == 0 || s.minCoeff() == 0.0)
        return std::numeric_limits<double>::infinity();
    return s.maxCoeff() / s.minCoeff();
}

EquivalenceRatio spectral_equivalence_ratio(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N, const Eigen::MatrixXd& M)
{
    if (Q.rows() != N.cols() || M.rows() != N.rows())
        throw std::invalid_argument("spectral_equivalence_ratio: dimension mismatch");
    check_dense(N.rows(), "spectral_equivalence_ratio");
    const Eigen::MatrixXd X = whiten(cholesky(M, "M"), N, cholesky(Q, "Q"));
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues();
    return {s(s.size() - 1) * s(s.size() - 1), s(0) * s(0)};
}

void StudyResult::add(int refinement, long long dof, std::string metric, double value)
{
    rows.push_back({refinement, dof, std::move(metric), value});
}

std::vector<const StudyRow*> StudyResult::select(const std::string& metric) const
{
    std::vector<const StudyRow*> out;
    for (const StudyRow& r : rows)
        if (r.metric == metric)
            out.push_back(&r);
    return out;
}

std::vector<double> StudyResult::values(const std::string& metric) const
{
    std::vector<double> out;
    for (const StudyRow* r : select(metric))
        out.push_back(r->value);
    return out;
}

double StudyResult::slope_in_h(const std::string& metric) const
{
    std::vector<double> h, v;
    for (const StudyRow* r : select(metric)) {
        h.push_back(1.0 / r->refinement);
        v.push_back(r->value);
    }
    return loglog_slope(h, v);
}

double StudyResult::slope_in_dof(const std::string& metric) const
{
    std::vector<double> d, v;
    for (const StudyRow* r : select(metric)) {
        d.push_back(static_cast<double>(r->dof));
        v.push_back(r->value);
    }
    return loglog_slope(d, v);
}

double loglog_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("loglog_slope: need at least two matching samples");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("loglog_slope: samples must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0)
        throw std::invalid_argument("loglog_slope: abscissae coincide");
    return (n * sxy - sx * sy) / den;
}

StudyResult condition_numbers(const std::vector<int>& refinements, StiffnessFlavor flavor, int max_stiffness_size)
{
    StudyResult res;
    res.name = "conditioning";
    res.metadata = {{"flavor", flavor == StiffnessFlavor::optimal ? "optimal" : "general"}, {"dimension", "1"}};
    const WaveProblem p = unit_problem();
    int previous = 0;
    for (int n : refinements) {
        if (n <= previous)
            throw std::invalid_argument("condition_numbers: refinements must increase");
        previous = n;
        const TimeMatrices tm = assemble_time_matrices(p.T, n);
        const SpaceMatrices sm = assemble_space_matrices(p, n);
        res.add(n, n, "kappa_Mt", condition_number(tm.M));
        res.add(n, n, "kappa_Nt", condition_number(tm.N));
        res.add(n, n, "kappa_Qt", condition_number(tm.Q));
        res.add(n, n, "kappa_Mh", condition_number(Eigen::MatrixXd(sm.M)));
        res.add(n, n, "kappa_Nh", condition_number(Eigen::MatrixXd(sm.N)));
        res.add(n, n, "kappa_Qh", condition_number(Eigen::MatrixXd(sm.Q)));
        if (static_cast<long long>(n) * n <= std::min(max_stiffness_size, kDenseDiagnosticsCap))
            res.add(n, static_cast<long long>(n) * n, "kappa_B", condition_number(build_stiffness(flavor, tm, sm).dense()));
    }
    return res;
}

StudyResult equivalence_study(const std::vector<int>& refinements)
{
    StudyResult res;
    res.name = "equivalence";
    res.metadata = {{"dimension", "1"}};
    const WaveProblem p = unit_problem();
    for (int n : refinements) {
        const TimeMatrices tm = assemble_time_matrices(p.T, n);
        const SpaceMatrices sm = assemble_space_matrices(p, n);
        const EquivalenceRatio s =
            spectral_equivalence_ratio(Eigen::MatrixXd(sm.Q), Eigen::MatrixXd(sm.N), Eigen::MatrixXd(sm.M));
        // our N_t carries the second derivative on the row index
        const EquivalenceRatio t = spectral_equivalence_ratio(tm.Q, tm.N.transpose(), tm.M);
        res.add(n, n, "space_min", s.min);
        res.add(n, n, "space_max", s.max);
        res.add(n, n, "time_min", t.min);
        res.add(n, n, "time_max", t.max);
    }
    return res;
}

std::string_view to_string(OdeKind kind)
{
    return kind == OdeKind::bvp ? "bvp" : "ivp";
}

std::string_view to_string(OdePairing pairing)
{
    switch (pairing) {
    case OdePairing::optimal_1_3: return "1*/3";
    case OdePairing::p1_3: return "1/3";
    case OdePairing::p2_4: return "2/4";
    }
    return "1/3";
}

OdeKind parse_ode_kind(std::string_view name)
{
    if (name == "bvp" || name == "ode-bvp")
        return OdeKind::bvp;
    if (name == "ivp" || name == "ode-ivp")
        return OdeKind::ivp;
    throw std::invalid_argument("unknown ODE problem '" + std::string(name) + "'");
}

OdePairing parse_ode_pairing(std::string_view name)
{
    if (name == "1*/3" || name == "optimal")
        return OdePairing::optimal_1_3;
    if (name == "1/3")
        return OdePairing::p1_3;
    if (name == "2/4")
        return OdePairing::p2_4;
    throw std::invalid_argument("unknown order pairing '" + std::string(name) + "'");
}

OdeData ode_manufactured(OdeKind kind)
{
    constexpr double pi = std::numbers::pi;
    if (kind == OdeKind::bvp) {
        return {[](double x) { return pi * pi * (1.0 + x) * std::sin(pi * x) - 2.0 * pi * std::cos(pi * x); },
                [](double x) { return (1.0 + x) * std::sin(pi * x); }};
    }
    return {[](double x) { return -pi * pi * std::cos(pi * x); }, [](double x) { return 1.0 - std::cos(pi * x); }};
}

OdeSolution ode1d_solve(OdeKind kind, OdePairing pairing, int intervals, const OdeData& data)
{
    if (intervals < 2)
        throw std::invalid_argument("ode1d_solve: need at least two intervals");
    if (!data.f)
        throw std::invalid_argument("ode1d_solve: forcing missing");
    const int deg = pairing == OdePairing::p2_4 ? 3 : 2;
    const BoundaryCondition bc = kind == OdeKind::bvp ? BoundaryCondition::dirichlet : BoundaryCondition::terminal_h2;
    auto test = std::make_shared<SplineBasis>(make_uniform_basis(0.0, 1.0, intervals, deg, bc));
    const GramSet1D tt = assemble_gram_1d(*test, *test);

    Eigen::MatrixXd B, GU;
    std::function<Eigen::VectorXd(double)> trial_values;
    if (pairing == OdePairing::optimal_1_3) {
        // trial functions -v_j'': form, trial Gram and test Gram coincide
        B = tt.Q;
        GU = tt.Q;
        trial_values = [test](double x) { return Eigen::VectorXd(-eval_basis(*test, x, 2)); };
    } else {
        auto trial = std::make_shared<SplineBasis>(make_uniform_basis(0.0, 1.0, intervals, deg - 2, BoundaryCondition::none));
        B = -assemble_gram_1d(*test, *trial).N;
        GU = assemble_gram_1d(*trial, *trial).M;
        trial_values = [trial](double x) { return eval_basis(*trial, x, 0); };
    }

    const QuadratureRule quad(test->knots().breakpoints(), 8);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(test->size());
    for (std::size_t q = 0; q < quad.points().size(); ++q)
        F += quad.weights()[q] * data.f(quad.points()[q]) * eval_basis(*test, quad.points()[q], 0);
    Eigen::VectorXd c;
    if (pairing == OdePairing::optimal_1_3) {
        // Q = A^T A with A the weighted samples of v_j''; two triangular solves
        // with R from A = QR avoid squaring the condition number of A
        const QuadratureRule q2(test->knots().breakpoints(), deg);
        Eigen::MatrixXd A(static_cast<Eigen::Index>(q2.points().size()), test->size());
        for (std::size_t q = 0; q < q2.points().size(); ++q)
            A.row(static_cast<Eigen::Index>(q)) =
                std::sqrt(q2.weights()[q]) * eval_basis(*test, q2.points()[q], 2).transpose();
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        const Eigen::MatrixXd R = qr.matrixQR().topRows(test->size()).triangularView<Eigen::Upper>();
        c = R.triangularView<Eigen::Upper>().solve(R.transpose().triangularView<Eigen::Lower>().solve(F));
    } else {
        c = B.fullPivLu().solve(F);
    }

    OdeSolution sol;
    sol.dof = static_cast<int>(B.cols());
    sol.condition = condition_number(B);
    sol.beta = infsup_constant(B, GU, tt.Q);
    sol.evaluate = [trial_values, c](double x) { return trial_values(x).dot(c); };
    double err2 = 0.0;
    for (std::size_t q = 0; q < quad.points().size(); ++q) {
        const double x = quad.points()[q];
        const double e = sol.evaluate(x) - (data.u ? data.u(x) : 0.0);
        err2 += quad.weights()[q] * e * e;
    }
    sol.l2_error = std::sqrt(err2);
    return sol;
}

StudyResult ode1d_study(OdeKind kind, OdePairing pairing, const std::vector<int>& refinements, const OdeData& data)
{
    StudyResult res;
    res.name = "ode1d";
    res.metadata = {{"problem", std::string(to_string(kind))}, {"orders", std::string(to_string(pairing))}};
    int previous = 0;
    for (int n : refinements) {
        if (n <= previous)
            throw std::invalid_argument("ode1d_study: refinements must increase");
        previous = n;
        const OdeSolution s = ode1d_solve(kind, pairing, n, data);
        res.add(n, s.dof, "l2_error", s.l2_error);
        res.add(n, s.dof, "kappa_B", s.condition);
        res.add(n, s.dof, "beta", s.beta);
    }
    return res;
}

}  // namespace stwave
