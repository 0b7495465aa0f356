#include "stwave/reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <spdlog/spdlog.h>

#include "stwave/mateq_direct.hpp"
#include "stwave/spline.hpp"

namespace stwave {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t grid_size(const std::vector<std::vector<double>>& axes)
{
    std::size_t n = 1;
    for (const auto& a : axes)
        n *= a.size();
    return n;
}

// Mode-a products of a tensor (first index fastest) with mats[a], a = 0..d-1.
Eigen::VectorXd tensor_apply(const std::vector<Eigen::MatrixXd>& mats, Eigen::VectorXd x)
{
    const int d = static_cast<int>(mats.size());
    std::vector<Eigen::Index> dims(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a)
        dims[static_cast<std::size_t>(a)] = mats[static_cast<std::size_t>(a)].cols();
    for (int a = 0; a < d; ++a) {
        const Eigen::MatrixXd& A = mats[static_cast<std::size_t>(a)];
        Eigen::Index pre = 1, post = 1;
        for (int b = 0; b < a; ++b)
            pre *= dims[static_cast<std::size_t>(b)];
        for (int b = a + 1; b < d; ++b)
            post *= dims[static_cast<std::size_t>(b)];
        const Eigen::Index n = dims[static_cast<std::size_t>(a)], m = A.rows();
        Eigen::VectorXd y(pre * m * post);
        for (Eigen::Index p = 0; p < post; ++p) {
            const Eigen::Map<const Eigen::MatrixXd> Xp(x.data() + p * pre * n, pre, n);
            Eigen::Map<Eigen::MatrixXd> Yp(y.data() + p * pre * m, pre, m);
            Yp.noalias() = Xp * A.transpose();
        }
        x = std::move(y);
        dims[static_cast<std::size_t>(a)] = m;
    }
    return x;
}

// Composite Gauss rule on the pieces between sorted breakpoints, each piece
// split into subintervals no longer than h.
void composite_rule(std::vector<double> breaks, double h, int npts, std::vector<double>& x, std::vector<double>& w)
{
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    const GaussLegendre gl = gauss_legendre(npts);
    x.clear();
    w.clear();
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i], b = breaks[i + 1];
        const int m = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-12)));
        const double len = (b - a) / m;
        for (int j = 0; j < m; ++j) {
            const double lo = a + j * len;
            for (int q = 0; q < npts; ++q) {
                x.push_back(lo + 0.5 * len * (gl.nodes[static_cast<std::size_t>(q)] + 1.0));
                w.push_back(0.5 * len * gl.weights[static_cast<std::size_t>(q)]);
            }
        }
    }
}

Eigen::VectorXd sample_grid(const SpaceFunction& f, const std::vector<std::vector<double>>& axes)
{
    const int d = static_cast<int>(axes.size());
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid_size(axes)));
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        for (int a = 0; a < d; ++a)
            x[static_cast<std::size_t>(a)] = axes[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
        out[k] = f(x);
        for (int a = 0; a < d; ++a) {
            if (++idx[static_cast<std::size_t>(a)] < axes[static_cast<std::size_t>(a)].size())
                break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    return out;
}

double radial_g(const RadialProfile& u0, double s)
{
    return s * u0.value(std::abs(s));
}

}  // namespace

GridEvaluator pointwise_evaluator(std::function<double(double, std::span<const double>)> f)
{
    return [f = std::move(f)](double t, const std::vector<std::vector<double>>& axes) {
        return sample_grid([&](std::span<const double> x) { return f(t, x); }, axes);
    };
}

double dalembert_radial(const RadialProfile& u0, double c, double r, double t)
{
    const double ct = c * t;
    if (r < 1e-8) {
        // limit g'(ct) = u0(ct) + ct u0'(ct); the difference stays off the origin
        if (ct == 0.0)
            return u0.value(r);
        const double h = std::min(1e-6, 0.5 * ct);
        return u0.value(ct) + ct * (u0.value(ct + h) - u0.value(ct - h)) / (2.0 * h);
    }
    return (radial_g(u0, r + ct) + radial_g(u0, r - ct)) / (2.0 * r);
}

double dalembert_planar(const RadialProfile& u0, double c, double x, double t)
{
    const double s = x - 0.5, ct = c * t;
    return 0.5 * (u0.value(std::abs(s - ct)) + u0.value(std::abs(s + ct)));
}

RadialSeries::RadialSeries(const RadialProfile& u0, double c, int cutoff, double R) : c_(c), R_(R)
{
    if (cutoff < 1 || !(R > 0.0))
        throw std::invalid_argument("RadialSeries: cutoff must be positive");
    // coefficients up to 8K; the block (K, 8K] measures the decay of the tail
    const int K = cutoff, M = 8 * cutoff;
    std::vector<double> breaks{0.0, R};
    for (double k : u0.kinks)
        if (k > 0.0 && k < R)
            breaks.push_back(k);
    std::vector<double> x, w;
    composite_rule(breaks, R / (4.0 * M), 8, x, w);
    Eigen::VectorXd all = Eigen::VectorXd::Zero(M);
    for (std::size_t q = 0; q < x.size(); ++q) {
        const double gw = radial_g(u0, x[q]) * w[q] * 2.0 / R;
        if (gw == 0.0)
            continue;
        for (int n = 1; n <= M; ++n)
            all[n - 1] += gw * std::sin(n * kPi * x[q] / R);
    }
    beta_ = all.head(K);
    tail_ = all.tail(M - K).cwiseAbs().sum();
    const double env1 = all.segment(K, K).cwiseAbs().maxCoeff();
    const double env2 = all.segment(M / 2, M - M / 2).cwiseAbs().maxCoeff();
    if (env2 > 0.0) {
        const double p = std::log(env1 / env2) / std::log(4.0);
        if (!(p > 1.05)) {
            tail_ = std::numeric_limits<double>::infinity();
        } else {
            const double C = env2 * std::pow(0.5 * M, p);
            tail_ += C * std::pow(static_cast<double>(M), 1.0 - p) / (p - 1.0);
        }
    }
}

double RadialSeries::value(double r, double t) const
{
    double v = 0.0;
    for (int n = 1; n <= cutoff(); ++n) {
        const double k = n * kPi / R_;
        const double s = r < 1e-8 ? k : std::sin(k * r) / r;
        v += beta_[n - 1] * std::cos(c_ * k * t) * s;
    }
    return v;
}

double RadialSeries::tail_bound(double r) const
{
    return tail_ / std::max(r, 1e-8);
}

void SpectralSolution::duhamel(const TimeFunction& a, double t, Eigen::VectorXd& s, Eigen::VectorXd& c) const
{
    s = Eigen::VectorXd::Zero(lambda_.size());
    c = Eigen::VectorXd::Zero(lambda_.size());
    if (t <= 0.0)
        return;
    const Eigen::ArrayXd omega = lambda_.array().sqrt();
    // a quarter period of the fastest mode per subinterval
    const double h = std::min(t, 0.5 * kPi / std::max(omega.maxCoeff(), 1.0));
    std::vector<double> x, w;
    composite_rule({0.0, t}, h, 8, x, w);
    for (std::size_t q = 0; q < x.size(); ++q) {
        const double wa = w[q] * a(x[q]);
        if (wa == 0.0)
            continue;
        const Eigen::ArrayXd arg = omega * (t - x[q]);
        s.array() += wa * arg.sin();
        c.array() += wa * arg.cos();
    }
}

Eigen::VectorXd SpectralSolution::modes(double t, int deriv) const
{
    const Eigen::ArrayXd omega = lambda_.array().sqrt();
    const Eigen::ArrayXd cs = (omega * t).cos(), sn = (omega * t).sin();
    Eigen::ArrayXd w;
    switch (deriv) {
    case 0: w = a_.array() * cs + b_.array() * sn / omega; break;
    case 1: w = -a_.array() * omega * sn + b_.array() * cs; break;
    case 2: w = -lambda_.array() * (a_.array() * cs + b_.array() * sn / omega); break;
    default: throw std::invalid_argument("SpectralSolution: derivative order must be 0, 1 or 2");
    }
    Eigen::VectorXd s, c;
    for (const Forcing& f : forcing_) {
        duhamel(f.time, t, s, c);
        switch (deriv) {
        case 0: w += f.coefficients.array() * s.array() / omega; break;
        case 1: w += f.coefficients.array() * c.array(); break;
        default: w += f.coefficients.array() * (f.time(t) - omega * s.array()); break;
        }
    }
    return w.matrix();
}

Eigen::VectorXd SpectralSolution::forcing_modes(double t) const
{
    Eigen::VectorXd f = Eigen::VectorXd::Zero(lambda_.size());
    for (const Forcing& term : forcing_)
        f += term.time(t) * term.coefficients;
    return f;
}

Eigen::VectorXd SpectralSolution::grid(double t, const std::vector<std::vector<double>>& axes) const
{
    if (static_cast<int>(axes.size()) != dim_)
        throw std::invalid_argument("SpectralSolution: grid dimension mismatch");
    std::vector<Eigen::MatrixXd> S;
    for (const auto& ax : axes) {
        Eigen::MatrixXd Sa(static_cast<Eigen::Index>(ax.size()), K_);
        for (Eigen::Index i = 0; i < Sa.rows(); ++i)
            for (int n = 1; n <= K_; ++n)
                Sa(i, n - 1) = std::numbers::sqrt2 * std::sin(n * kPi * ax[static_cast<std::size_t>(i)]);
        S.push_back(std::move(Sa));
    }
    return tensor_apply(S, modes(t, 0));
}

double SpectralSolution::value(double t, std::span<const double> x) const
{
    std::vector<std::vector<double>> axes;
    for (double xi : x)
        axes.push_back({xi});
    return grid(t, axes)[0];
}

double SpectralSolution::energy(double t) const
{
    const Eigen::VectorXd w = modes(t, 0), wd = modes(t, 1);
    return (wd.array().square() / lambda_.array()).sum() + w.squaredNorm();
}

SpectralSolution spectral_solve(const WaveProblem& problem, int cutoff, double tail_tolerance)
{
    problem.validate();
    if (cutoff < 1)
        throw std::invalid_argument("spectral_solve: cutoff must be positive");
    if (problem.forcing_general)
        throw std::invalid_argument("spectral_solve: forcing must be separable");
    const int d = problem.dim, K = cutoff;
    SpectralSolution sol;
    sol.dim_ = d;
    sol.K_ = K;
    sol.c_ = problem.c;
    sol.T_ = problem.T;

    std::vector<double> breaks{0.0, 0.5, 1.0};
    if (problem.u0_radial)
        for (double k : problem.u0_radial->kinks)
            if (k > 0.0 && k < 0.5) {
                breaks.push_back(0.5 - k);
                breaks.push_back(0.5 + k);
            }
    const double per_unit = std::max(64, d == 3 ? 2 * K : 4 * K);
    std::vector<double> x, w;
    composite_rule(breaks, 1.0 / per_unit, d == 3 ? 4 : 5, x, w);
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    Eigen::MatrixXd E(K, static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index q = 0; q < E.cols(); ++q)
        for (int n = 1; n <= K; ++n)
            E(n - 1, q) = wv[q] * std::numbers::sqrt2 * std::sin(n * kPi * x[static_cast<std::size_t>(q)]);
    const std::vector<Eigen::MatrixXd> Es(static_cast<std::size_t>(d), E);
    const std::vector<std::vector<double>> axes(static_cast<std::size_t>(d), x);
    const std::vector<Eigen::MatrixXd> Ws(static_cast<std::size_t>(d), Eigen::MatrixXd(wv.transpose()));

    // coefficients and the Parseval defect ||g||^2 - sum_n g_n^2
    auto project = [&](const SpaceFunction& g, Eigen::VectorXd& coef) {
        const Eigen::VectorXd vals = sample_grid(g, axes);
        coef = tensor_apply(Es, vals);
        const double norm2 = tensor_apply(Ws, vals.cwiseAbs2().eval())[0];
        return std::sqrt(std::max(0.0, norm2 - coef.squaredNorm()));
    };

    const std::size_t modes = static_cast<std::size_t>(std::pow(K, d));
    sol.lambda_.resize(static_cast<Eigen::Index>(modes));
    for (std::size_t m = 0; m < modes; ++m) {
        std::size_t r = m;
        double n2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double n = static_cast<double>(r % static_cast<std::size_t>(K) + 1);
            n2 += n * n;
            r /= static_cast<std::size_t>(K);
        }
        sol.lambda_[static_cast<Eigen::Index>(m)] = problem.c * problem.c * kPi * kPi * n2;
    }
    const double omega_tail = std::abs(problem.c) * kPi * (K + 1);

    double tail = 0.0;
    if (problem.u0_radial || problem.u0)
        tail += project([&](std::span<const double> p) { return problem.initial_value(p); }, sol.a_);
    else
        sol.a_ = Eigen::VectorXd::Zero(sol.lambda_.size());
    if (problem.u1)
        tail += project(problem.u1, sol.b_) / omega_tail;
    else
        sol.b_ = Eigen::VectorXd::Zero(sol.lambda_.size());
    for (const SeparableTerm& term : problem.forcing) {
        SpectralSolution::Forcing f{term.time, {}};
        const double defect = project(term.space, f.coefficients);
        double amax = 0.0;
        for (int i = 0; i <= 200; ++i)
            amax = std::max(amax, std::abs(term.time(problem.T * i / 200.0)));
        tail += problem.T * amax * defect / omega_tail;
        sol.forcing_.push_back(std::move(f));
    }
    sol.tail_ = tail;
    sol.tail_ok_ = tail <= tail_tolerance;
    if (!sol.tail_ok_)
        spdlog::warn("spectral series with cutoff {} has tail estimate {:.3e} above {:.1e}", K, tail, tail_tolerance);
    return sol;
}

GridEvaluator reference_evaluator(const WaveProblem& problem, const ReferenceOptions& options)
{
    problem.validate();
    const bool closed = problem.u0_radial && !problem.u1 && problem.forcing.empty() && !problem.forcing_general;
    if (closed && problem.dim == 1) {
        return pointwise_evaluator([u0 = *problem.u0_radial, c = problem.c](double t, std::span<const double> x) {
            return dalembert_planar(u0, c, x[0], t);
        });
    }
    if (closed && problem.dim == 3) {
        return pointwise_evaluator([u0 = *problem.u0_radial, c = problem.c](double t, std::span<const double> x) {
            return dalembert_radial(u0, c, radius_from_center(x), t);
        });
    }
    auto sol = std::make_shared<SpectralSolution>(spectral_solve(problem, options.cutoff, options.tail_tolerance));
    return [sol](double t, const std::vector<std::vector<double>>& axes) { return sol->grid(t, axes); };
}

GridEvaluator solution_evaluator(const Eigen::MatrixXd& U, const TimeMatrices& tm, const SpaceMatrices& sm)
{
    return [U, &tm, &sm](double t, const std::vector<std::vector<double>>& axes) {
        const Eigen::VectorXd a = U * time_basis_values(tm, t, 2);
        const Eigen::VectorXd b = U * time_basis_values(tm, t, 0);
        return evaluate_space_grid(sm, a, &b, axes);
    };
}

void CnConfig::validate() const
{
    if (steps < 1)
        throw std::invalid_argument("crank-nicolson: steps must be at least 1");
    if (!(inner_tolerance > 0.0) || max_inner_iterations < 1)
        throw std::invalid_argument("crank-nicolson: invalid inner solver settings");
}

double discrete_energy(const SpaceMatrices& sm, const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    return 0.5 * v.dot(sm.M * v) + 0.5 * u.dot(sm.N * u);
}

CnTrajectory crank_nicolson_solve(const WaveProblem& problem, const SpaceMatrices& sm, const CnConfig& config)
{
    problem.validate();
    config.validate();
    if (problem.forcing_general)
        throw std::invalid_argument("crank-nicolson: forcing must be separable");
    const auto start = std::chrono::steady_clock::now();
    const int n = sm.size();
    const double dt = problem.T / config.steps;

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> mass;
    mass.setTolerance(1e-13);
    mass.setMaxIterations(config.max_inner_iterations);
    mass.compute(sm.M);
    auto project = [&](const Eigen::VectorXd& rhs) {
        Eigen::VectorXd x = mass.solve(rhs);
        if (mass.info() != Eigen::Success && mass.error() > 1e-10)
            throw NumericalError("crank-nicolson: L2 projection of the initial data did not converge");
        return x;
    };

    CnTrajectory traj;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
    if (problem.u0_radial || problem.u0) {
        const SpaceFunction u0 = [&problem](std::span<const double> x) { return problem.initial_value(x); };
        u = project(project_space_function(sm, u0, problem.u0_radial ? &*problem.u0_radial : nullptr));
    }
    if (problem.u1)
        v = project(project_space_function(sm, problem.u1));
    std::vector<Eigen::VectorXd> loads;
    for (const SeparableTerm& term : problem.forcing)
        loads.push_back(project_space_function(sm, term.space));
    auto load = [&](double t) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        for (std::size_t j = 0; j < loads.size(); ++j)
            f += problem.forcing[j].time(t) * loads[j];
        return f;
    };

    const SparseMatrix A = sm.M + (0.25 * dt * dt) * sm.N;
    const SparseMatrix B = sm.M - (0.25 * dt * dt) * sm.N;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(config.inner_tolerance);
    cg.setMaxIterations(config.max_inner_iterations);
    cg.compute(A);

    traj.times.push_back(0.0);
    traj.u.push_back(u);
    traj.v.push_back(v);
    Eigen::VectorXd f_now = load(0.0);
    for (int step = 1; step <= config.steps; ++step) {
        const double t = step * dt;
        const Eigen::VectorXd f_next = load(t);
        const Eigen::VectorXd rhs = B * v - dt * (sm.N * u) + (0.5 * dt) * (f_now + f_next);
        Eigen::VectorXd v_next = cg.solveWithGuess(rhs, v);
        if (cg.info() != Eigen::Success)
            throw NumericalError("crank-nicolson: inner solver did not converge at step " + std::to_string(step));
        traj.inner_iterations.push_back(static_cast<int>(cg.iterations()));
        u += (0.5 * dt) * (v + v_next);
        v = std::move(v_next);
        f_now = f_next;
        traj.times.push_back(t);
        traj.u.push_back(u);
        traj.v.push_back(v);
    }
    traj.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return traj;
}

GridEvaluator trajectory_evaluator(const CnTrajectory& traj, const SpaceMatrices& sm)
{
    return [&traj, &sm](double t, const std::vector<std::vector<double>>& axes) {
        const auto& ts = traj.times;
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        const std::size_t k = std::min<std::size_t>(
            static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - ts.begin() - 1, 0)), ts.size() - 2);
        const double theta = std::clamp((t - ts[k]) / (ts[k + 1] - ts[k]), 0.0, 1.0);
        const Eigen::VectorXd a = (1.0 - theta) * traj.u[k] + theta * traj.u[k + 1];
        return evaluate_space_grid(sm, a, nullptr, axes);
    };
}

SpaceTimeMesh mesh_of(const TimeMatrices& tm, const SpaceMatrices& sm)
{
    return {sm.dim, tm.basis.knots().breakpoints(), sm.basis1d.knots().breakpoints()};
}

SpaceTimeMesh mesh_of(const CnTrajectory& traj, const SpaceMatrices& sm)
{
    return {sm.dim, traj.times, sm.basis1d.knots().breakpoints()};
}

namespace {

double l2_squared(const GridEvaluator& numeric, const GridEvaluator& exact, const SpaceTimeMesh& mesh, int points,
                  int depth)
{
    const double pieces = std::ldexp(1.0, depth);
    const GaussLegendre gl = gauss_legendre(points);
    auto refine = [&](const std::vector<double>& breaks, std::vector<double>& x, std::vector<double>& w) {
        x.clear();
        w.clear();
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            const double h = (breaks[i + 1] - breaks[i]) / pieces;
            for (int s = 0; s < static_cast<int>(pieces); ++s)
                for (int q = 0; q < points; ++q) {
                    x.push_back(breaks[i] + h * (s + 0.5 * (gl.nodes[static_cast<std::size_t>(q)] + 1.0)));
                    w.push_back(0.5 * h * gl.weights[static_cast<std::size_t>(q)]);
                }
        }
    };
    std::vector<double> tx, tw, sx, sw;
    refine(mesh.time_breaks, tx, tw);
    refine(mesh.space_breaks, sx, sw);
    const std::vector<std::vector<double>> axes(static_cast<std::size_t>(mesh.dim), sx);
    const Eigen::Map<const Eigen::VectorXd> w1(sw.data(), static_cast<Eigen::Index>(sw.size()));
    Eigen::VectorXd W = w1;
    for (int a = 1; a < mesh.dim; ++a) {
        Eigen::VectorXd next(W.size() * w1.size());
        for (Eigen::Index j = 0; j < w1.size(); ++j)
            next.segment(j * W.size(), W.size()) = W * w1[j];
        W = std::move(next);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < tx.size(); ++k) {
        const Eigen::VectorXd diff = numeric(tx[k], axes) - exact(tx[k], axes);
        sum += tw[k] * W.dot(diff.cwiseAbs2());
    }
    return sum;
}

}  // namespace

L2Error l2_error_spacetime(const GridEvaluator& numeric, const GridEvaluator& exact, const SpaceTimeMesh& mesh,
                           const L2Options& options)
{
    if (options.points < 1 || options.depth < 0)
        throw std::invalid_argument("l2_error_spacetime: invalid quadrature options");
    if (mesh.time_breaks.size() < 2 || mesh.space_breaks.size() < 2 || mesh.dim < 1)
        throw std::invalid_argument("l2_error_spacetime: empty mesh");
    L2Error out;
    out.error = std::sqrt(l2_squared(numeric, exact, mesh, options.points, options.depth));
    if (options.estimate_uncertainty && options.depth > 0)
        out.uncertainty =
            std::abs(out.error - std::sqrt(l2_squared(numeric, exact, mesh, options.points, options.depth - 1)));
    return out;
}

}  // namespace stwave
