// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stwave/diagnostics.hpp"
#include "stwave/galerkin.hpp"
#include "stwave/iterative.hpp"
#include "stwave/mateq_direct.hpp"
#include "stwave/reference.hpp"
#include "stwave/report.hpp"

using namespace stwave;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.3e")
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + fmt(f, v[i]);
    return s + "]";
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

WaveProblem unit_problem(int dim)
{
    WaveProblem p;
    p.dim = dim;
    return p;
}

bool strictly_decreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            return false;
    return true;
}

// -- 1 ------------------------------------------------------------------------

Outcome infsup_optimality()
{
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        int dim, nt, nh;
    };
    std::vector<double> dev;
    for (const Case c : {Case{1, 4, 4}, Case{1, 8, 8}, Case{1, 8, 16}, Case{3, 4, 4}}) {
        const TimeMatrices tm = assemble_time_matrices(1.0, c.nt);
        const SpaceMatrices sm = assemble_space_matrices(make_case1(c.dim), c.nh);
        dev.push_back(std::abs(optimal_infsup(tm, sm) - 1.0));
    }
    const double secs = seconds_since(t0);
    bool pass = secs < 60.0;
    for (double d : dev)
        pass = pass && d <= 1e-8;
    return {pass, "|beta - 1| at 1D (4,4),(8,8),(8,16) and 3D (4,4^3) = " + join(dev) + ", " + fmt("%.1f", secs) +
                      " s (limit 60 s)"};
}

// -- 2 ------------------------------------------------------------------------

Outcome ode_observation()
{
    double worst_beta = 0.0, worst_diff = 0.0;
    for (OdeKind kind : {OdeKind::bvp, OdeKind::ivp}) {
        const OdeData data = ode_manufactured(kind);
        for (OdePairing p : {OdePairing::optimal_1_3, OdePairing::p1_3, OdePairing::p2_4})
            for (double beta : ode1d_study(kind, p, {4, 8, 16, 32}, data).values("beta"))
                worst_beta = std::max(worst_beta, std::abs(beta - 1.0));
        for (int n : {8, 16, 32, 64}) {
            const OdeSolution a = ode1d_solve(kind, OdePairing::optimal_1_3, n, data);
            const OdeSolution b = ode1d_solve(kind, OdePairing::p1_3, n, data);
            for (int i = 0; i < 1000; ++i) {
                const double x = (i + 0.5) / 1000.0;
                worst_diff = std::max(worst_diff, std::abs(a.evaluate(x) - b.evaluate(x)));
            }
        }
    }
    return {worst_beta <= 1e-8 && worst_diff <= 1e-10,
            "max |beta - 1| over 1*/3, 1/3, 2/4 x {4,8,16,32} x {bvp,ivp} = " + fmt("%.2e", worst_beta) +
                " (tol 1e-8); max |u_1*/3 - u_1/3| = " + fmt("%.2e", worst_diff) + " (tol 1e-10)"};
}

// -- 3 ------------------------------------------------------------------------

Outcome conditioning_slopes()
{
    const std::vector<int> levels{8, 16, 32, 64};
    const StudyResult r = condition_numbers(levels);
    struct Check {
        std::string label;
        double slope, target, tol;
    };
    std::vector<Check> checks{
        {"M_h", r.slope_in_h("kappa_Mh"), 0.0, 0.3},  {"M_t", r.slope_in_h("kappa_Mt"), 0.0, 0.3},
        {"N_h", r.slope_in_h("kappa_Nh"), -2.0, 0.3}, {"Q_h", r.slope_in_h("kappa_Qh"), -4.0, 0.4},
        {"Q_t", r.slope_in_h("kappa_Qt"), -4.0, 0.4},
    };
    const OdeData data = ode_manufactured(OdeKind::ivp);
    checks.push_back({"B_ode(1/3)", ode1d_study(OdeKind::ivp, OdePairing::p1_3, levels, data).slope_in_h("kappa_B"),
                      -2.0, 0.3});
    checks.push_back({"B_ode(2/4)", ode1d_study(OdeKind::ivp, OdePairing::p2_4, levels, data).slope_in_h("kappa_B"),
                      -2.0, 0.3});
    checks.push_back({"B_ode(1*/3)",
                      ode1d_study(OdeKind::ivp, OdePairing::optimal_1_3, levels, data).slope_in_h("kappa_B"), -4.0,
                      0.4});
    bool pass = true;
    std::string detail = "slopes in h over {8,16,32,64}:";
    for (const Check& c : checks) {
        const bool ok = std::abs(c.slope - c.target) <= c.tol;
        pass = pass && ok;
        detail += " " + c.label + "=" + fmt("%.2f", c.slope) + (ok ? "" : "(!)");
    }
    detail += "; informational: space-time B over {8,16,32} " + fmt("%.2f", r.slope_in_h("kappa_B"));
    return {pass, detail};
}

// -- 4 ------------------------------------------------------------------------

Outcome spectral_dichotomy()
{
    const StudyResult r = equivalence_study({8, 16, 32});
    const auto s = r.values("space_min");
    const auto t = r.values("time_min");
    const double spread = *std::max_element(s.begin(), s.end()) / *std::min_element(s.begin(), s.end());
    return {spread < 2.0 && strictly_decreasing(t),
            "space min ratios " + join(s, "%.4f") + " spread " + fmt("%.4f", spread) +
                " (< 2); time min ratios " + join(t) + " (strictly decreasing)"};
}

// -- 5 ------------------------------------------------------------------------

int pcg_iterations(PreconditionerKind kind, int nt, int nh, double tol)
{
    const WaveProblem p = make_case1(1);
    const TimeMatrices tm = assemble_time_matrices(p.T, nt);
    const SpaceMatrices sm = assemble_space_matrices(p, nh);
    const KronOperator op = build_stiffness(StiffnessFlavor::optimal, tm, sm);
    const SpaceTimeMatrices mats = collect_matrices(tm, sm);
    PcgConfig cfg;
    cfg.tolerance = tol;
    cfg.max_iterations = 5000;
    cfg.preconditioner = kind;
    const auto pre = make_preconditioner(kind, mats, cfg);
    const SolveReport rep = matrix_pcg(op, assemble_rhs(p, tm, sm).dense(), cfg, pre.get());
    return rep.converged ? rep.iterations : -1;
}

Outcome kmk_optimality()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> kmk, sylv;
    for (int nh : {16, 32, 64}) {
        kmk.push_back(pcg_iterations(PreconditionerKind::kmk, 8, nh, 1e-5));
        sylv.push_back(pcg_iterations(PreconditionerKind::sylvester, 8, nh, 1e-5));
    }
    const double secs = seconds_since(t0);
    const double ratio = *std::max_element(kmk.begin(), kmk.end()) / *std::min_element(kmk.begin(), kmk.end());
    const bool converged = *std::min_element(kmk.begin(), kmk.end()) > 0 &&
                           *std::min_element(sylv.begin(), sylv.end()) > 0;
    const bool sylv_grows = sylv.back() > sylv.front();
    return {converged && ratio <= 1.5 && sylv_grows && secs < 300.0,
            "N_t=8, N_h={16,32,64}, tol 1e-5: kmk iterations " + join(kmk, "%.0f") + " max/min " +
                fmt("%.2f", ratio) + " (<= 1.5); sylvester iterations " + join(sylv, "%.0f") +
                (sylv_grows ? " grow" : " do not grow") + "; " + fmt("%.1f", secs) + " s (limit 300 s)"};
}

// -- 6 ------------------------------------------------------------------------

Outcome solver_agreement()
{
    const WaveProblem p = make_case1(1);
    const TimeMatrices tm = assemble_time_matrices(p.T, 8);
    const SpaceMatrices sm = assemble_space_matrices(p, 32);
    const KronOperator op = build_stiffness(StiffnessFlavor::optimal, tm, sm);
    const SpaceTimeMatrices mats = collect_matrices(tm, sm);
    const LowRankMatrix G = assemble_rhs(p, tm, sm);
    const Eigen::MatrixXd Gd = G.dense();
    const double scale = operator_scale(op);

    std::vector<std::pair<std::string, Eigen::MatrixXd>> sols;
    sols.emplace_back("dense", dense_kron_solve(op, Gd));
    for (PreconditionerKind kind : {PreconditionerKind::sylvester, PreconditionerKind::kmk}) {
        PcgConfig cfg;
        cfg.tolerance = 1e-8;
        cfg.max_iterations = 5000;
        cfg.preconditioner = kind;
        const auto pre = make_preconditioner(kind, mats, cfg);
        sols.emplace_back("pcg-" + std::string(to_string(kind)), matrix_pcg(op, Gd, cfg, pre.get()).U);
    }
    GalerkinConfig gc;
    gc.tolerance = 1e-8;
    sols.emplace_back("galerkin", galerkin_solve(mats, G, gc).U);

    bool pass = true;
    std::string detail = "N_t=8, N_h=32; backward errors:";
    for (const auto& [name, U] : sols) {
        const double be = backward_error((Gd - op.apply(U)).norm(), Gd.norm(), U.norm(), scale);
        pass = pass && be <= 1e-5;
        detail += " " + name + "=" + fmt("%.1e", be);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < sols.size(); ++i)
        for (std::size_t j = i + 1; j < sols.size(); ++j)
            worst = std::max(worst, (sols[i].second - sols[j].second).norm() /
                                        std::max(sols[i].second.norm(), sols[j].second.norm()));
    pass = pass && worst <= 1e-4;
    return {pass, detail + " (<= 1e-5); max pairwise relative difference " + fmt("%.2e", worst) + " (<= 1e-4)"};
}

// -- 7 ------------------------------------------------------------------------

Outcome oracle_consistency()
{
    const WaveProblem p = make_case1(3);
    const RadialProfile& u0 = *p.u0_radial;
    const RadialSeries series(u0, p.c, 64);
    std::mt19937_64 rng(20240607);
    std::uniform_real_distribution<double> ur(0.01, 0.5), ut(0.0, p.T);
    int violations = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double r = ur(rng), t = ut(rng);
        const double diff = std::abs(series.value(r, t) - dalembert_radial(u0, p.c, r, t));
        const double bound = series.tail_bound(r);
        worst_ratio = std::max(worst_ratio, diff / bound);
        violations += diff > bound;
    }
    // u(., 0) against u0 on a grid through the exact evaluators
    const std::vector<double> axis{0.05, 0.2, 0.33, 0.41, 0.5, 0.58, 0.67, 0.79, 0.95};
    double worst_initial = 0.0;
    for (int dim : {1, 3}) {
        const WaveProblem q = make_case1(dim);
        const std::vector<std::vector<double>> axes(static_cast<std::size_t>(dim), axis);
        const Eigen::VectorXd v = reference_evaluator(q)(0.0, axes);
        Eigen::Index idx = 0;
        std::vector<double> x(static_cast<std::size_t>(dim));
        const auto n = static_cast<Eigen::Index>(axis.size());
        for (Eigen::Index flat = 0; flat < v.size(); ++flat) {
            Eigen::Index rem = flat;
            for (int a = 0; a < dim; ++a, rem /= n)
                x[static_cast<std::size_t>(a)] = axis[static_cast<std::size_t>(rem % n)];
            worst_initial = std::max(worst_initial, std::abs(v[idx++] - q.initial_value(x)));
        }
    }
    return {violations == 0 && worst_initial <= 1e-10,
            "series (cutoff 64) vs radial d'Alembert at 1000 seeded (r,t) points: " + std::to_string(violations) +
                " outside the truncation bound, max diff/bound " + fmt("%.3f", worst_ratio) +
                "; max |u(.,0) - u0| = " + fmt("%.1e", worst_initial) + " (tol 1e-10)"};
}

// -- 8 ------------------------------------------------------------------------

double spacetime_error(const WaveProblem& p, const GridEvaluator& exact, int n, const L2Options& l2)
{
    const TimeMatrices tm = assemble_time_matrices(p.T, n);
    const SpaceMatrices sm = assemble_space_matrices(p, n);
    GalerkinConfig gc;
    gc.tolerance = 1e-8;
    const SolveReport rep = galerkin_solve(collect_matrices(tm, sm), assemble_rhs(p, tm, sm), gc);
    if (!rep.converged)
        throw NumericalError("galerkin did not converge at n = " + std::to_string(n));
    return l2_error_spacetime(solution_evaluator(rep.U, tm, sm), exact, mesh_of(tm, sm), l2).error;
}

double cn_error(const WaveProblem& p, const GridEvaluator& exact, int n, const L2Options& l2)
{
    const SpaceMatrices sm = assemble_space_matrices(p, n);
    CnConfig cc;
    cc.steps = n;
    cc.inner_tolerance = 1e-10;
    const CnTrajectory traj = crank_nicolson_solve(p, sm, cc);
    return l2_error_spacetime(trajectory_evaluator(traj, sm), exact, mesh_of(traj, sm), l2).error;
}

Outcome low_regularity()
{
    bool pass = true;
    std::string detail;
    struct Run {
        int dim;
        std::vector<int> levels;
        L2Options l2;
    };
    for (const Run& run : {Run{1, {8, 16, 32}, {3, 3, false}}, Run{2, {8, 16, 32}, {3, 1, false}},
                           Run{3, {4, 8}, {2, 1, false}}}) {
        const WaveProblem p = make_case1(run.dim);
        const GridEvaluator exact = reference_evaluator(p);
        std::vector<double> err, h;
        for (int n : run.levels) {
            err.push_back(spacetime_error(p, exact, n, run.l2));
            h.push_back(1.0 / n);
        }
        const double rate = loglog_slope(h, err);
        const bool ok = strictly_decreasing(err) && (run.dim == 3 || rate > 0.0);
        pass = pass && ok;
        detail += "case1 " + std::to_string(run.dim) + "D errors " + join(err) + " rate " + fmt("%.2f", rate) +
                  (ok ? "" : " (!)") + "; ";
    }
    for (const Run& run : {Run{1, {16, 32, 64}, {3, 3, false}}, Run{3, {4, 8}, {2, 1, false}}}) {
        const WaveProblem p = make_case2(run.dim);
        const GridEvaluator exact = reference_evaluator(p);
        std::vector<double> st, cn;
        bool ok = true;
        for (int n : run.levels) {
            st.push_back(spacetime_error(p, exact, n, run.l2));
            cn.push_back(cn_error(p, exact, n, run.l2));
            ok = ok && st.back() <= cn.back();
        }
        pass = pass && ok;
        detail += "case2 " + std::to_string(run.dim) + "D space-time " + join(st) + " vs CN " + join(cn) +
                  (ok ? " (space-time <= CN)" : " (space-time > CN)") + "; ";
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

// -- 9 ------------------------------------------------------------------------

Outcome cn_sanity()
{
    // energy with f = 0 on discontinuous data
    const WaveProblem p2 = make_case2(1);
    const SpaceMatrices sm2 = assemble_space_matrices(p2, 64);
    CnConfig cc;
    cc.steps = 40;
    cc.inner_tolerance = 1e-14;
    const CnTrajectory traj = crank_nicolson_solve(p2, sm2, cc);
    const double e0 = discrete_energy(sm2, traj.u.front(), traj.v.front());
    double drift = 0.0;
    for (std::size_t k = 0; k < traj.u.size(); ++k)
        drift = std::max(drift, std::abs(discrete_energy(sm2, traj.u[k], traj.v[k]) - e0) / e0);

    // temporal order on the smooth problem, spatial error negligible at n = 128
    const WaveProblem p = make_smooth(1);
    const SpaceMatrices sm = assemble_space_matrices(p, 128);
    const GridEvaluator exact = reference_evaluator(p, {4, 1e-8});
    std::vector<double> dt, err;
    for (int steps : {8, 16, 32, 64}) {
        CnConfig c;
        c.steps = steps;
        c.inner_tolerance = 1e-12;
        const CnTrajectory tr = crank_nicolson_solve(p, sm, c);
        err.push_back(l2_error_spacetime(trajectory_evaluator(tr, sm), exact, mesh_of(tr, sm), {3, 2, false}).error);
        dt.push_back(p.T / steps);
    }
    const double slope = loglog_slope(dt, err);
    return {drift <= 1e-10 && std::abs(slope - 2.0) <= 0.2,
            "relative energy drift over 40 steps " + fmt("%.1e", drift) + " (<= 1e-10); errors " + join(err) +
                " slope in dt " + fmt("%.3f", slope) + " (2 +- 0.2)"};
}

// -- 10 -----------------------------------------------------------------------

Outcome kronecker_fidelity()
{
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> nt_dist(3, 16), dim_dist(1, 2);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int dim = dim_dist(rng);
        const int nt = nt_dist(rng);
        const int nh = dim == 1 ? nt_dist(rng) : std::uniform_int_distribution<int>(2, 4)(rng);
        WaveProblem p = unit_problem(dim);
        p.c = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
        const TimeMatrices tm = assemble_time_matrices(1.0, nt);
        const SpaceMatrices sm = assemble_space_matrices(p, nh);
        const StiffnessFlavor flavor = i % 2 ? StiffnessFlavor::general : StiffnessFlavor::optimal;
        const KronOperator op = build_stiffness(flavor, tm, sm);
        Eigen::MatrixXd U(sm.size(), tm.size());
        std::normal_distribution<double> nd;
        for (Eigen::Index k = 0; k < U.size(); ++k)
            U.data()[k] = nd(rng);
        const Eigen::MatrixXd AU = op.apply(U);
        const Eigen::VectorXd dense = op.dense() * Eigen::Map<const Eigen::VectorXd>(U.data(), U.size());
        const Eigen::VectorXd matrix_form = Eigen::Map<const Eigen::VectorXd>(AU.data(), AU.size());
        worst = std::max(worst, (matrix_form - dense).norm() / dense.norm());
    }
    return {worst <= 1e-12,
            "20 seeded instances (sizes <= 16 x 16, both operator flavors): max relative difference " +
                fmt("%.2e", worst) + " (<= 1e-12)"};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"inf-sup optimality", infsup_optimality},
        {"univariate inf-sup and identical ansatz spaces", ode_observation},
        {"conditioning slopes", conditioning_slopes},
        {"spectral equivalence dichotomy", spectral_dichotomy},
        {"kmk preconditioner optimality", kmk_optimality},
        {"solver cross-agreement", solver_agreement},
        {"oracle consistency", oracle_consistency},
        {"low-regularity convergence", low_regularity},
        {"time-stepping baseline sanity", cn_sanity},
        {"Kronecker fidelity", kronecker_fidelity},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        failures += !out.pass;
        std::printf("%s criterion %zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), seconds_since(t0), out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu of %zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
