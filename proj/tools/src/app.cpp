#include "stwave_app/app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "stwave/discretization.hpp"
#include "stwave/galerkin.hpp"
#include "stwave/iterative.hpp"
#include "stwave/mateq_direct.hpp"
#include "stwave/reference.hpp"
#include "stwave/report.hpp"

namespace stwave::app {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string& s)
{
    // strtod reads the nan and inf spellings written by format_double
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw std::runtime_error("bad number '" + s + "' in csv");
    return v;
}

long long parse_integer(const std::string& s)
{
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("bad integer '" + s + "' in csv");
    return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path, std::string_view header)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw std::runtime_error("unexpected header in '" + path.string() + "'");
    std::vector<std::string> lines;
    while (std::getline(in, line))
        if (!line.empty())
            lines.push_back(line);
    return lines;
}

std::filesystem::path output_file(const RunConfig& cfg, const std::string& suffix)
{
    const std::filesystem::path dir(cfg.output);
    std::filesystem::create_directories(dir);
    return dir / (cfg.name + "_" + suffix + ".csv");
}

ReferenceOptions reference_options(const RunConfig& cfg)
{
    return {cfg.cutoff, 1e-3};
}

L2Options l2_options(const RunConfig& cfg)
{
    return {cfg.l2_points, cfg.l2_depth, false};
}

void require_wave(const RunConfig& cfg, std::string_view verb)
{
    if (cfg.is_ode())
        throw ConfigError(std::string(verb) + " needs a wave case, got '" + cfg.case_name + "'");
}

double backward_error_of(const KronOperator& op, const Eigen::MatrixXd& G, const Eigen::MatrixXd& U)
{
    const double r = (G - op.apply(U)).norm();
    return backward_error(r, G.norm(), U.norm(), operator_scale(op));
}

// Space-time solve at N_t = N_h = n per axis.
SolveRow solve_spacetime(const RunConfig& cfg, const WaveProblem& p, const GridEvaluator& exact, int n,
                         const std::string& solver)
{
    SolveRow row;
    row.refinement = n;
    row.solver = solver;
    const TimeMatrices tm = assemble_time_matrices(p.T, n);
    const SpaceMatrices sm = assemble_space_matrices(p, n);
    row.nt = tm.size();
    row.nh = sm.size();
    row.dof = static_cast<long long>(row.nt) * row.nh;
    const KronOperator op = build_stiffness(StiffnessFlavor::optimal, tm, sm);
    const LowRankMatrix G = assemble_rhs(p, tm, sm);
    const Eigen::MatrixXd Gd = G.dense();

    Eigen::MatrixXd U;
    bool converged = true;
    const auto t0 = Clock::now();
    if (solver == "dense-oracle") {
        U = dense_kron_solve(op, Gd);
        row.iters = 1;
    } else if (solver == "galerkin") {
        GalerkinConfig gc;
        gc.tolerance = cfg.tolerance;
        gc.max_iterations = cfg.max_iterations;
        gc.inner_tolerance = cfg.inner_tolerance;
        SolveReport rep = galerkin_solve(collect_matrices(tm, sm), G, gc);
        U = std::move(rep.U);
        converged = rep.converged;
        row.iters = rep.iterations;
    } else {
        PcgConfig pc;
        pc.tolerance = cfg.tolerance;
        pc.max_iterations = cfg.max_iterations;
        pc.preconditioner = solver == "pcg-sylv" ? PreconditionerKind::sylvester : PreconditionerKind::kmk;
        pc.large_space_threshold = cfg.large_space_threshold;
        pc.truncation_rank = cfg.truncation_rank;
        pc.inner_tolerance = cfg.inner_tolerance;
        const SpaceTimeMatrices mats = collect_matrices(tm, sm);
        const auto pre = make_preconditioner(pc.preconditioner, mats, pc);
        SolveReport rep = matrix_pcg(op, Gd, pc, pre.get());
        U = std::move(rep.U);
        converged = rep.converged;
        row.iters = rep.iterations;
    }
    row.seconds = elapsed(t0);
    row.backward_err = backward_error_of(op, Gd, U);
    row.l2_err = l2_error_spacetime(solution_evaluator(U, tm, sm), exact, mesh_of(tm, sm), l2_options(cfg)).error;
    row.status = converged ? "ok" : "not_converged";
    return row;
}

// Time stepping with n steps on the spatial basis with n intervals per axis.
SolveRow solve_cn(const RunConfig& cfg, const WaveProblem& p, const GridEvaluator& exact, int n)
{
    SolveRow row;
    row.refinement = n;
    row.solver = "cn";
    const SpaceMatrices sm = assemble_space_matrices(p, n);
    row.nt = n;
    row.nh = sm.size();
    row.dof = static_cast<long long>(n) * row.nh;
    CnConfig cc;
    cc.steps = n;
    cc.inner_tolerance = cfg.cn_tolerance;
    const auto t0 = Clock::now();
    const CnTrajectory traj = crank_nicolson_solve(p, sm, cc);
    row.seconds = elapsed(t0);
    for (int it : traj.inner_iterations)
        row.iters += it;
    row.backward_err = kNaN;
    row.l2_err = l2_error_spacetime(trajectory_evaluator(traj, sm), exact, mesh_of(traj, sm), l2_options(cfg)).error;
    row.status = "ok";
    return row;
}

SolveRow failed_row(int n, const std::string& solver)
{
    SolveRow row;
    row.refinement = n;
    row.solver = solver;
    row.backward_err = row.l2_err = row.seconds = kNaN;
    row.status = "failed";
    return row;
}

void check_dense_oracle(const RunConfig& cfg)
{
    if (cfg.solver != "dense-oracle")
        return;
    WaveProblem line;
    line.dim = 1;
    for (int n : cfg.refinements) {
        double dof = assemble_time_matrices(1.0, n).size();
        const int per_axis = assemble_space_matrices(line, n).size();
        for (int a = 0; a < cfg.dimension; ++a)
            dof *= per_axis;
        if (dof > static_cast<double>(kDenseKronCap))
            throw ConfigError("dense-oracle is limited to " + std::to_string(kDenseKronCap) +
                              " unknowns; refinement " + std::to_string(n) + " is too large");
    }
}

// Runs `solve_at` over the refinements; stops at the first failure.
template <class SolveAt>
RunOutcome run_rows(const std::filesystem::path& path, const std::vector<int>& refinements, SolveAt&& solve_at)
{
    RunOutcome out;
    out.csv = path;
    CsvWriter csv(path, kSolveHeader);
    for (int n : refinements) {
        for (SolveRow& row : solve_at(n)) {
            csv.write_line(format_row(row));
            spdlog::info("n={} {} iters={} backward={:.3e} l2={:.3e} {:.2f}s {}", n, row.solver, row.iters,
                         row.backward_err, row.l2_err, row.seconds, row.status);
            if (row.status != "ok") {
                out.exit_code = kExitSolverFailure;
                out.message = row.solver + " " + row.status + " at refinement " + std::to_string(n);
            }
        }
        if (out.exit_code != kExitOk)
            break;
    }
    return out;
}

template <class F>
SolveRow guarded(int n, const std::string& solver, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        spdlog::error("{} failed at refinement {}: {}", solver, n, e.what());
        return failed_row(n, solver);
    }
}

void write_study(const RunConfig& cfg, const std::string& suffix, const std::vector<StudyResult>& studies,
                 RunOutcome& out)
{
    out.csv = output_file(cfg, suffix);
    {
        CsvWriter csv(out.csv, kStudyHeader);
        for (const StudyResult& s : studies)
            for (const StudyRow& r : s.rows)
                csv.write_line(s.name + "," + r.metric + "," + std::to_string(r.refinement) + "," +
                               std::to_string(r.dof) + "," + format_double(r.value));
    }
    CsvWriter slopes(output_file(cfg, suffix + "_slopes"), kSlopeHeader);
    for (const StudyResult& s : studies) {
        std::vector<std::string> metrics;
        for (const StudyRow& r : s.rows)
            if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end())
                metrics.push_back(r.metric);
        for (const std::string& m : metrics)
            if (s.select(m).size() >= 2)
                slopes.write_line(s.name + "," + m + "," + format_double(s.slope_in_h(m)));
    }
}

StudyResult infsup_study(const RunConfig& cfg)
{
    const WaveProblem p = make_problem(cfg);
    StudyResult res;
    res.name = "infsup";
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    for (int n : cfg.refinements) {
        const TimeMatrices tm = assemble_time_matrices(p.T, n);
        const SpaceMatrices sm = assemble_space_matrices(p, n);
        const long long dof = static_cast<long long>(tm.size()) * sm.size();
        if (dof > kDenseDiagnosticsCap) {
            spdlog::warn("infsup: refinement {} has {} unknowns, above the dense cap {}; skipped", n, dof,
                         kDenseDiagnosticsCap);
            continue;
        }
        const Eigen::MatrixXd B = build_stiffness(StiffnessFlavor::optimal, tm, sm).dense();
        res.add(n, dof, "beta", infsup_constant(B, B, B));
        // a test-side change of basis leaves beta unchanged
        Eigen::VectorXd d(B.rows());
        for (Eigen::Index i = 0; i < d.size(); ++i)
            d[i] = scale(rng);
        res.add(n, dof, "beta_rescaled_test", infsup_constant(d.asDiagonal() * B, B, d.asDiagonal() * B * d.asDiagonal()));
    }
    return res;
}

}  // namespace

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    return std::string(buf, res.ptr);
}

std::string format_row(const SolveRow& r)
{
    return std::to_string(r.refinement) + "," + std::to_string(r.nt) + "," + std::to_string(r.nh) + "," +
           std::to_string(r.dof) + "," + r.solver + "," + std::to_string(r.iters) + "," +
           format_double(r.backward_err) + "," + format_double(r.l2_err) + "," + format_double(r.seconds) + "," +
           r.status;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view header) : out_(path)
{
    if (!out_)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << header << '\n' << std::flush;
}

void CsvWriter::write_line(const std::string& line)
{
    out_ << line << '\n' << std::flush;
}

std::vector<SolveRow> read_solve_csv(const std::filesystem::path& path)
{
    std::vector<SolveRow> rows;
    for (const std::string& line : read_lines(path, kSolveHeader)) {
        const auto c = split(line);
        if (c.size() != 10)
            throw std::runtime_error("expected 10 columns: " + line);
        SolveRow r;
        r.refinement = static_cast<int>(parse_integer(c[0]));
        r.nt = static_cast<int>(parse_integer(c[1]));
        r.nh = parse_integer(c[2]);
        r.dof = parse_integer(c[3]);
        r.solver = c[4];
        r.iters = parse_integer(c[5]);
        r.backward_err = parse_double(c[6]);
        r.l2_err = parse_double(c[7]);
        r.seconds = parse_double(c[8]);
        r.status = c[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<StudyCsvRow> read_study_csv(const std::filesystem::path& path)
{
    std::vector<StudyCsvRow> rows;
    for (const std::string& line : read_lines(path, kStudyHeader)) {
        const auto c = split(line);
        if (c.size() != 5)
            throw std::runtime_error("expected 5 columns: " + line);
        StudyCsvRow r;
        r.study = c[0];
        r.row.metric = c[1];
        r.row.refinement = static_cast<int>(parse_integer(c[2]));
        r.row.dof = parse_integer(c[3]);
        r.row.value = parse_double(c[4]);
        rows.push_back(std::move(r));
    }
    return rows;
}

WaveProblem make_problem(const RunConfig& cfg)
{
    require_wave(cfg, "this verb");
    if (cfg.case_name == "case1")
        return make_case1(cfg.dimension);
    if (cfg.case_name == "case2")
        return make_case2(cfg.dimension);
    return make_smooth(cfg.dimension);
}

RunOutcome run_solve(const RunConfig& cfg)
{
    require_wave(cfg, "solve");
    check_dense_oracle(cfg);
    const WaveProblem p = make_problem(cfg);
    const GridEvaluator exact = reference_evaluator(p, reference_options(cfg));
    return run_rows(output_file(cfg, "solve"), cfg.refinements, [&](int n) {
        return std::vector<SolveRow>{guarded(n, cfg.solver, [&] {
            return cfg.solver == "cn" ? solve_cn(cfg, p, exact, n) : solve_spacetime(cfg, p, exact, n, cfg.solver);
        })};
    });
}

RunOutcome run_compare_cn(const RunConfig& cfg)
{
    require_wave(cfg, "compare cn");
    if (cfg.solver == "cn")
        throw ConfigError("compare cn needs a space-time solver");
    check_dense_oracle(cfg);
    const WaveProblem p = make_problem(cfg);
    const GridEvaluator exact = reference_evaluator(p, reference_options(cfg));
    return run_rows(output_file(cfg, "compare_cn"), cfg.refinements, [&](int n) {
        return std::vector<SolveRow>{
            guarded(n, cfg.solver, [&] { return solve_spacetime(cfg, p, exact, n, cfg.solver); }),
            guarded(n, "cn", [&] { return solve_cn(cfg, p, exact, n); }),
        };
    });
}

RunOutcome run_study(const RunConfig& cfg, std::string_view study)
{
    RunOutcome out;
    std::vector<StudyResult> studies;
    if (study == "conditioning") {
        studies.push_back(condition_numbers(cfg.refinements));
        studies.push_back(equivalence_study(cfg.refinements));
    } else if (study == "infsup") {
        require_wave(cfg, "study infsup");
        studies.push_back(infsup_study(cfg));
    } else if (study == "ode1d") {
        if (!cfg.is_ode())
            throw ConfigError("study ode1d needs case ode-bvp or ode-ivp");
        const OdeKind kind = parse_ode_kind(cfg.case_name);
        for (const std::string& order : cfg.orders) {
            const OdePairing pairing = parse_ode_pairing(order);
            StudyResult r = ode1d_study(kind, pairing, cfg.refinements, ode_manufactured(kind));
            r.name = "ode1d-" + std::string(to_string(kind)) + "-" + std::string(to_string(pairing));
            studies.push_back(std::move(r));
        }
    } else {
        throw ConfigError("unknown study '" + std::string(study) + "'");
    }
    write_study(cfg, std::string(study), studies, out);
    return out;
}

}  // namespace stwave::app
