// Kernels and solvers of the space-time discretization.
// Range arguments are N_t = N_h per axis unless named otherwise.

#include <benchmark/benchmark.h>

#include "stwave/galerkin.hpp"
#include "stwave/iterative.hpp"
#include "stwave/mateq_direct.hpp"
#include "stwave/reference.hpp"

using namespace stwave;

namespace {

struct Instance {
    WaveProblem problem;
    TimeMatrices tm;
    SpaceMatrices sm;
    KronOperator op;
    SpaceTimeMatrices mats;
    LowRankMatrix G;

    Instance(int dim, int n)
        : problem(make_case1(dim)),
          tm(assemble_time_matrices(problem.T, n)),
          sm(assemble_space_matrices(problem, n)),
          op(build_stiffness(StiffnessFlavor::optimal, tm, sm)),
          mats(collect_matrices(tm, sm)),
          G(assemble_rhs(problem, tm, sm))
    {
    }
};

void BM_SpaceAssembly(benchmark::State& state)
{
    const WaveProblem p = make_case1(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_space_matrices(p, static_cast<int>(state.range(1))));
}
BENCHMARK(BM_SpaceAssembly)->Args({1, 64})->Args({2, 32})->Args({3, 16})->Unit(benchmark::kMillisecond);

void BM_OperatorApply(benchmark::State& state)
{
    const Instance in(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const Eigen::MatrixXd U = Eigen::MatrixXd::Random(in.sm.size(), in.tm.size());
    for (auto _ : state)
        benchmark::DoNotOptimize(in.op.apply(U));
    state.counters["dof"] = static_cast<double>(U.size());
}
BENCHMARK(BM_OperatorApply)->Args({1, 64})->Args({2, 32})->Args({3, 16})->Unit(benchmark::kMicrosecond);

void BM_SymSylvesterSolve(benchmark::State& state)
{
    const Instance in(1, static_cast<int>(state.range(0)));
    const SymSylvesterSolver solver(Eigen::MatrixXd(in.mats.Mh), Eigen::MatrixXd(in.mats.Qh), in.mats.Mt, in.mats.Qt,
                                    1e-6);
    const Eigen::MatrixXd R = in.G.dense();
    for (auto _ : state)
        benchmark::DoNotOptimize(solver.solve(R));
}
BENCHMARK(BM_SymSylvesterSolve)->Arg(32)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Pcg(benchmark::State& state)
{
    const Instance in(1, static_cast<int>(state.range(1)));
    PcgConfig cfg;
    cfg.preconditioner = static_cast<PreconditionerKind>(state.range(0));
    const Eigen::MatrixXd G = in.G.dense();
    int iterations = 0;
    for (auto _ : state) {
        const auto pre = make_preconditioner(cfg.preconditioner, in.mats, cfg);
        iterations = matrix_pcg(in.op, G, cfg, pre.get()).iterations;
    }
    state.SetLabel(std::string(to_string(cfg.preconditioner)));
    state.counters["iterations"] = iterations;
}
BENCHMARK(BM_Pcg)
    ->ArgsProduct({{static_cast<int>(PreconditionerKind::sylvester), static_cast<int>(PreconditionerKind::kmk)},
                   {16, 32}})
    ->Unit(benchmark::kMillisecond);

void BM_Galerkin(benchmark::State& state)
{
    const Instance in(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    int iterations = 0;
    for (auto _ : state)
        iterations = galerkin_solve(in.mats, in.G).iterations;
    state.counters["iterations"] = iterations;
}
BENCHMARK(BM_Galerkin)->Args({1, 64})->Args({2, 16})->Args({3, 8})->Unit(benchmark::kMillisecond);

void BM_CrankNicolson(benchmark::State& state)
{
    const int dim = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
    const WaveProblem p = make_case2(dim);
    const SpaceMatrices sm = assemble_space_matrices(p, n);
    CnConfig cfg;
    cfg.steps = n;
    for (auto _ : state)
        benchmark::DoNotOptimize(crank_nicolson_solve(p, sm, cfg));
}
BENCHMARK(BM_CrankNicolson)->Args({1, 64})->Args({2, 16})->Args({3, 8})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
