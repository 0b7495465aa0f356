#pragma once

// Command-line verbs and their CSV outputs.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "stwave/diagnostics.hpp"
#include "stwave/problem.hpp"
#include "stwave_app/config.hpp"

namespace stwave::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIoError = 1;
inline constexpr int kExitSolverFailure = 2;
inline constexpr int kExitConfigError = 3;

inline constexpr std::string_view kSolveHeader = "refinement,Nt,Nh,dof,solver,iters,backward_err,l2_err,seconds,status";
inline constexpr std::string_view kStudyHeader = "study,metric,refinement,dof,value";
inline constexpr std::string_view kSlopeHeader = "study,metric,slope_h";

/// One solve per refinement. Nh counts all spatial functions; backward_err is
/// nan for time stepping, every field but status is nan after an exception.
struct SolveRow {
    int refinement = 0;
    int nt = 0;
    long long nh = 0;
    long long dof = 0;
    std::string solver;
    long long iters = 0;
    double backward_err = 0.0;
    double l2_err = 0.0;
    double seconds = 0.0;
    std::string status;  // ok, not_converged, failed
};

struct StudyCsvRow {
    std::string study;
    StudyRow row;
};

/// Shortest scientific form that round-trips; "nan" and "inf" as such.
std::string format_double(double v);
std::string format_row(const SolveRow& r);

/// Writes the header on construction and flushes every row, so a failed run
/// leaves the rows produced so far.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::string_view header);
    void write_line(const std::string& line);

private:
    std::ofstream out_;
};

std::vector<SolveRow> read_solve_csv(const std::filesystem::path& path);
std::vector<StudyCsvRow> read_study_csv(const std::filesystem::path& path);

/// Wave problem of a non-ODE configuration.
WaveProblem make_problem(const RunConfig& cfg);

struct RunOutcome {
    int exit_code = kExitOk;
    std::filesystem::path csv;
    std::string message;
};

/// `solve`: writes <output>/<name>_solve.csv.
RunOutcome run_solve(const RunConfig& cfg);
/// `study conditioning|infsup|ode1d`: writes <output>/<name>_<study>.csv and
/// a slope summary <output>/<name>_<study>_slopes.csv.
RunOutcome run_study(const RunConfig& cfg, std::string_view study);
/// `compare cn`: space-time solver against time stepping with N_t steps on
/// the same spatial basis; writes <output>/<name>_compare_cn.csv.
RunOutcome run_compare_cn(const RunConfig& cfg);

/// Full command line: verbs solve, study <kind>, compare cn with --config,
/// --out, --seed and --verbose. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace stwave::app
