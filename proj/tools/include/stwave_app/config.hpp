#pragma once

// Flat key = value run configuration (TOML subset: strings, numbers,
// booleans, arrays of integers, '#' comments).

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stwave::app {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string name = "run";
    std::string case_name = "case1";  // case1, case2, smooth, ode-bvp, ode-ivp
    int dimension = 1;
    std::vector<int> refinements{8, 16, 32};  // N_t, with N_h = N_t per axis
    std::string solver = "galerkin";          // pcg-sylv, pcg-kmk, galerkin, cn, dense-oracle
    double tolerance = 1e-5;
    double inner_tolerance = 1e-8;
    int max_iterations = 1000;
    int truncation_rank = 4;
    int large_space_threshold = 1024;
    double cn_tolerance = 1e-6;
    int cutoff = 96;
    int l2_points = 3;
    int l2_depth = 3;
    std::vector<std::string> orders{"1*/3", "1/3", "2/4"};
    std::string output = "out";
    std::uint64_t seed = 1;

    bool is_ode() const { return case_name == "ode-bvp" || case_name == "ode-ivp"; }
    /// Throws ConfigError on invalid values or incompatible combinations.
    void validate() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace stwave::app
