#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stwave {

/// Profile u0(r) of a rotationally symmetric initial state around the box
/// center. `kinks` lists radii where the profile or its derivative jumps; they
/// drive quadrature subdivision.
struct RadialProfile {
    std::function<double(double)> value;
    std::vector<double> kinks;
    double support_radius = 0.5;
};

RadialProfile case1_profile();  // (1 - 5r) on r < 0.2
RadialProfile case2_profile();  // indicator of r < 0.2

using SpaceFunction = std::function<double(std::span<const double>)>;
using TimeFunction = std::function<double(double)>;

/// One term a(t) * b(x) of a separable forcing.
struct SeparableTerm {
    TimeFunction time;
    SpaceFunction space;
};

/// Wave equation u_tt - c^2 Laplace u = f on (0,T) x (0,1)^d with homogeneous
/// Dirichlet data.
struct WaveProblem {
    int dim = 1;
    double T = 1.0;
    double c = 1.0;

    /// Either a radial profile (around x = 0.5) or a general function.
    std::optional<RadialProfile> u0_radial;
    SpaceFunction u0;
    SpaceFunction u1;  // empty means zero

    std::vector<SeparableTerm> forcing;
    /// Non-separable forcing; solvers reject it.
    std::function<double(double, std::span<const double>)> forcing_general;

    std::string label = "custom";

    /// u0 at x, from whichever representation is set.
    double initial_value(std::span<const double> x) const;
    void validate() const;
};

/// Distance of x from the box center (0.5, ..., 0.5).
double radius_from_center(std::span<const double> x);

WaveProblem make_case1(int dim);
WaveProblem make_case2(int dim);
/// u0 = prod_a sqrt(2) sin(pi x_a), c = 1: a single eigenmode.
WaveProblem make_smooth(int dim);

}  // namespace stwave
