#include "stwave/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stwave {

RadialProfile case1_profile()
{
    RadialProfile p;
    p.value = [](double r) { return r < 0.2 ? 1.0 - 5.0 * r : 0.0; };
    p.kinks = {0.0, 0.2};
    p.support_radius = 0.2;
    return p;
}

RadialProfile case2_profile()
{
    RadialProfile p;
    p.value = [](double r) { return r < 0.2 ? 1.0 : 0.0; };
    p.kinks = {0.2};
    p.support_radius = 0.2;
    return p;
}

double radius_from_center(std::span<const double> x)
{
    double s = 0.0;
    for (double xi : x)
        s += (xi - 0.5) * (xi - 0.5);
    return std::sqrt(s);
}

double WaveProblem::initial_value(std::span<const double> x) const
{
    if (u0_radial)
        return u0_radial->value(radius_from_center(x));
    if (u0)
        return u0(x);
    return 0.0;
}

void WaveProblem::validate() const
{
    if (dim < 1 || dim > 3)
        throw std::invalid_argument("WaveProblem: dimension must be 1, 2 or 3");
    if (!(T > 0.0))
        throw std::invalid_argument("WaveProblem: horizon T must be positive");
    if (c == 0.0)
        throw std::invalid_argument("WaveProblem: wave speed must be nonzero");
    if (u0_radial && u0_radial->support_radius + std::abs(c) * T >= 0.5)
        throw std::invalid_argument("WaveProblem: radial data reach the boundary before T");
}

namespace {

WaveProblem radial_case(int dim, RadialProfile profile, std::string label)
{
    WaveProblem p;
    p.dim = dim;
    p.T = 1.0;
    p.c = 0.2;
    p.u0_radial = std::move(profile);
    p.label = std::move(label);
    p.validate();
    return p;
}

}  // namespace

WaveProblem make_case1(int dim) { return radial_case(dim, case1_profile(), "case1"); }
WaveProblem make_case2(int dim) { return radial_case(dim, case2_profile(), "case2"); }

WaveProblem make_smooth(int dim)
{
    WaveProblem p;
    p.dim = dim;
    p.T = 1.0;
    p.c = 1.0;
    p.u0 = [](std::span<const double> x) {
        double v = 1.0;
        for (double xi : x)
            v *= std::numbers::sqrt2 * std::sin(std::numbers::pi * xi);
        return v;
    };
    p.label = "smooth";
    p.validate();
    return p;
}

}  // namespace stwave
