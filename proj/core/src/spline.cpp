#include "stwave/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stwave {

KnotVector::KnotVector(std::vector<double> breakpoints, std::vector<int> multiplicities, int degree)
    : breakpoints_(std::move(breakpoints)), multiplicities_(std::move(multiplicities)), degree_(degree)
{
    if (degree_ < 0)
        throw std::invalid_argument("KnotVector: negative degree");
    if (breakpoints_.size() < 2 || breakpoints_.size() != multiplicities_.size())
        throw std::invalid_argument("KnotVector: need >= 2 breakpoints with one multiplicity each");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
        if (!(breakpoints_[i] > breakpoints_[i - 1]))
            throw std::invalid_argument("KnotVector: breakpoints must be strictly increasing");
    for (int m : multiplicities_)
        if (m < 1 || m > degree_ + 1)
            throw std::invalid_argument("KnotVector: multiplicity must lie in [1, degree+1]");

    for (std::size_t i = 0; i < breakpoints_.size(); ++i)
        knots_.insert(knots_.end(), static_cast<std::size_t>(multiplicities_[i]), breakpoints_[i]);

    if (dimension() <= 0)
        throw std::invalid_argument("KnotVector: dimension must be positive");
}

KnotVector KnotVector::open_uniform(double a, double b, int intervals, int degree)
{
    if (intervals < 1)
        throw std::invalid_argument("KnotVector::open_uniform: need at least one interval");
    std::vector<double> bp(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k)
        bp[static_cast<std::size_t>(k)] = a + (b - a) * k / intervals;
    bp.back() = b;
    std::vector<int> mult(bp.size(), 1);
    mult.front() = degree + 1;
    mult.back() = degree + 1;
    return KnotVector(std::move(bp), std::move(mult), degree);
}

int KnotVector::find_span(double x) const
{
    const int n = dimension();
    const int p = degree_;
    const auto& u = knots_;
    if (x >= u[static_cast<std::size_t>(n)]) {
        int mu = n - 1;
        while (mu > p && !(u[static_cast<std::size_t>(mu)] < u[static_cast<std::size_t>(mu) + 1]))
            --mu;
        return mu;
    }
    if (x <= u[static_cast<std::size_t>(p)])
        return p;
    auto it = std::upper_bound(u.begin() + p, u.begin() + n + 1, x);
    return static_cast<int>(it - u.begin()) - 1;
}

SplineBasis::SplineBasis(KnotVector knots, BoundaryCondition bc) : knots_(std::move(knots)), bc_(bc)
{
    const int n = knots_.dimension();
    const int p = knots_.degree();
    const auto& mult = knots_.multiplicities();
    std::vector<bool> removed(static_cast<std::size_t>(n), false);
    if (mult.front() != p + 1 || mult.back() != p + 1)
        throw std::invalid_argument("SplineBasis: end knots must have multiplicity degree+1");

    switch (bc_) {
    case BoundaryCondition::none:
        break;
    case BoundaryCondition::dirichlet:
        if (p < 1)
            throw std::invalid_argument("SplineBasis: dirichlet needs degree >= 1");
        removed.front() = true;
        removed.back() = true;
        break;
    case BoundaryCondition::terminal_h2:
        if (p < 1 || n < 3)
            throw std::invalid_argument("SplineBasis: terminal_h2 needs degree >= 1 and three functions");
        removed[static_cast<std::size_t>(n - 1)] = true;
        removed[static_cast<std::size_t>(n - 2)] = true;
        break;
    }

    raw_to_retained_.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        if (removed[static_cast<std::size_t>(i)])
            continue;
        raw_to_retained_[static_cast<std::size_t>(i)] = static_cast<int>(index_map_.size());
        index_map_.push_back(i);
    }
    if (index_map_.empty())
        throw std::invalid_argument("SplineBasis: no functions left after boundary removal");
}

// Cox-de Boor values and derivatives of the p+1 B-splines nonzero on span mu.
LocalBasis SplineBasis::local(double x, int nderiv) const
{
    const int p = knots_.degree();
    const auto& u = knots_.knots();
    const int mu = knots_.find_span(x);
    const int nd = std::min(nderiv, p);

    LocalBasis out;
    out.first_raw = mu - p;
    out.values = Eigen::MatrixXd::Zero(nderiv + 1, p + 1);

    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(static_cast<std::size_t>(p) + 1), right(static_cast<std::size_t>(p) + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = x - u[static_cast<std::size_t>(mu + 1 - j)];
        right[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(mu + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j)
        out.values(0, j) = ndu(j, p);

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a.setZero();
        a(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out.values(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double scale = p;
    for (int k = 1; k <= nd; ++k) {
        out.values.row(k) *= scale;
        scale *= (p - k);
    }
    return out;
}

Eigen::VectorXd SplineBasis::eval_raw(double x, int deriv) const
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(raw_size());
    if (deriv > degree())
        return v;
    const LocalBasis lb = local(x, deriv);
    for (int j = 0; j <= degree(); ++j)
        v(lb.first_raw + j) = lb.values(deriv, j);
    return v;
}

Eigen::VectorXd eval_basis(const SplineBasis& basis, double x, int deriv)
{
    if (x < basis.knots().front() || x > basis.knots().back())
        throw std::invalid_argument("eval_basis: x outside the basis interval");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(basis.size());
    if (deriv > basis.degree())
        return v;
    const LocalBasis lb = basis.local(x, deriv);
    for (int j = 0; j <= basis.degree(); ++j) {
        const int r = basis.retained_index(lb.first_raw + j);
        if (r >= 0)
            v(r) = lb.values(deriv, j);
    }
    return v;
}

SplineBasis make_uniform_basis(double a, double b, int intervals, int degree, BoundaryCondition bc)
{
    return SplineBasis(KnotVector::open_uniform(a, b, intervals, degree), bc);
}

SplineBasis make_temporal_test_basis(double T, int n_t)
{
    if (n_t < 3)
        throw std::invalid_argument("make_temporal_test_basis: N_t must be >= 3, got " + std::to_string(n_t));
    if (!(T > 0.0))
        throw std::invalid_argument("make_temporal_test_basis: T must be positive");
    // Open quadratic knots with the two functions touching t = T removed: what
    // remains is the triple- and double-knot function at 0 followed by uniform
    // B-splines whose supports end at or before T.
    return make_uniform_basis(0.0, T, n_t, 2, BoundaryCondition::terminal_h2);
}

SplineBasis make_spatial_test_basis_1d(int n_h)
{
    if (n_h < 2)
        throw std::invalid_argument("make_spatial_test_basis_1d: N_h must be >= 2, got " + std::to_string(n_h));
    return make_uniform_basis(0.0, 1.0, n_h, 2, BoundaryCondition::dirichlet);
}

GaussLegendre gauss_legendre(int n)
{
    if (n < 1)
        throw std::invalid_argument("gauss_legendre: need n >= 1");
    GaussLegendre g;
    g.nodes.resize(static_cast<std::size_t>(n));
    g.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        g.nodes[static_cast<std::size_t>(i)] = -x;
        g.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        g.weights[static_cast<std::size_t>(i)] = w;
        g.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n % 2 == 1)
        g.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return g;
}

QuadratureRule::QuadratureRule(std::span<const double> breakpoints, int points_per_interval)
    : breakpoints_(breakpoints.begin(), breakpoints.end()), npts_(points_per_interval)
{
    if (breakpoints_.size() < 2)
        throw std::invalid_argument("QuadratureRule: need at least two breakpoints");
    const GaussLegendre g = gauss_legendre(npts_);
    for (std::size_t e = 0; e + 1 < breakpoints_.size(); ++e) {
        const double a = breakpoints_[e], b = breakpoints_[e + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int q = 0; q < npts_; ++q) {
            points_.push_back(mid + half * g.nodes[static_cast<std::size_t>(q)]);
            weights_.push_back(half * g.weights[static_cast<std::size_t>(q)]);
        }
    }
}

QuadratureRule QuadratureRule::for_degree(std::span<const double> breakpoints, int degree)
{
    const int npts = (2 * degree + 1 + 1) / 2 + 1;
    return QuadratureRule(breakpoints, npts);
}

namespace {

bool same_breakpoints(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        return false;
    const double scale = std::max(std::abs(a.front()), std::abs(a.back())) + 1.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-13 * scale)
            return false;
    return true;
}

}  // namespace

GramSet1D assemble_gram_1d(const SplineBasis& test, const SplineBasis& trial, const QuadratureRule& quad)
{
    if (!same_breakpoints(test.knots().breakpoints(), trial.knots().breakpoints()))
        throw std::invalid_argument("assemble_gram_1d: test and trial bases have different breakpoints");
    if (!same_breakpoints(test.knots().breakpoints(), quad.breakpoints()))
        throw std::invalid_argument("assemble_gram_1d: quadrature breakpoints do not match the bases");

    GramSet1D g;
    g.test_size = test.size();
    g.trial_size = trial.size();
    g.length = test.knots().back() - test.knots().front();
    g.M = Eigen::MatrixXd::Zero(g.test_size, g.trial_size);
    g.N = g.M;
    g.Q = g.M;
    g.K = g.M;

    const int pv = test.degree(), pu = trial.degree();
    for (int e = 0; e < quad.num_intervals(); ++e) {
        for (int q = 0; q < quad.points_per_interval(); ++q) {
            const double x = quad.point(e, q), w = quad.weight(e, q);
            const LocalBasis lv = test.local(x, 2);
            const LocalBasis lu = trial.local(x, 2);
            for (int a = 0; a <= pv; ++a) {
                const int i = test.retained_index(lv.first_raw + a);
                if (i < 0)
                    continue;
                for (int b = 0; b <= pu; ++b) {
                    const int j = trial.retained_index(lu.first_raw + b);
                    if (j < 0)
                        continue;
                    g.M(i, j) += w * lv.values(0, a) * lu.values(0, b);
                    g.N(i, j) += w * lv.values(2, a) * lu.values(0, b);
                    g.Q(i, j) += w * lv.values(2, a) * lu.values(2, b);
                    g.K(i, j) += w * lv.values(1, a) * lu.values(1, b);
                }
            }
        }
    }
    return g;
}

GramSet1D assemble_gram_1d(const SplineBasis& test, const SplineBasis& trial)
{
    const QuadratureRule quad =
        QuadratureRule::for_degree(test.knots().breakpoints(), std::max(test.degree(), trial.degree()));
    return assemble_gram_1d(test, trial, quad);
}

}  // namespace stwave
