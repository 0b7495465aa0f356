#include "stwave/discretization.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stwave {

SparseMatrix kron(const SparseMatrix& A, const SparseMatrix& B)
{
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(A.nonZeros() * B.nonZeros()));
    for (int ka = 0; ka < A.outerSize(); ++ka)
        for (SparseMatrix::InnerIterator ia(A, ka); ia; ++ia)
            for (int kb = 0; kb < B.outerSize(); ++kb)
                for (SparseMatrix::InnerIterator ib(B, kb); ib; ++ib)
                    trip.emplace_back(static_cast<int>(ia.row() * B.rows() + ib.row()),
                                      static_cast<int>(ia.col() * B.cols() + ib.col()), ia.value() * ib.value());
    SparseMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

namespace {

SparseMatrix to_sparse(const Eigen::MatrixXd& D)
{
    SparseMatrix S = D.sparseView(1.0, 0.0);
    S.makeCompressed();
    return S;
}

// factors[a] acts on axis a; the product is factors[d-1] (x) ... (x) factors[0].
SparseMatrix tensor(const std::vector<const SparseMatrix*>& factors)
{
    SparseMatrix out = *factors.back();
    for (int a = static_cast<int>(factors.size()) - 2; a >= 0; --a)
        out = kron(out, *factors[static_cast<std::size_t>(a)]);
    return out;
}

std::size_t checked_power(int n, int d, std::size_t cap)
{
    std::size_t s = 1;
    for (int a = 0; a < d; ++a) {
        s *= static_cast<std::size_t>(n);
        if (s > cap)
            throw std::invalid_argument("assemble_space_matrices: " + std::to_string(n) + "^" + std::to_string(d) +
                                        " spatial unknowns exceed the cap of " + std::to_string(cap));
    }
    return s;
}

}  // namespace

SpaceMatrices assemble_space_matrices(const WaveProblem& problem, int n_per_axis, std::size_t max_size)
{
    problem.validate();
    const int d = problem.dim;
    checked_power(n_per_axis, d, max_size);

    SplineBasis basis = make_spatial_test_basis_1d(n_per_axis);
    GramSet1D g = assemble_gram_1d(basis, basis);
    const SparseMatrix M1 = to_sparse(g.M);
    const SparseMatrix K1 = to_sparse(g.K);
    const SparseMatrix B1 = to_sparse(g.Q);
    // g.N(i,j) = (phi_i'', phi_j)
    const SparseMatrix C1 = to_sparse(g.N);
    const SparseMatrix C1t = to_sparse(g.N.transpose());

    const double c2 = problem.c * problem.c;
    std::vector<const SparseMatrix*> f(static_cast<std::size_t>(d), &M1);
    SparseMatrix M = tensor(f);

    SparseMatrix N(M.rows(), M.cols());
    for (int a = 0; a < d; ++a) {
        std::vector<const SparseMatrix*> fa(static_cast<std::size_t>(d), &M1);
        fa[static_cast<std::size_t>(a)] = &K1;
        N += tensor(fa);
    }
    N *= c2;

    // (A phi_j, A phi_i) = c^4 sum_{a,b} (d_a^2 phi_j, d_b^2 phi_i)
    SparseMatrix Q(M.rows(), M.cols());
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            std::vector<const SparseMatrix*> fab(static_cast<std::size_t>(d), &M1);
            if (a == b) {
                fab[static_cast<std::size_t>(a)] = &B1;
            } else {
                fab[static_cast<std::size_t>(a)] = &C1t;
                fab[static_cast<std::size_t>(b)] = &C1;
            }
            Q += tensor(fab);
        }
    }
    Q *= c2 * c2;

    M.makeCompressed();
    N.makeCompressed();
    Q.makeCompressed();
    return SpaceMatrices{d, n_per_axis, problem.c, std::move(basis), std::move(g),
                         std::move(M), std::move(N), std::move(Q)};
}

TimeMatrices assemble_time_matrices(double T, int n_t)
{
    SplineBasis basis = make_temporal_test_basis(T, n_t);
    GramSet1D g = assemble_gram_1d(basis, basis);
    return TimeMatrices{T, std::move(basis), std::move(g.M), std::move(g.N), std::move(g.Q)};
}

Eigen::MatrixXd KronOperator::apply(const Eigen::MatrixXd& U) const
{
    if (U.rows() != space_size() || U.cols() != time_size())
        throw std::invalid_argument("KronOperator::apply: dimension mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(U.rows(), U.cols());
    for (const auto& term : terms)
        out.noalias() += (term.space * U) * term.time.transpose();
    return out;
}

Eigen::MatrixXd KronOperator::dense() const
{
    const Eigen::Index n = static_cast<Eigen::Index>(space_size()) * time_size();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    const Eigen::Index ns = space_size();
    for (const auto& term : terms) {
        const Eigen::MatrixXd S(term.space);
        for (Eigen::Index l = 0; l < term.time.rows(); ++l)
            for (Eigen::Index k = 0; k < term.time.cols(); ++k)
                if (term.time(l, k) != 0.0)
                    D.block(l * ns, k * ns, ns, ns) += term.time(l, k) * S;
    }
    return D;
}

KronOperator build_stiffness(StiffnessFlavor flavor, const TimeMatrices& tm, const SpaceMatrices& sm)
{
    KronOperator op;
    op.flavor = flavor;
    if (flavor == StiffnessFlavor::optimal) {
        op.terms.push_back({tm.Q, sm.M});
        op.terms.push_back({tm.N, SparseMatrix(sm.N.transpose())});
        op.terms.push_back({tm.N.transpose(), sm.N});
        op.terms.push_back({tm.M, sm.Q});
    } else {
        op.terms.push_back({tm.N, sm.M});
        op.terms.push_back({tm.M, sm.N});
    }
    return op;
}

double LowRankMatrix::norm() const
{
    if (rank() == 0 || left.rows() == 0 || right.rows() == 0)
        return 0.0;
    const Eigen::HouseholderQR<Eigen::MatrixXd> ql(left), qr(right);
    const Eigen::Index kl = std::min(left.rows(), left.cols()), kr = std::min(right.rows(), right.cols());
    const Eigen::MatrixXd Rl = ql.matrixQR().topRows(kl).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rr = qr.matrixQR().topRows(kr).triangularView<Eigen::Upper>();
    return (Rl * Rr.transpose()).norm();
}

LowRankMatrix LowRankMatrix::orthonormalized() const
{
    const Eigen::Index k = std::min(left.rows(), left.cols());
    const Eigen::HouseholderQR<Eigen::MatrixXd> ql(left);
    LowRankMatrix out;
    out.left = ql.householderQ() * Eigen::MatrixXd::Identity(left.rows(), k);
    const Eigen::MatrixXd Rl = ql.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    out.right = right * Rl.transpose();
    return out;
}

namespace {

struct AxisLocal {
    int first = 0;  // raw index of the first local function
    std::array<double, 4> v{};
    std::array<double, 4> d2{};
};

void eval_axis(const SplineBasis& b, double x, AxisLocal& out, bool second)
{
    const LocalBasis lb = b.local(x, second ? 2 : 0);
    out.first = lb.first_raw;
    const int p = b.degree();
    for (int j = 0; j <= p; ++j) {
        out.v[static_cast<std::size_t>(j)] = lb.values(0, j);
        out.d2[static_cast<std::size_t>(j)] = second ? lb.values(2, j) : 0.0;
    }
}

// Recursive integration of g against the tensor basis over [lo, hi].
class Projector {
public:
    Projector(const SpaceMatrices& sm, const SpaceFunction& g, const RadialProfile* radial, int max_depth)
        : sm_(sm), g_(g), radial_(radial), max_depth_(max_depth), d_(sm.dim),
          fine_(gauss_legendre(4)), coarse_(gauss_legendre(3)), out_(Eigen::VectorXd::Zero(sm.size()))
    {
    }

    Eigen::VectorXd run()
    {
        const int n = sm_.n_per_axis;
        std::array<int, 3> e{};
        const int total = static_cast<int>(std::pow(n, d_));
        for (int flat = 0; flat < total; ++flat) {
            int r = flat;
            std::array<double, 3> lo{}, hi{};
            for (int a = 0; a < d_; ++a) {
                e[static_cast<std::size_t>(a)] = r % n;
                r /= n;
                lo[static_cast<std::size_t>(a)] = static_cast<double>(e[static_cast<std::size_t>(a)]) / n;
                hi[static_cast<std::size_t>(a)] = static_cast<double>(e[static_cast<std::size_t>(a)] + 1) / n;
            }
            cell(lo, hi, 0);
        }
        return out_;
    }

private:
    bool cut(const std::array<double, 3>& lo, const std::array<double, 3>& hi) const
    {
        if (!radial_)
            return false;
        double rmin2 = 0.0, rmax2 = 0.0;
        for (int a = 0; a < d_; ++a) {
            const double l = lo[static_cast<std::size_t>(a)] - 0.5, h = hi[static_cast<std::size_t>(a)] - 0.5;
            const double near = (l > 0.0) ? l : (h < 0.0 ? -h : 0.0);
            const double far = std::max(std::abs(l), std::abs(h));
            rmin2 += near * near;
            rmax2 += far * far;
        }
        const double rmin = std::sqrt(rmin2), rmax = std::sqrt(rmax2);
        for (double k : radial_->kinks)
            if (rmin <= k && k <= rmax)
                return true;
        return false;
    }

    void cell(const std::array<double, 3>& lo, const std::array<double, 3>& hi, int depth)
    {
        const bool is_cut = cut(lo, hi);
        if (is_cut && depth < max_depth_) {
            const int nchild = 1 << d_;
            for (int c = 0; c < nchild; ++c) {
                std::array<double, 3> clo = lo, chi = hi;
                for (int a = 0; a < d_; ++a) {
                    const auto ua = static_cast<std::size_t>(a);
                    const double mid = 0.5 * (lo[ua] + hi[ua]);
                    if (c & (1 << a))
                        clo[ua] = mid;
                    else
                        chi[ua] = mid;
                }
                cell(clo, chi, depth + 1);
            }
            return;
        }
        integrate(lo, hi, is_cut ? coarse_ : fine_);
    }

    void integrate(const std::array<double, 3>& lo, const std::array<double, 3>& hi, const GaussLegendre& gl)
    {
        const int q = static_cast<int>(gl.nodes.size());
        const int p = sm_.basis1d.degree();
        const int n = sm_.basis1d.size();
        std::array<std::vector<AxisLocal>, 3> axis;
        std::array<std::vector<double>, 3> xs, ws;
        for (int a = 0; a < d_; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const double mid = 0.5 * (lo[ua] + hi[ua]), half = 0.5 * (hi[ua] - lo[ua]);
            axis[ua].resize(static_cast<std::size_t>(q));
            xs[ua].resize(static_cast<std::size_t>(q));
            ws[ua].resize(static_cast<std::size_t>(q));
            for (int i = 0; i < q; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                xs[ua][ui] = mid + half * gl.nodes[ui];
                ws[ua][ui] = half * gl.weights[ui];
                eval_axis(sm_.basis1d, xs[ua][ui], axis[ua][ui], false);
            }
        }
        std::array<int, 3> qi{};
        const int npts = static_cast<int>(std::pow(q, d_));
        const int nloc = static_cast<int>(std::pow(p + 1, d_));
        std::array<double, 3> x{};
        for (int flat = 0; flat < npts; ++flat) {
            int r = flat;
            double w = 1.0;
            for (int a = 0; a < d_; ++a) {
                const auto ua = static_cast<std::size_t>(a);
                qi[ua] = r % q;
                r /= q;
                x[ua] = xs[ua][static_cast<std::size_t>(qi[ua])];
                w *= ws[ua][static_cast<std::size_t>(qi[ua])];
            }
            const double gv = w * g_(std::span<const double>(x.data(), static_cast<std::size_t>(d_)));
            if (gv == 0.0)
                continue;
            for (int loc = 0; loc < nloc; ++loc) {
                int rl = loc, global = 0, stride = 1;
                double v = gv;
                bool keep = true;
                for (int a = 0; a < d_; ++a) {
                    const auto ua = static_cast<std::size_t>(a);
                    const int j = rl % (p + 1);
                    rl /= (p + 1);
                    const AxisLocal& al = axis[ua][static_cast<std::size_t>(qi[ua])];
                    const int ret = sm_.basis1d.retained_index(al.first + j);
                    if (ret < 0) {
                        keep = false;
                        break;
                    }
                    v *= al.v[static_cast<std::size_t>(j)];
                    global += ret * stride;
                    stride *= n;
                }
                if (keep)
                    out_(global) += v;
            }
        }
    }

    const SpaceMatrices& sm_;
    const SpaceFunction& g_;
    const RadialProfile* radial_;
    int max_depth_;
    int d_;
    GaussLegendre fine_, coarse_;
    Eigen::VectorXd out_;
};

}  // namespace

Eigen::VectorXd project_space_function(const SpaceMatrices& sm, const SpaceFunction& g, const RadialProfile* radial,
                                       int depth)
{
    if (!g)
        return Eigen::VectorXd::Zero(sm.size());
    return Projector(sm, g, radial, depth).run();
}

Eigen::VectorXd project_time_function(const TimeMatrices& tm, const TimeFunction& a)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(tm.size());
    if (!a)
        return out;
    const QuadratureRule quad(tm.basis.knots().breakpoints(), 6);
    for (int e = 0; e < quad.num_intervals(); ++e)
        for (int q = 0; q < quad.points_per_interval(); ++q) {
            const double t = quad.point(e, q);
            out += quad.weight(e, q) * a(t) * eval_basis(tm.basis, t, 0);
        }
    return out;
}

LowRankMatrix assemble_rhs(const WaveProblem& problem, const TimeMatrices& tm, const SpaceMatrices& sm)
{
    if (problem.forcing_general)
        throw std::invalid_argument("assemble_rhs: non-separable forcing is not supported; "
                                    "provide the forcing as a sum of time x space products");
    std::vector<Eigen::VectorXd> lcols, rcols;
    const double t0 = tm.basis.knots().front();

    if (problem.u1) {
        lcols.push_back(project_space_function(sm, problem.u1));
        rcols.push_back(eval_basis(tm.basis, t0, 0));
    }
    if (problem.u0_radial || problem.u0) {
        const SpaceFunction u0 = [&problem](std::span<const double> x) { return problem.initial_value(x); };
        const RadialProfile* radial = problem.u0_radial ? &*problem.u0_radial : nullptr;
        lcols.push_back(project_space_function(sm, u0, radial));
        rcols.push_back(-eval_basis(tm.basis, t0, 1));
    }
    for (const auto& term : problem.forcing) {
        lcols.push_back(project_space_function(sm, term.space));
        rcols.push_back(project_time_function(tm, term.time));
    }

    LowRankMatrix G;
    G.left.resize(sm.size(), static_cast<Eigen::Index>(lcols.size()));
    G.right.resize(tm.size(), static_cast<Eigen::Index>(rcols.size()));
    for (std::size_t j = 0; j < lcols.size(); ++j) {
        G.left.col(static_cast<Eigen::Index>(j)) = lcols[j];
        G.right.col(static_cast<Eigen::Index>(j)) = rcols[j];
    }
    return G;
}

void local_space_values(const SpaceMatrices& sm, std::span<const double> x, LocalSpaceValues& out)
{
    const int d = sm.dim;
    const int p = sm.basis1d.degree();
    const int n = sm.basis1d.size();
    const double c2 = sm.c * sm.c;
    std::array<AxisLocal, 3> ax;
    for (int a = 0; a < d; ++a)
        eval_axis(sm.basis1d, x[static_cast<std::size_t>(a)], ax[static_cast<std::size_t>(a)], true);

    out.index.clear();
    out.value.clear();
    out.applied.clear();
    const int nloc = static_cast<int>(std::pow(p + 1, d));
    std::array<int, 3> j{};
    for (int loc = 0; loc < nloc; ++loc) {
        int rl = loc, global = 0, stride = 1;
        bool keep = true;
        for (int a = 0; a < d; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            j[ua] = rl % (p + 1);
            rl /= (p + 1);
            const int ret = sm.basis1d.retained_index(ax[ua].first + j[ua]);
            if (ret < 0) {
                keep = false;
                break;
            }
            global += ret * stride;
            stride *= n;
        }
        if (!keep)
            continue;
        double v = 1.0, lap = 0.0;
        for (int a = 0; a < d; ++a) {
            double term = ax[static_cast<std::size_t>(a)].d2[static_cast<std::size_t>(j[static_cast<std::size_t>(a)])];
            for (int b = 0; b < d; ++b)
                if (b != a)
                    term *= ax[static_cast<std::size_t>(b)].v[static_cast<std::size_t>(j[static_cast<std::size_t>(b)])];
            lap += term;
            v *= ax[static_cast<std::size_t>(a)].v[static_cast<std::size_t>(j[static_cast<std::size_t>(a)])];
        }
        out.index.push_back(global);
        out.value.push_back(v);
        out.applied.push_back(-c2 * lap);
    }
}

Eigen::VectorXd time_basis_values(const TimeMatrices& tm, double t, int deriv)
{
    return eval_basis(tm.basis, t, deriv);
}

std::vector<double> evaluate_solution(const Eigen::MatrixXd& U, const TimeMatrices& tm, const SpaceMatrices& sm,
                                      std::span<const SpaceTimePoint> points)
{
    if (U.rows() != sm.size() || U.cols() != tm.size())
        throw std::invalid_argument("evaluate_solution: coefficient matrix has the wrong shape");
    std::vector<double> out;
    out.reserve(points.size());
    LocalSpaceValues loc;
    for (const auto& pt : points) {
        if (pt.t < 0.0 || pt.t > tm.T || static_cast<int>(pt.x.size()) != sm.dim)
            throw std::invalid_argument("evaluate_solution: point outside the space-time cylinder");
        for (double xi : pt.x)
            if (xi < 0.0 || xi > 1.0)
                throw std::invalid_argument("evaluate_solution: point outside the space-time cylinder");
        const Eigen::VectorXd r0 = time_basis_values(tm, pt.t, 0);
        const Eigen::VectorXd r2 = time_basis_values(tm, pt.t, 2);
        local_space_values(sm, pt.x, loc);
        double v = 0.0;
        for (std::size_t m = 0; m < loc.index.size(); ++m) {
            const auto row = U.row(loc.index[m]);
            v += loc.value[m] * row.dot(r2) + loc.applied[m] * row.dot(r0);
        }
        out.push_back(v);
    }
    return out;
}

namespace {

// Applies mats[a] along axis a of a tensor stored first-axis-fastest.
Eigen::VectorXd tensor_apply(const std::vector<const Eigen::MatrixXd*>& mats, const Eigen::VectorXd& x)
{
    const int d = static_cast<int>(mats.size());
    std::vector<Eigen::Index> dims(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a)
        dims[static_cast<std::size_t>(a)] = mats[static_cast<std::size_t>(a)]->cols();
    Eigen::VectorXd cur = x;
    for (int a = 0; a < d; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const Eigen::MatrixXd& E = *mats[ua];
        Eigen::Index inner = 1, outer = 1;
        for (int b = 0; b < a; ++b)
            inner *= dims[static_cast<std::size_t>(b)];
        for (int b = a + 1; b < d; ++b)
            outer *= dims[static_cast<std::size_t>(b)];
        Eigen::VectorXd next(inner * E.rows() * outer);
        for (Eigen::Index o = 0; o < outer; ++o) {
            Eigen::Map<const Eigen::MatrixXd> X(cur.data() + o * inner * E.cols(), inner, E.cols());
            Eigen::Map<Eigen::MatrixXd> Y(next.data() + o * inner * E.rows(), inner, E.rows());
            Y.noalias() = X * E.transpose();
        }
        dims[ua] = E.rows();
        cur.swap(next);
    }
    return cur;
}

}  // namespace

Eigen::VectorXd evaluate_space_grid(const SpaceMatrices& sm, const Eigen::VectorXd& a, const Eigen::VectorXd* b,
                                    const std::vector<std::vector<double>>& axis_points)
{
    const int d = sm.dim;
    if (static_cast<int>(axis_points.size()) != d)
        throw std::invalid_argument("evaluate_space_grid: need one point list per axis");
    std::vector<Eigen::MatrixXd> E0(static_cast<std::size_t>(d)), E2(static_cast<std::size_t>(d));
    const int n = sm.basis1d.size();
    for (int ax = 0; ax < d; ++ax) {
        const auto& pts = axis_points[static_cast<std::size_t>(ax)];
        auto& e0 = E0[static_cast<std::size_t>(ax)];
        auto& e2 = E2[static_cast<std::size_t>(ax)];
        e0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pts.size()), n);
        e2 = e0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            e0.row(static_cast<Eigen::Index>(i)) = eval_basis(sm.basis1d, pts[i], 0).transpose();
            if (b)
                e2.row(static_cast<Eigen::Index>(i)) = eval_basis(sm.basis1d, pts[i], 2).transpose();
        }
    }
    std::vector<const Eigen::MatrixXd*> mats(static_cast<std::size_t>(d));
    for (int ax = 0; ax < d; ++ax)
        mats[static_cast<std::size_t>(ax)] = &E0[static_cast<std::size_t>(ax)];
    Eigen::VectorXd out = tensor_apply(mats, a);
    if (b) {
        for (int ax = 0; ax < d; ++ax) {
            mats[static_cast<std::size_t>(ax)] = &E2[static_cast<std::size_t>(ax)];
            out -= sm.c * sm.c * tensor_apply(mats, *b);
            mats[static_cast<std::size_t>(ax)] = &E0[static_cast<std::size_t>(ax)];
        }
    }
    return out;
}

}  // namespace stwave
