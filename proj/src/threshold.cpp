#include "twistband/threshold.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace twistband {

namespace {

constexpr double kTol = 1e-9;
// Room on the right for the remainder decay fit.
constexpr double kVirtualMargin = 3.0;

double smoothstep(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * (3.0 - 2.0 * s);
}

// Trapezoid rule over the nodes of xs lying in [lo, hi].
double trapezoid(const std::vector<double>& xs, const std::vector<double>& ys, double lo, double hi) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (xs[i] < lo - kTol || xs[i + 1] > hi + kTol) continue;
        s += 0.5 * (xs[i + 1] - xs[i]) * (ys[i] + ys[i + 1]);
    }
    return s;
}

const CutBlock& cut_on(const SparseOperator& op, bool left) {
    for (const auto& c : op.cuts)
        if (c.left == left) return c;
    throw std::logic_error("operator has no transparent cut on that side");
}

}  // namespace

VirtualLevel solve_virtual_level(double ell, int n, const CountSpec& spec) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (spec.truncation != CutKind::Transparent) throw ConfigError("virtual level needs transparent cuts");
    CountSpec s = spec;
    s.margin = std::max(spec.margin, kVirtualMargin);
    const SparseOperator op = twisted_operator(ell, s);
    const Grid& g = op.grid;
    const int N2 = g.N2;
    const double tau1 = discrete_threshold(N2);
    const auto beta = g.weights2();
    const Eigen::SparseMatrix<double> A = threshold_matrix(op, tau1);

    const CutBlock& right = cut_on(op, false);
    Eigen::VectorXd gvec = Eigen::VectorXd::Zero(op.dimension());
    for (std::size_t r = 0; r < right.rows.size(); ++r) {
        const int j = right.rows[r];
        const int u = right.unknowns[r];
        gvec[u] = 2.0 * beta[j] * std::sin(kPi * g.x2(j) / 2.0) / op.sqrt_w[u];
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw SolverError("LDLT of threshold operator failed", 0.0);
    const Eigen::VectorXd y1 = ldlt.solve(gvec);
    Eigen::VectorXd y = ldlt.solve(y1);
    y /= gvec.dot(y);

    Eigen::VectorXd ya(op.dimension());
    for (int u = 0; u < op.dimension(); ++u) {
        const int p = op.node_of[u];
        const int i = p / N2;
        const int j = p % N2;
        ya[u] = op.sqrt_w[u] * smoothstep(g.x1[i] - ell) * std::sin(kPi * g.x2(j) / 2.0);
    }
    const double forcing = (A * ya).norm();
    const double ratio = (A * y).norm() / forcing;
    if (!(ratio <= 1e-3)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "not critical at ell=%.10g (residual ratio %.3e)", ell, ratio);
        throw NotCritical(buf, ratio);
    }

    VirtualLevel vl;
    vl.n = n;
    vl.ell = ell;
    vl.geometry = op.geometry;
    vl.grid = g;
    vl.phi = field_from_unknowns(op, y.cast<Complex>());
    vl.ls_residual = ratio;

    const int N1 = g.N1();
    double cm = 0.0;
    for (int j = 0; j < N2; ++j) cm += 2.0 * beta[j] * std::cos(kPi * g.x2(j) / 2.0) * vl.phi.at(0, j).real();
    vl.c_minus = cm;
    vl.right_amplitude = 1.0;

    for (int i = 0; i < N1; ++i)
        if (std::abs(g.x1[i] + g.x1[N1 - 1 - i]) > 1e-10) throw std::logic_error("grid is not symmetric");
    const double sigma = (n % 2 == 1) ? 1.0 : -1.0;
    double diff = 0.0, total = 0.0;
    for (int i = 0; i < N1; ++i)
        for (int j = 0; j < N2; ++j) {
            const double v = vl.phi.at(i, j).real();
            const double w = vl.phi.at(N1 - 1 - i, N2 - 1 - j).real();
            diff += (v - sigma * w) * (v - sigma * w);
            total += v * v;
        }
    vl.parity_residual = std::sqrt(diff / total);

    // Remainder past the junction, fitted as C e^{-rate x1}.
    std::vector<double> xs, ls;
    const double lo = ell + 0.5;
    const double hi = std::min(ell + 2.5, g.x1.back() - 0.25);
    for (int i = 0; i < N1; ++i) {
        const double x = g.x1[i];
        if (x < lo - kTol || x > hi + kTol) continue;
        double sq = 0.0;
        for (int j = 0; j < N2; ++j) {
            const double r = vl.phi.at(i, j).real() - std::sin(kPi * g.x2(j) / 2.0);
            sq += beta[j] * r * r;
        }
        xs.push_back(x);
        ls.push_back(0.5 * std::log(sq));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ls.begin(), ls.end(), 0.0) / ls.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxy += (xs[k] - mx) * (ls[k] - my);
        sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    vl.decay_rate = -sxy / sxx;
    return vl;
}

std::array<double, 6> lemma31_residuals(const VirtualLevel& vl) {
    const Grid& g = vl.grid;
    const int N2 = g.N2;
    const auto beta = g.weights2();
    const int i0 = g.column_of(0.0);
    if (i0 < 0 || i0 + 2 >= g.N1()) throw std::logic_error("no grid column at x1 = 0");
    const double d1 = g.x1[i0 + 1] - g.x1[i0];
    const double d2 = g.x1[i0 + 2] - g.x1[i0];
    const double w0 = -(d1 + d2) / (d1 * d2);
    const double w1 = d2 / (d1 * (d2 - d1));
    const double w2 = -d1 / (d2 * (d2 - d1));
    double S0 = 0, C0 = 0, dS = 0, dC = 0;
    for (int j = 0; j < N2; ++j) {
        const double s = std::sin(kPi * g.x2(j) / 2.0);
        const double c = std::cos(kPi * g.x2(j) / 2.0);
        const double v = vl.phi.at(i0, j).real();
        const double dv =
            w0 * v + w1 * vl.phi.at(i0 + 1, j).real() + w2 * vl.phi.at(i0 + 2, j).real();
        S0 += beta[j] * v * s;
        C0 += beta[j] * v * c;
        dS += beta[j] * dv * s;
        dC += beta[j] * dv * c;
    }
    std::vector<double> bottom(g.N1()), top(g.N1()), xbottom(g.N1()), xtop(g.N1());
    for (int i = 0; i < g.N1(); ++i) {
        bottom[i] = vl.phi.at(i, 0).real();
        top[i] = vl.phi.at(i, N2 - 1).real();
        xbottom[i] = g.x1[i] * bottom[i];
        xtop[i] = g.x1[i] * top[i];
    }
    const double ell = vl.ell;
    const double B0 = trapezoid(g.x1, bottom, 0.0, ell);
    const double B1 = trapezoid(g.x1, top, -ell, 0.0);
    const double xB0 = trapezoid(g.x1, xbottom, 0.0, ell);
    const double xB1 = trapezoid(g.x1, xtop, -ell, 0.0);
    const double sigma = (vl.n % 2 == 1) ? 1.0 : -1.0;
    const double hp = kPi / 2.0;
    return {std::abs(S0 - sigma * C0),
            std::abs(dS + sigma * dC),
            std::abs(dS - hp * B0),
            std::abs(dC + hp * B1),
            std::abs(S0 + hp * xB0 - 0.5),
            std::abs(C0 - hp * xB1 - sigma / 2.0)};
}

SparseOperator aux_operator(const AuxSpec& spec) {
    auto [geo, part] = make_geometry(AuxStar{}, spec.X, CutKind::Transparent);
    (void)part;
    return assemble_operator(build_grid(geo, spec.N2(), spec.h), geo);
}

Complex aux_shift(double E, Complex mu, int N2) {
    const double base = E > 0.0 ? discrete_threshold(N2) : 0.0;
    return base - mu * mu;
}

GridField aux_bump(const SparseOperator& op, double c1, double c2, double width) {
    GridField f(op.grid);
    const Grid& g = op.grid;
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j < g.N2; ++j) {
            if (op.unknown_of[g.index(i, j)] < 0) continue;
            const double dx = g.x1[i] - c1;
            const double dy = g.x2(j) - c2;
            const double r2 = dx * dx + dy * dy;
            if (r2 > 25.0 * width * width) continue;
            f.at(i, j) = std::exp(-r2 / (2.0 * width * width));
        }
    return f;
}

namespace {

void check_aux_parameters(double E, Complex mu) {
    if (std::abs(E) > 1e-12 && std::abs(E - kQuarterPiSq) > 1e-12) throw ConfigError("E must be 0 or pi^2/4");
    if (std::abs(mu) > 0.3) throw ConfigError("|mu| must be <= 0.3");
    if (!(mu.real() > 0.0 || mu == Complex(0.0))) throw ConfigError("mu must have Re mu > 0 or vanish");
}

Radiation aux_radiation(double E) { return Radiation{E > 0.0}; }

}  // namespace

AuxSolution solve_aux_problem(const GridField& h, Complex mu, double E, const AuxSpec& spec) {
    check_aux_parameters(E, mu);
    if (!(spec.a > 0.0 && spec.a < spec.X - 8.0)) throw ConfigError("aux support radius a must satisfy 0 < a < X - 8");
    const SparseOperator op = aux_operator(spec);
    if (!h.grid.same_as(op.grid)) throw std::invalid_argument("right-hand side grid differs from the aux grid");
    const Grid& g = op.grid;
    for (int i = 0; i < g.N1(); ++i) {
        if (std::abs(g.x1[i]) < spec.a - kTol) continue;
        for (int j = 0; j < g.N2; ++j)
            if (h.at(i, j) != Complex(0.0)) throw ConfigError("right-hand side support exceeds |x1| < a");
    }
    const Complex z = aux_shift(E, mu, g.N2);
    const Radiation rad = aux_radiation(E);

    AuxSolution s;
    s.E = E;
    s.mu = mu;
    s.geometry = op.geometry;
    s.grid = g;
    s.a = spec.a;
    s.v = solve_resolvent(op, z, h, rad);
    s.h_norm = l2_norm(h);

    const int iR = g.column_of(spec.a);
    const int iL = g.column_of(-spec.a);
    if (iR < 0 || iL < 0) throw std::logic_error("extraction columns not on the grid");
    CutBlock right = cut_on(op, false);
    CutBlock left = cut_on(op, true);
    s.rho_plus = cut_roots(right, z, rad);
    s.rho_minus = cut_roots(left, z, rad);
    right.column = iR;
    left.column = iL;
    const Eigen::VectorXcd bp = cut_coefficients(right, s.v);
    const Eigen::VectorXcd bm = cut_coefficients(left, s.v);
    const double r2 = std::sqrt(2.0);
    for (int m = 0; m < bp.size(); ++m) s.c_plus.push_back(r2 * bp[m]);
    s.c0_minus = bm[0];
    for (int m = 1; m < bm.size(); ++m) s.c_minus.push_back(m + 1 == g.N2 ? bm[m] : r2 * bm[m]);

    double sum = std::norm(s.c0_minus);
    for (std::size_t m = 0; m < s.c_plus.size(); ++m) sum += (m + 1) * std::norm(s.c_plus[m]);
    for (std::size_t m = 0; m < s.c_minus.size(); ++m) sum += (m + 1) * std::norm(s.c_minus[m]);
    s.C = s.h_norm > 0.0 ? sum / (s.h_norm * s.h_norm) : 0.0;
    return s;
}

double resynthesis_error(const AuxSolution& s, double x) {
    const Grid& g = s.grid;
    const int N2 = g.N2;
    const auto beta = g.weights2();
    double worst = 0.0;
    for (int side = 0; side < 2; ++side) {
        const bool left = side == 1;
        const Region region = left ? Region::Middle : Region::Right;
        const int ia = g.column_of(left ? -s.a : s.a);
        const int ix = g.column_of(left ? -x : x);
        if (ia < 0 || ix < 0) throw std::invalid_argument("resynthesis abscissa not on a grid column");
        const int steps = std::abs(ix - ia);
        const auto& rho = left ? s.rho_minus : s.rho_plus;
        Eigen::VectorXcd syn = Eigen::VectorXcd::Zero(N2);
        for (int m = 1; m <= mode_count(region, N2); ++m) {
            const Eigen::VectorXd phi = mode_samples(m, region, N2);
            Complex b = 0.0;
            for (int j = 0; j < N2; ++j) b += beta[j] * phi[j] * s.v.at(ia, j);
            syn += b * std::pow(rho[m - 1], steps) * phi.cast<Complex>();
        }
        double num = 0.0, den = 0.0;
        for (int j = 0; j < N2; ++j) {
            num += beta[j] * std::norm(s.v.at(ix, j) - syn[j]);
            den += beta[j] * std::norm(s.v.at(ix, j));
        }
        worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    }
    return worst;
}

double corner_exponent(const AuxSolution& s, double r_max) {
    const Grid& g = s.grid;
    const int i0 = g.column_of(0.0);
    const double h1 = g.x1[i0] - g.x1[i0 - 1];
    const double reach = std::max(r_max, 8.0 * h1);
    std::vector<double> r, lv;
    for (int i = i0 - 1; i >= 0; --i) {
        const double rr = -g.x1[i];
        if (rr > reach + kTol) break;
        if (rr < 4.0 * h1 - kTol) continue;
        const double v = std::abs(s.v.at(i, 0));
        if (!(v > 0.0)) continue;
        r.push_back(rr);
        lv.push_back(std::log(v));
    }
    if (r.size() < 4) throw std::invalid_argument("too few points for the corner fit");
    Eigen::MatrixXd M(r.size(), 3);
    Eigen::VectorXd b(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        M(k, 0) = 1.0;
        M(k, 1) = std::log(r[k]);
        M(k, 2) = r[k];
        b[k] = lv[k];
    }
    const Eigen::VectorXd c = M.colPivHouseholderQr().solve(b);
    return c[1];
}

SingularPair extreme_singular_values(const Eigen::SparseMatrix<Complex>& S, int max_iter) {
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(S);
    lu.factorize(S);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed", 0.0);
    const int n = static_cast<int>(S.rows());
    Eigen::VectorXcd start(n);
    for (int i = 0; i < n; ++i) start[i] = Complex(1.0 + 0.3 * std::sin(0.37 * i), 0.2 * std::cos(0.91 * i));
    start.normalize();

    // S is complex symmetric, so S^{-H} x = conj(S^{-1} conj x).
    SingularPair out;
    Eigen::VectorXcd x = start;
    double prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXcd y = lu.solve(x.conjugate()).conjugate();
        Eigen::VectorXcd w = lu.solve(y);
        const double nu = w.norm();
        x = w / nu;
        const double est = 1.0 / std::sqrt(nu);
        if (it > 2 && std::abs(est - prev) <= 1e-12 * est) {
            prev = est;
            break;
        }
        prev = est;
    }
    out.sigma_min = prev;

    x = start;
    prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXcd y = S * x;
        Eigen::VectorXcd w = (S * y.conjugate()).conjugate();
        const double nu = w.norm();
        x = w / nu;
        const double est = std::sqrt(nu);
        if (it > 2 && std::abs(est - prev) <= 1e-8 * est) {
            prev = est;
            break;
        }
        prev = est;
    }
    out.sigma_max = prev;
    return out;
}

SingularPair aux_singular_values(double E, Complex mu, const AuxSpec& spec) {
    check_aux_parameters(E, mu);
    const SparseOperator op = aux_operator(spec);
    return extreme_singular_values(system_matrix(op, aux_shift(E, mu, op.grid.N2), aux_radiation(E)));
}

double aux_min_singular_value(double E, Complex mu, const AuxSpec& spec) {
    return aux_singular_values(E, mu, spec).sigma_min;
}

SingularPair twisted_singular_values(double ell, const CountSpec& spec) {
    const SparseOperator op = twisted_operator(ell, spec);
    return extreme_singular_values(system_matrix(op, discrete_threshold(op.grid.N2)));
}

}  // namespace twistband
