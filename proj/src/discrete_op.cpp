#include "twistband/discrete_op.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace twistband {

namespace {

constexpr double kTol = 1e-9;

int interval_count(double len, double h) {
    return std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
}

using LComplex = std::complex<long double>;

// b - S y with y and the accumulation in extended precision. Refinement then
// converges below the rounding floor u |S| |y| of a double iterate.
Eigen::VectorXcd residual_ext(const Eigen::SparseMatrix<Complex>& S, const std::vector<LComplex>& y,
                              const Eigen::VectorXcd& b) {
    std::vector<LComplex> acc(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) acc[i] = LComplex(b[i].real(), b[i].imag());
    for (int c = 0; c < S.outerSize(); ++c)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(S, c); it; ++it)
            acc[it.row()] -= LComplex(it.value().real(), it.value().imag()) * y[c];
    Eigen::VectorXcd r(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
        r[i] = Complex(static_cast<double>(acc[i].real()), static_cast<double>(acc[i].imag()));
    return r;
}

}  // namespace

Grid build_grid(const Geometry& geometry, int N2, double target_h1) {
    if (N2 < 17) throw ConfigError("N2 must be at least 17");
    if (!(target_h1 > 0.0)) throw ConfigError("target_h1 must be positive");
    const auto b = geometry.breakpoints();
    if (b.front() <= -geometry.X || b.back() >= geometry.X)
        throw ConfigError("geometry breakpoints outside the truncation window");
    std::vector<double> x{b.front()};
    for (std::size_t s = 0; s + 1 < b.size(); ++s) {
        const int n = interval_count(b[s + 1] - b[s], target_h1);
        const double d = (b[s + 1] - b[s]) / n;
        for (int k = 1; k < n; ++k) x.push_back(b[s] + k * d);
        x.push_back(b[s + 1]);
    }
    const int nr = interval_count(geometry.X - b.back(), target_h1);
    const int nl = interval_count(geometry.X + b.front(), target_h1);
    const std::size_t total = (x.size() + nr + nl) * static_cast<std::size_t>(N2);
    if (total > kMaxGridNodes) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "grid with %zu nodes exceeds the budget of %zu", total, kMaxGridNodes);
        throw ConfigError(buf);
    }
    std::vector<double> left;
    for (int k = nl; k >= 1; --k) left.push_back(b.front() - k * target_h1);
    const double last = x.back();
    for (int k = 1; k <= nr; ++k) x.push_back(last + k * target_h1);
    x.insert(x.begin(), left.begin(), left.end());
    return Grid{std::move(x), N2};
}

SparseOperator assemble_operator(const Grid& grid, const Geometry& geometry) {
    SparseOperator op;
    op.grid = grid;
    op.geometry = geometry;
    const int N1 = grid.N1();
    const int N2 = grid.N2;
    const auto a = grid.weights1();
    const auto beta = grid.weights2();
    const double h2 = grid.h2();

    std::vector<char> dirichlet(grid.size(), 0);
    for (int i = 0; i < N1; ++i) {
        const double x = grid.x1[i];
        if (geometry.bottom_dirichlet(x)) dirichlet[grid.index(i, 0)] = 1;
        if (geometry.top_dirichlet(x)) dirichlet[grid.index(i, N2 - 1)] = 1;
        bool cut = geometry.truncation == CutKind::Dirichlet && (i == 0 || i == N1 - 1);
        for (double c : geometry.dirichlet_cuts) cut = cut || std::abs(x - c) <= kTol;
        if (cut)
            for (int j = 0; j < N2; ++j) dirichlet[grid.index(i, j)] = 1;
    }
    op.unknown_of.assign(grid.size(), -1);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (dirichlet[p]) continue;
        op.unknown_of[p] = static_cast<int>(op.node_of.size());
        op.node_of.push_back(static_cast<int>(p));
    }
    const int n = op.dimension();
    op.sqrt_w.resize(n);
    for (int u = 0; u < n; ++u) {
        const int p = op.node_of[u];
        op.sqrt_w[u] = std::sqrt(a[p / N2] * beta[p % N2]);
    }

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(5 * static_cast<std::size_t>(n));
    auto edge = [&](std::size_t p, std::size_t q, double c) {
        const int up = op.unknown_of[p];
        const int uq = op.unknown_of[q];
        if (up >= 0) t.emplace_back(up, up, c / (op.sqrt_w[up] * op.sqrt_w[up]));
        if (uq >= 0) t.emplace_back(uq, uq, c / (op.sqrt_w[uq] * op.sqrt_w[uq]));
        if (up >= 0 && uq >= 0) {
            const double s = -c / (op.sqrt_w[up] * op.sqrt_w[uq]);
            t.emplace_back(up, uq, s);
            t.emplace_back(uq, up, s);
        }
    };
    for (int i = 0; i + 1 < N1; ++i) {
        const double dx = grid.x1[i + 1] - grid.x1[i];
        for (int j = 0; j < N2; ++j) edge(grid.index(i, j), grid.index(i + 1, j), beta[j] / dx);
    }
    for (int i = 0; i < N1; ++i)
        for (int j = 0; j + 1 < N2; ++j) edge(grid.index(i, j), grid.index(i, j + 1), a[i] / h2);
    op.A.resize(n, n);
    op.A.setFromTriplets(t.begin(), t.end());
    op.A.makeCompressed();

    if (geometry.truncation == CutKind::Transparent) {
        for (int side = 0; side < 2; ++side) {
            CutBlock cb;
            cb.left = side == 0;
            cb.column = cb.left ? 0 : N1 - 1;
            cb.h = cb.left ? grid.x1[1] - grid.x1[0] : grid.x1[N1 - 1] - grid.x1[N1 - 2];
            cb.region = geometry.region_at(grid.x1[cb.column]);
            const int M = mode_count(cb.region, N2);
            cb.phi.resize(N2, M);
            for (int m = 1; m <= M; ++m) {
                cb.phi.col(m - 1) = mode_samples(m, cb.region, N2);
                cb.tau.push_back(discrete_energy(m, cb.region, N2));
            }
            for (int j = 0; j < N2; ++j) {
                const int u = op.unknown_of[grid.index(cb.column, j)];
                if (u < 0) continue;
                cb.unknowns.push_back(u);
                cb.rows.push_back(j);
            }
            cb.G.resize(static_cast<int>(cb.rows.size()), M);
            for (std::size_t r = 0; r < cb.rows.size(); ++r) {
                const int j = cb.rows[r];
                cb.G.row(static_cast<int>(r)) = beta[j] * cb.phi.row(j) / op.sqrt_w[cb.unknowns[r]];
            }
            op.cuts.push_back(std::move(cb));
        }
    }
    return op;
}

Complex exterior_root(double tau, Complex z, double h, bool oscillatory) {
    const Complex b = 2.0 + h * h * (tau - z);
    const Complex disc = std::sqrt(b * b - 4.0);
    const Complex r1 = (b - disc) / 2.0;
    const Complex r2 = (b + disc) / 2.0;
    Complex target;
    if (oscillatory && (z - tau).real() > 0.0) {
        const Complex k = std::sqrt(z - tau);
        target = std::exp(Complex(0.0, -1.0) * k * h);
    } else {
        target = std::exp(-std::sqrt(Complex(tau) - z) * h);
    }
    return std::abs(r1 - target) <= std::abs(r2 - target) ? r1 : r2;
}

std::vector<Complex> cut_roots(const CutBlock& cut, Complex z, const Radiation& rad) {
    std::vector<Complex> rho;
    rho.reserve(cut.tau.size());
    for (double tau : cut.tau) rho.push_back(exterior_root(tau, z, cut.h, cut.left && rad.left_oscillatory));
    return rho;
}

Complex cut_impedance(double tau, Complex z, double h, Complex rho) {
    return (1.0 - rho) / h + h / 2.0 * (tau - z);
}

Eigen::SparseMatrix<Complex> system_matrix(const SparseOperator& op, Complex z, const Radiation& rad) {
    const int n = op.dimension();
    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(op.A.nonZeros() + n);
    for (int c = 0; c < op.A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.A, c); it; ++it)
            t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), Complex(it.value()));
    for (int u = 0; u < n; ++u) t.emplace_back(u, u, -z);
    for (const auto& cut : op.cuts) {
        const auto rho = cut_roots(cut, z, rad);
        Eigen::VectorXcd d(static_cast<int>(rho.size()));
        for (std::size_t m = 0; m < rho.size(); ++m) d[m] = cut_impedance(cut.tau[m], z, cut.h, rho[m]);
        const Eigen::MatrixXcd Gc = cut.G.cast<Complex>();
        const Eigen::MatrixXcd B = Gc * d.asDiagonal() * Gc.transpose();
        for (std::size_t r = 0; r < cut.unknowns.size(); ++r)
            for (std::size_t s = 0; s < cut.unknowns.size(); ++s)
                t.emplace_back(cut.unknowns[r], cut.unknowns[s], B(r, s));
    }
    Eigen::SparseMatrix<Complex> S(n, n);
    S.setFromTriplets(t.begin(), t.end());
    S.makeCompressed();
    return S;
}

Eigen::SparseMatrix<double> threshold_matrix(const SparseOperator& op, double E) {
    const int n = op.dimension();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(op.A.nonZeros() + n);
    for (int c = 0; c < op.A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.A, c); it; ++it)
            t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int u = 0; u < n; ++u) t.emplace_back(u, u, -E);
    for (const auto& cut : op.cuts) {
        Eigen::VectorXd d(static_cast<int>(cut.tau.size()));
        for (std::size_t m = 0; m < cut.tau.size(); ++m) {
            if (cut.tau[m] < E - 1e-12) throw std::invalid_argument("threshold operator needs non-propagating cut modes");
            const Complex rho = exterior_root(cut.tau[m], E, cut.h, false);
            d[m] = cut_impedance(cut.tau[m], E, cut.h, rho).real();
        }
        const Eigen::MatrixXd B = cut.G * d.asDiagonal() * cut.G.transpose();
        for (std::size_t r = 0; r < cut.unknowns.size(); ++r)
            for (std::size_t s = 0; s < cut.unknowns.size(); ++s)
                t.emplace_back(cut.unknowns[r], cut.unknowns[s], B(r, s));
    }
    Eigen::SparseMatrix<double> S(n, n);
    S.setFromTriplets(t.begin(), t.end());
    S.makeCompressed();
    return S;
}

Eigen::VectorXcd weighted_unknowns(const SparseOperator& op, const GridField& field) {
    if (!field.grid.same_as(op.grid)) throw std::invalid_argument("field grid differs from operator grid");
    Eigen::VectorXcd y(op.dimension());
    for (int u = 0; u < op.dimension(); ++u) y[u] = op.sqrt_w[u] * field.values[op.node_of[u]];
    return y;
}

GridField field_from_unknowns(const SparseOperator& op, const Eigen::VectorXcd& y) {
    GridField f(op.grid);
    for (int u = 0; u < op.dimension(); ++u) f.values[op.node_of[u]] = y[u] / op.sqrt_w[u];
    return f;
}

Eigen::VectorXcd cut_coefficients(const CutBlock& cut, const GridField& field) {
    const auto beta = field.grid.weights2();
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(cut.phi.cols());
    for (int j = 0; j < field.grid.N2; ++j) {
        const Complex v = field.at(cut.column, j);
        if (v == Complex(0.0)) continue;
        c += beta[j] * v * cut.phi.row(j).transpose().cast<Complex>();
    }
    return c;
}

ResolventSolver::ResolventSolver(const SparseOperator& op, Complex z, Radiation rad)
    : op_(&op), z_(z), S_(system_matrix(op, z, rad)) {
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(S_);
    lu_->factorize(S_);
    if (lu_->info() != Eigen::Success)
        throw SolverError("sparse LU factorization failed: " + lu_->lastErrorMessage(),
                          std::numeric_limits<double>::infinity());
}

Eigen::VectorXcd ResolventSolver::solve_unknowns(const Eigen::VectorXcd& b) const {
    const double bn = b.norm();
    if (bn == 0.0) {
        last_residual_ = 0.0;
        return Eigen::VectorXcd::Zero(b.size());
    }
    const Eigen::VectorXcd y0 = lu_->solve(b);
    std::vector<LComplex> y(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) y[i] = LComplex(y0[i].real(), y0[i].imag());
    Eigen::VectorXcd r = residual_ext(S_, y, b);
    double rel = r.norm() / bn;
    for (int it = 0; it < 4 && rel > 1e-13; ++it) {
        const Eigen::VectorXcd d = lu_->solve(r);
        for (Eigen::Index i = 0; i < b.size(); ++i) y[i] += LComplex(d[i].real(), d[i].imag());
        r = residual_ext(S_, y, b);
        rel = r.norm() / bn;
    }
    last_residual_ = rel;
    if (!(rel <= 1e-10)) throw SolverError("resolvent solve did not reach 1e-10 relative residual", rel);
    Eigen::VectorXcd out(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
        out[i] = Complex(static_cast<double>(y[i].real()), static_cast<double>(y[i].imag()));
    return out;
}

GridField ResolventSolver::solve(const GridField& rhs) const {
    return field_from_unknowns(*op_, solve_unknowns(weighted_unknowns(*op_, rhs)));
}

GridField solve_resolvent(const SparseOperator& op, Complex z, const GridField& rhs, Radiation rad) {
    ResolventSolver s(op, z, rad);
    return s.solve(rhs);
}

Complex piece_kernel(Complex k, double a, double b, double x, double t) {
    const double lo = std::min(x, t);
    const double hi = std::max(x, t);
    const double d = hi - lo;
    const bool fa = std::isfinite(a);
    const bool fb = std::isfinite(b);
    if (!fa && !fb) return std::exp(-k * d) / (2.0 * k);
    if (fa && !fb) return (std::exp(-k * d) - std::exp(-k * (lo + hi - 2 * a))) / (2.0 * k);
    if (!fa && fb) return (std::exp(-k * d) - std::exp(-k * (2 * b - lo - hi))) / (2.0 * k);
    const double C = b - a;
    const Complex num = std::exp(-k * d) - std::exp(-k * (2 * b - lo - hi)) - std::exp(-k * (lo + hi - 2 * a)) +
                        std::exp(-k * (2 * C - d));
    return num / (2.0 * k * (1.0 - std::exp(-2.0 * k * C)));
}

std::size_t retained_mode_count(const std::vector<LineFunction>& f_modes, double rel_tail) {
    std::vector<double> n2;
    double total = 0.0;
    for (const auto& f : f_modes) {
        const double s = f.l2_norm();
        n2.push_back(s * s);
        total += s * s;
    }
    if (total == 0.0) return 0;
    double tail = total;
    for (std::size_t m = 0; m < n2.size(); ++m) {
        tail -= n2[m];
        if (tail <= rel_tail * total) return m + 1;
    }
    return n2.size();
}

GridField mode_sum_reference(const Geometry& geometry, const Grid& grid, double eps, Complex lambda, double E,
                             const std::vector<LineFunction>& f_modes) {
    if (std::abs(E) > 1e-12 && std::abs(E - kQuarterPiSq) > 1e-12) throw ConfigError("E must be 0 or pi^2/4");
    std::vector<double> cuts = geometry.dirichlet_cuts;
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts)
        if (grid.column_of(c) < 0) throw std::invalid_argument("cut not on a grid column");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> ends{-inf};
    ends.insert(ends.end(), cuts.begin(), cuts.end());
    ends.push_back(inf);
    const Complex z = E + eps * eps * lambda;

    GridField out(grid);
    const std::size_t M = retained_mode_count(f_modes);
    for (std::size_t piece = 0; piece + 1 < ends.size(); ++piece) {
        const double a = ends[piece];
        const double b = ends[piece + 1];
        const double mid = std::isfinite(a) && std::isfinite(b) ? (a + b) / 2
                           : std::isfinite(a)                   ? a + 1.0
                           : std::isfinite(b)                   ? b - 1.0
                                                                : 0.0;
        const Region region = geometry.region_at(mid);
        std::vector<int> cols;
        for (int i = 0; i < grid.N1(); ++i)
            if (grid.x1[i] >= a - kTol && grid.x1[i] <= b + kTol) cols.push_back(i);
        for (int i : cols) {
            const double x = grid.x1[i];
            if (std::abs(x - a) <= kTol || std::abs(x - b) <= kTol) continue;
            if (geometry.region_at(mid) != geometry.region_at(x)) throw std::invalid_argument("piece is not uniform");
        }
        for (std::size_t mi = 0; mi < M; ++mi) {
            const int m = static_cast<int>(mi) + 1;
            const LineFunction& f = f_modes[mi];
            if (f.x != grid.x1) throw std::invalid_argument("mode data must live on the grid columns");
            const TransverseMode mode = transverse_mode(m, region);
            const Complex k = std::sqrt(Complex(mode.energy) - z);
            const auto w = f.weights();
            Eigen::VectorXd prof(grid.N2);
            for (int j = 0; j < grid.N2; ++j) prof[j] = mode.profile(grid.x2(j));
            for (int i : cols) {
                const double x = grid.x1[i];
                if (std::abs(x - a) <= kTol || std::abs(x - b) <= kTol) continue;
                Complex U = 0.0;
                for (int s : cols) {
                    if (f.v[s] == Complex(0.0)) continue;
                    U += w[s] * piece_kernel(k, a, b, x, grid.x1[s]) * f.v[s];
                }
                for (int j = 0; j < grid.N2; ++j) out.at(i, j) += U * prof[j];
            }
        }
    }
    return out;
}

}  // namespace twistband
