#include "twistband/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twistband {

namespace {

Eigen::SparseMatrix<double> shifted(const Eigen::SparseMatrix<double>& A, double s) {
    Eigen::SparseMatrix<double> I(A.rows(), A.cols());
    I.setIdentity();
    return A - s * I;
}

struct Lanczos {
    std::vector<double> theta;
    Eigen::MatrixXd vectors;
};

Lanczos shift_invert_lanczos(const Eigen::SparseMatrix<double>& A, double sigma, int m) {
    const int n = static_cast<int>(A.rows());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted(A, sigma));
    if (ldlt.info() != Eigen::Success) throw SolverError("LDLT of shifted matrix failed", 0.0);
    m = std::min(m, n);
    Eigen::MatrixXd Q(n, m);
    std::vector<double> alpha, beta;
    Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
    for (int i = 0; i < n; ++i) q[i] += 0.25 * std::sin(0.7 * i);
    q.normalize();
    int steps = 0;
    for (int j = 0; j < m; ++j) {
        Q.col(j) = q;
        Eigen::VectorXd w = ldlt.solve(q);
        const double a = q.dot(w);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double b = w.norm();
        steps = j + 1;
        if (b < 1e-13 * std::abs(a) || j + 1 == m) break;
        beta.push_back(b);
        q = w / b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
    for (int j = 0; j < steps; ++j) {
        T(j, j) = alpha[j];
        if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    Lanczos out;
    out.vectors.resize(n, steps);
    int c = 0;
    for (int r = steps - 1; r >= 0; --r) {
        const double nu = es.eigenvalues()[r];
        if (nu <= 0.0) continue;
        out.theta.push_back(sigma + 1.0 / nu);
        out.vectors.col(c++) = Q.leftCols(steps) * es.eigenvectors().col(r);
    }
    out.vectors.conservativeResize(n, c);
    return out;
}

double gershgorin_lower(const Eigen::SparseMatrix<double>& A) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(A.rows());
    Eigen::VectorXd off = Eigen::VectorXd::Zero(A.rows());
    for (int c = 0; c < A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it) {
            if (it.row() == it.col())
                diag[it.row()] += it.value();
            else
                off[it.row()] += std::abs(it.value());
        }
    return (diag - off).minCoeff();
}

}  // namespace

int negative_inertia(const Eigen::SparseMatrix<double>& A) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw SolverError("LDLT factorization failed", 0.0);
    const auto& d = ldlt.vectorD();
    int neg = 0;
    for (int i = 0; i < d.size(); ++i)
        if (d[i] < 0.0) ++neg;
    return neg;
}

std::vector<EigenPair> eigenvalues_below(const Eigen::SparseMatrix<double>& A, double threshold, int kmax) {
    const int n = static_cast<int>(A.rows());
    if (n == 0 || kmax <= 0) return {};
    const int k = std::min(negative_inertia(shifted(A, threshold)), kmax);
    if (k == 0) return {};
    auto residual = [&](const Eigen::VectorXd& v, double th) { return (A * v - th * v).norm() / v.norm(); };
    std::vector<EigenPair> out;
    if (n <= 400) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(A)};
        for (int i = 0; i < k; ++i) {
            Eigen::VectorXd v = es.eigenvectors().col(i);
            out.push_back({es.eigenvalues()[i], v, residual(v, es.eigenvalues()[i])});
        }
        return out;
    }
    const double g = gershgorin_lower(A);
    double sigma = g - 0.1 * std::max(1.0, std::abs(g));
    const Lanczos probe = shift_invert_lanczos(A, sigma, 40);
    if (!probe.theta.empty()) {
        const double s2 = probe.theta.front() - std::max(0.05, 0.5 * (threshold - probe.theta.front()));
        if (s2 > sigma && negative_inertia(shifted(A, s2)) == 0) sigma = s2;
    }
    double worst = std::numeric_limits<double>::infinity();
    for (int m = std::min(n, 2 * k + 40); ; m = std::min(n, 2 * m)) {
        const Lanczos lz = shift_invert_lanczos(A, sigma, m);
        out.clear();
        worst = 0.0;
        for (int i = 0; i < k && i < static_cast<int>(lz.theta.size()); ++i) {
            Eigen::VectorXd v = lz.vectors.col(i).normalized();
            const double r = residual(v, lz.theta[i]);
            worst = std::max(worst, r);
            out.push_back({lz.theta[i], v, r});
        }
        if (static_cast<int>(out.size()) == k && worst <= 1e-8) return out;
        if (m >= n || m >= 1600) break;
    }
    throw SolverError("shift-invert Lanczos did not converge", worst);
}

int CountSpec::N2() const { return static_cast<int>(std::lround(1.0 / h)) + 1; }

double discrete_threshold(int N2) { return discrete_energy(1, Region::Right, N2); }

SparseOperator twisted_operator(double ell, const CountSpec& spec, double extra_X) {
    const double margin = spec.truncation == CutKind::Dirichlet ? std::max(spec.margin, kDirichletMargin)
                                                                : std::max(spec.margin, kTransparentMargin);
    auto [geo, part] = make_geometry(RescaledEll{ell}, ell + margin + extra_X, spec.truncation);
    (void)part;
    return assemble_operator(build_grid(geo, spec.N2(), spec.h), geo);
}

int count_bound_states(double ell, const CountSpec& spec, double extra_X) {
    if (!(ell >= 0.0)) throw ConfigError("ell must be nonnegative");
    const SparseOperator op = twisted_operator(ell, spec, extra_X);
    const double E0 = discrete_threshold(spec.N2()) - spec.delta_gap;
    return negative_inertia(threshold_matrix(op, E0));
}

SpectrumSlice spectrum_slice(double ell, const CountSpec& spec, double tol) {
    const SparseOperator op = twisted_operator(ell, spec);
    const double top = discrete_threshold(spec.N2()) - spec.delta_gap;
    auto below = [&](double E) { return negative_inertia(threshold_matrix(op, E)); };
    SpectrumSlice s;
    s.ell = ell;
    s.grid_tag = op.grid.tag();
    s.count = below(top);
    for (int i = 1; i <= s.count; ++i) {
        double lo = 0.0, hi = top;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            (below(mid) >= i ? hi : lo) = mid;
        }
        s.eigenvalues.push_back(0.5 * (lo + hi));
    }
    return s;
}

CriticalLevel critical_length_on_grid(int n, const CountSpec& spec, const CriticalSearch& search) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    auto count = [&](double ell) { return count_bound_states(ell, spec, search.extra_X); };
    double lo = 0.0;
    if (count(lo) >= n) throw SolverError("count already reaches n at ell = 0", 0.0);
    double hi = lo;
    bool found = false;
    while (hi < search.ell_max) {
        const double next = std::min(search.ell_max, hi + search.scan_step);
        if (count(next) >= n) {
            lo = hi;
            hi = next;
            found = true;
            break;
        }
        hi = next;
    }
    if (!found) throw SolverError("no count jump below ell_max; increase ell_max", search.ell_max);
    while (hi - lo > search.polish) {
        const double mid = 0.5 * (lo + hi);
        (count(mid) >= n ? hi : lo) = mid;
    }
    CriticalLevel lv;
    lv.h = spec.h;
    lv.lo = lo;
    lv.hi = hi;
    lv.value = 0.5 * (lo + hi);
    lv.grid_tag = twisted_operator(lv.value, spec, search.extra_X).grid.tag();
    return lv;
}

CriticalLength find_critical_length(int n, double tol, const CountSpec& spec, const CriticalSearch& search) {
    if (!(tol >= 1e-3 - 1e-15)) throw ConfigError("critical-length tolerance must be >= 1e-3");
    CriticalLength cl;
    cl.n = n;
    for (int level = 0; level < 3; ++level) {
        CountSpec s = spec;
        s.h = spec.h / (1 << level);
        cl.levels.push_back(critical_length_on_grid(n, s, search));
    }
    for (int level = 0; level + 1 < 3; ++level)
        cl.extrapolated.push_back(2.0 * cl.levels[level + 1].value - cl.levels[level].value);
    cl.estimate = cl.extrapolated.back();
    double raw = 0.0;
    for (const auto& lv : cl.levels) raw = std::max(raw, lv.hi - lv.lo);
    cl.bracket = 3.0 * raw;
    cl.agreement = std::abs(cl.extrapolated[1] - cl.extrapolated[0]);
    if (cl.bracket > tol) throw SolverError("critical-length bracket wider than tolerance", cl.bracket);
    return cl;
}

}  // namespace twistband
