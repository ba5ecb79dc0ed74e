#include <cmath>
#include <random>

#include "doctest.h"
#include "twistband/discrete_op.hpp"
#include "twistband/effective.hpp"

using namespace twistband;

namespace {

LineFunction sample(double X, double dx, double (*f)(double)) {
    LineFunction g;
    const int n = static_cast<int>(std::lround(X / dx));
    for (int i = -n; i <= n; ++i) {
        g.x.push_back(i * dx);
        g.v.push_back(f(i * dx));
    }
    return g;
}

double f_a(double x) { return std::exp(-0.5 * std::pow((x - 0.4) / 0.12, 2)); }
double f_b(double x) { return std::exp(-0.5 * std::pow((x - 0.4) / 0.12, 2)) + 0.5 * std::exp(-0.5 * std::pow((x + 0.3) / 0.1, 2)); }
double f_c(double x) { return (1.0 + x) * std::exp(-x * x); }
double f_even(double x) { return std::exp(-x * x) * std::cos(2.0 * x); }

std::vector<EffectiveKind> all_kinds() {
    return {EffectiveKind::free_line(), EffectiveKind::dirichlet_at_zero(), EffectiveKind::twisted(1),
            EffectiveKind::twisted(-1), EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Inside),
            EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Outside)};
}

}  // namespace

TEST_CASE("kernel values") {
    CHECK(std::abs(green_kernel(EffectiveKind::free_line(), 1.0, 0.0, 0.0) - 0.5) <= 1e-15);
    CHECK(green_kernel(EffectiveKind::dirichlet_at_zero(), 1.0, 1.0, 1.0).real() ==
          doctest::Approx((1.0 - std::exp(-2.0)) / 2).epsilon(1e-15));
    CHECK(green_kernel(EffectiveKind::dirichlet_at_zero(), 1.0, 1.0, 1.0).real() == doctest::Approx(0.432332).epsilon(1e-6));
    CHECK(green_kernel(EffectiveKind::twisted(-1), 1.0, 1.0, -1.0).real() == doctest::Approx(-std::exp(-2.0) / 2).epsilon(1e-15));
    CHECK(green_kernel(EffectiveKind::twisted(-1), 1.0, 1.0, -1.0).real() == doctest::Approx(-0.067668).epsilon(1e-5));
    const Complex pm = green_kernel(EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Inside), 1.0, 0.0, 0.0);
    CHECK(pm.real() == doctest::Approx(std::pow(std::sinh(1.0), 2) / std::sinh(2.0)).epsilon(1e-15));
    CHECK(pm.real() == doctest::Approx(0.380797).epsilon(1e-6));
    CHECK(green_kernel(EffectiveKind::dirichlet_at_zero(), 1.0, 1.0, -1.0) == Complex(0.0));
    CHECK_THROWS_AS(green_kernel(EffectiveKind::free_line(), Complex(-1.0, 0.0), 0.0, 0.0), ConfigError);
}

TEST_CASE("twisted kernel solves the interface conditions") {
    // For x > 0 the odd twisted kernel with source at t < 0 is C e^{-mu x}; for x < 0 it is
    // A e^{mu x} + B e^{-mu x}. Match U(+0) = -U(-0), U'(+0) = -U'(-0) and the unit jump at t.
    const Complex mu(0.8, -0.3);
    const double t = -0.7;
    const Complex G = green_kernel(EffectiveKind::twisted(-1), mu, 0.4, t);
    const Complex Gl = green_kernel(EffectiveKind::twisted(-1), mu, -1e-9, t);
    const Complex Gr = green_kernel(EffectiveKind::twisted(-1), mu, 1e-9, t);
    CHECK(std::abs(Gr + Gl) <= 1e-8);
    const double d = 1e-6;
    const Complex dr = (green_kernel(EffectiveKind::twisted(-1), mu, 2 * d, t) - green_kernel(EffectiveKind::twisted(-1), mu, d, t)) / d;
    const Complex dl = (green_kernel(EffectiveKind::twisted(-1), mu, -d, t) - green_kernel(EffectiveKind::twisted(-1), mu, -2 * d, t)) / d;
    CHECK(std::abs(dr + dl) <= 1e-5);
    CHECK(std::abs(G - Gr * std::exp(-mu * 0.4)) <= 1e-8);
}

TEST_CASE("kernels are symmetric and the odd twist is a sign conjugation") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    const Complex mu = std::sqrt(Complex(0.0, -1.0));
    for (int k = 0; k < 1000; ++k) {
        const double x = u(rng), t = u(rng);
        for (const auto& kind : all_kinds())
            CHECK(std::abs(green_kernel(kind, mu, x, t) - green_kernel(kind, mu, t, x)) <= 1e-15);
        const double s = (x < 0 ? -1.0 : 1.0) * (t < 0 ? -1.0 : 1.0);
        const Complex a = green_kernel(EffectiveKind::twisted(-1), mu, x, t);
        const Complex b = s * green_kernel(EffectiveKind::free_line(), mu, x, t);
        CHECK(std::abs(a - b) <= 1e-15 * std::abs(b));
    }
}

TEST_CASE("effective resolvent boundary conditions") {
    const Complex lam(0.0, 1.0);
    const LineFunction g = sample(4.0, 0.01, f_c);
    const LineFunction d0 = apply_effective_resolvent(EffectiveKind::dirichlet_at_zero(), lam, g);
    const std::size_t i0 = g.x.size() / 2;
    CHECK(g.x[i0] == 0.0);
    CHECK(d0.v[i0] == Complex(0.0));

    const LineFunction in = apply_effective_resolvent(EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Inside), lam, g);
    for (std::size_t i = 0; i < g.x.size(); ++i)
        if (std::abs(g.x[i]) >= 1.0) CHECK(in.v[i] == Complex(0.0));
    CHECK_NOTHROW(check_kind_matches(EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Inside), 0.0));
    CHECK_THROWS_AS(check_kind_matches(EffectiveKind::dirichlet_at_pm_l(1.0, PmLRegion::Inside), kQuarterPiSq), ConfigError);
}

TEST_CASE("effective resolvent solves the ODE at second order") {
    const Complex lam(0.0, 1.0);
    double prev = 0.0;
    for (double dx : {0.02, 0.01}) {
        const LineFunction g = sample(5.0, dx, f_c);
        const LineFunction U = apply_effective_resolvent(EffectiveKind::free_line(), lam, g);
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < g.x.size(); ++i) {
            if (std::abs(g.x[i]) > 3.0) continue;
            const Complex upp = (U.v[i + 1] - 2.0 * U.v[i] + U.v[i - 1]) / (dx * dx);
            worst = std::max(worst, std::abs(-upp - lam * U.v[i] - g.v[i]));
        }
        if (prev > 0.0) CHECK(prev / worst == doctest::Approx(4.0).epsilon(0.1));
        CHECK(worst <= 1e-2);
        prev = worst;
    }
}

TEST_CASE("embedding carries the line norm") {
    const double eps = 0.1;
    auto [geo, part] = make_geometry(RescaledEll{0.5}, 40.0);
    (void)part;
    const Grid grid = build_grid(geo, 33, 0.05);
    LineFunction U;
    for (double X : grid.x1) {
        U.x.push_back(eps * X);
        U.v.push_back(std::exp(-std::pow(eps * X - 0.5, 2) / 0.1));
    }
    const GridField W = effective_term_field(U, eps, grid, geo);
    CHECK(scaled_norms(W, eps).l2 == doctest::Approx(U.l2_norm()).epsilon(2e-3));

    LineFunction zero = U;
    for (auto& v : zero.v) v = 0.0;
    CHECK(effective_term_field(zero, eps, grid, geo).values.norm() == 0.0);
    for (int i = 0; i < grid.N1(); ++i)
        if (grid.x1[i] > 0.5) CHECK(W.at(i, 0) == Complex(0.0));
    LineFunction shifted = U;
    shifted.x[3] += 0.01;
    CHECK_THROWS(effective_term_field(shifted, eps, grid, geo));
}

TEST_CASE("explicit twisted solution") {
    const Complex lam(0.0, 1.0);
    for (auto f : {f_a, f_b, f_c}) {
        const LineFunction f1 = sample(6.0, 1e-3, f);
        for (int n : {1, 2}) {
            const double sigma = n == 1 ? 1.0 : -1.0;
            const TwistedSolution ts = twisted_explicit_solution(f1, 0.1, lam, n);
            double umax = 0.0;
            for (const auto& v : ts.U.v) umax = std::max(umax, std::abs(v));
            CHECK(std::abs(ts.plus - sigma * ts.minus) <= 1e-8 * umax);
            CHECK(std::abs(ts.dplus - sigma * ts.dminus) <= 1e-8 * umax);
            const std::size_t i0 = f1.x.size() / 2;
            CHECK(std::abs(ts.U.v[i0 - 1] - ts.minus) <= 1e-2 * umax);

            const EffectiveKind kind = critical_kind(n);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < f1.x.size(); i += 499) {
                if (f1.x[i] == 0.0) continue;
                const Complex q = effective_resolvent_at(kind, lam, f1, f1.x[i]);
                num = std::max(num, std::abs(q - ts.U.v[i]));
                den = std::max(den, std::abs(q));
            }
            CHECK(num <= 1e-6 * den);
        }
    }
    const LineFunction fe = sample(6.0, 1e-3, f_even);
    const TwistedSolution ts = twisted_explicit_solution(fe, 0.1, lam, 1);
    const std::size_t N = fe.x.size();
    double asym = 0.0;
    for (std::size_t i = 0; i < N; ++i) asym = std::max(asym, std::abs(ts.U.v[i] - ts.U.v[N - 1 - i]));
    CHECK(asym <= 1e-12);
}
