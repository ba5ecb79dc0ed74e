#include <cmath>
#include <random>

#include "doctest.h"
#include "twistband/discrete_op.hpp"

using namespace twistband;

namespace {

bool has_segment(const std::vector<Segment>& segs, Side side, double a, double b) {
    for (const auto& s : segs)
        if (s.side == side && std::abs(s.a - a) < 1e-12 && std::abs(s.b - b) < 1e-12) return true;
    return false;
}

Grid uniform_grid(double X, double h, int N2) {
    Grid g;
    g.N2 = N2;
    const int n = static_cast<int>(std::lround(2 * X / h));
    for (int i = 0; i <= n; ++i) g.x1.push_back(-X + i * h);
    return g;
}

}  // namespace

TEST_CASE("twisted partition swaps the Dirichlet side across the overlap") {
    auto [g, p] = make_geometry(RescaledEll{1.0}, 20.0);
    CHECK(has_segment(p.dirichlet, Side::Bottom, 1.0, 20.0));
    CHECK(has_segment(p.dirichlet, Side::Top, -20.0, -1.0));
    CHECK(has_segment(p.neumann, Side::Bottom, -20.0, 1.0));
    CHECK(has_segment(p.neumann, Side::Top, -1.0, 20.0));
    CHECK(p.transparent.size() == 2);
    CHECK(g.region_at(5.0) == Region::Right);
    CHECK(g.region_at(-5.0) == Region::Left);
    CHECK(g.region_at(0.5) == Region::Middle);
}

TEST_CASE("zero overlap splits exactly at the origin") {
    auto [g, p] = make_geometry(RescaledEll{0.0}, 10.0);
    CHECK(has_segment(p.dirichlet, Side::Bottom, 0.0, 10.0));
    CHECK(has_segment(p.dirichlet, Side::Top, -10.0, 0.0));
    CHECK(g.projection_regions(0.0).size() == 2);
}

TEST_CASE("fixed L puts the junctions at L/eps") {
    auto [g, p] = make_geometry(FixedL{1.0, 0.1}, 25.0);
    CHECK(g.junction == doctest::Approx(10.0));
    CHECK(has_segment(p.dirichlet, Side::Bottom, 10.0, 25.0));
    CHECK(has_segment(p.dirichlet, Side::Top, -25.0, -10.0));
    CHECK(g.region_at(0.0) == Region::Middle);
    CHECK(g.projection_regions(10.0).size() == 2);
}

TEST_CASE("window too small for the truncation margin is rejected") {
    CHECK_THROWS_AS(make_geometry(RescaledEll{2.0}, 2.2), ConfigError);
    CHECK_THROWS_AS(make_geometry(RescaledEll{2.0}, 9.0, CutKind::Dirichlet), ConfigError);
    CHECK_THROWS_AS(make_geometry(RescaledEll{-1.0}, 9.0), ConfigError);
}

TEST_CASE("transverse modes") {
    const auto r1 = transverse_mode(1, Region::Right);
    CHECK(r1.energy == doctest::Approx(2.467401).epsilon(1e-6));
    CHECK(r1.profile(1.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(r1.profile(0.0) == doctest::Approx(0.0));
    const double gap = transverse_mode(2, Region::Right).energy - r1.energy;
    CHECK(gap == doctest::Approx(2 * kPi * kPi));
    CHECK(std::sqrt(gap) == doctest::Approx(4.442883).epsilon(1e-6));
    CHECK(transverse_mode(1, Region::Left).profile(0.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(transverse_mode(1, Region::Middle).energy == doctest::Approx(0.0));
    CHECK(transverse_mode(3, Region::Middle).energy == doctest::Approx(4 * kPi * kPi));
    CHECK_THROWS(transverse_mode(0, Region::Right));
}

TEST_CASE("discrete energies approach the continuum at second order") {
    double prev = 0.0;
    for (int N2 : {17, 33, 65}) {
        const double err = std::abs(discrete_energy(1, Region::Right, N2) - kQuarterPiSq);
        if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.02));
        prev = err;
    }
}

TEST_CASE("sampled profiles are orthonormal up to O(h2^2)") {
    for (Region r : {Region::Right, Region::Left, Region::Middle}) {
        double dev[2];
        int k = 0;
        for (int N2 : {33, 65}) {
            Grid g;
            g.N2 = N2;
            const auto b = g.weights2();
            double worst = 0.0;
            for (int m = 1; m <= 8; ++m)
                for (int n = 1; n <= 8; ++n) {
                    double s = 0.0;
                    for (int j = 0; j < N2; ++j)
                        s += b[j] * transverse_mode(m, r).profile(g.x2(j)) * transverse_mode(n, r).profile(g.x2(j));
                    worst = std::max(worst, std::abs(s - (m == n ? 1.0 : 0.0)));
                }
            dev[k++] = worst;
        }
        CHECK(dev[1] <= 0.3 * dev[0] + 1e-13);
        CHECK(dev[1] <= 5.0 / (64.0 * 64.0));
        // The discrete eigenvectors are orthonormal exactly.
        Grid g;
        g.N2 = 33;
        const auto b = g.weights2();
        for (int m = 1; m <= 8; ++m) {
            const auto p = mode_samples(m, r, 33);
            double s = 0.0;
            for (int j = 0; j < 33; ++j) s += b[j] * p[j] * p[j];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("projection recovers longitudinal profiles") {
    auto [geo, part] = make_geometry(RescaledEll{1.0}, 6.0);
    (void)part;
    const Grid g = build_grid(geo, 65, 0.05);
    GridField f1(g), f2(g), bump(g);
    for (int i = 0; i < g.N1(); ++i) {
        const double x = g.x1[i];
        const double gx = std::exp(-std::pow(x - 3.0, 2));
        const Region r = x > 1.0 ? Region::Right : x < -1.0 ? Region::Left : Region::Middle;
        for (int j = 0; j < g.N2; ++j) {
            f1.at(i, j) = transverse_mode(1, Region::Right).profile(g.x2(j)) * gx;
            f2.at(i, j) = transverse_mode(2, Region::Right).profile(g.x2(j)) * gx;
            bump.at(i, j) = transverse_mode(1, r).profile(g.x2(j)) * std::exp(-x * x) * (1.0 + g.x2(j));
        }
    }
    const LineFunction p1 = project_mode(f1, 1, geo);
    const LineFunction p2 = project_mode(f2, 1, geo);
    double e1 = 0.0, e2 = 0.0;
    for (int i = 0; i < g.N1(); ++i) {
        if (g.x1[i] < 1.5) continue;
        const double gx = std::exp(-std::pow(g.x1[i] - 3.0, 2));
        e1 = std::max(e1, std::abs(p1.v[i] - gx));
        e2 = std::max(e2, std::abs(p2.v[i]));
    }
    const double h2sq = std::pow(g.h2(), 2);
    CHECK(e1 <= 2.0 * h2sq);
    CHECK(e2 <= 2.0 * h2sq);

    // Parseval: all discrete modes together carry the whole field.
    const auto a = g.weights1();
    double modes = 0.0;
    for (int m = 1; m <= mode_count(Region::Right, g.N2); ++m) {
        const LineFunction pm = project_mode(bump, m, geo);
        for (int i = 0; i < g.N1(); ++i)
            if (std::abs(g.x1[i]) > 1.0 + 1e-9) modes += a[i] * std::norm(pm.v[i]);
    }
    double direct = 0.0;
    const auto b = g.weights2();
    for (int i = 0; i < g.N1(); ++i) {
        if (std::abs(g.x1[i]) <= 1.0 + 1e-9) continue;
        for (int j = 0; j < g.N2; ++j) direct += a[i] * b[j] * std::norm(bump.at(i, j));
    }
    CHECK(modes == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("scaled norms follow the change of variables") {
    const Grid g = uniform_grid(1.0, 0.05, 17);
    GridField one(g), lin(g);
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j < g.N2; ++j) {
            one.at(i, j) = 1.0;
            lin.at(i, j) = g.x1[i];
        }
    const double area = 2.0;
    CHECK(scaled_norms(one, 0.1).l2 == doctest::Approx(0.1 * std::sqrt(area)));
    CHECK(scaled_norms(one, 0.1).h1 == doctest::Approx(0.1 * std::sqrt(area)));

    const double eps = 0.1;
    const double x_sq = 2.0 / 3.0 + 2.0 * 0.05 * 0.05 / 6.0;  // trapezoid value of the integral of x1^2
    const double h1 = scaled_norms(lin, eps).h1;
    CHECK(h1 * h1 == doctest::Approx(eps * eps * x_sq + area).epsilon(1e-12));

    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    GridField r(g);
    for (int k = 0; k < r.values.size(); ++k) r.values[k] = Complex(nd(rng), nd(rng));
    CHECK(scaled_norms(r, 0.2).l2 / scaled_norms(r, 0.1).l2 == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("scaled L2 norm matches direct quadrature in original variables") {
    // w(x) = W(x1/eps, x2) on the strip of width eps; integrate w^2 over the thin strip directly.
    const double eps = 0.1;
    const Grid g = uniform_grid(2.0, 0.01, 33);
    GridField W(g);
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j < g.N2; ++j) W.at(i, j) = std::exp(-g.x1[i] * g.x1[i]) * std::cos(g.x2(j));
    double direct = 0.0;
    const auto a = g.weights1();
    const auto b = g.weights2();
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j < g.N2; ++j) direct += (eps * a[i]) * (eps * b[j]) * std::norm(W.at(i, j));
    CHECK(scaled_norms(W, eps).l2 == doctest::Approx(std::sqrt(direct)).epsilon(1e-13));
}
