#include <cmath>
#include <random>

#include "doctest.h"
#include "twistband/convergence.hpp"

using namespace twistband;

namespace {

GridPolicy coarse() {
    GridPolicy p;
    p.h = 1.0 / 16;
    return p;
}

const Complex kI(0.0, 1.0);

}  // namespace

TEST_CASE("rate fit on synthetic data") {
    const auto eps = default_eps_list();
    std::vector<double> a, b;
    for (double e : eps) {
        a.push_back(std::pow(e, 1.5));
        b.push_back(2.0 * std::sqrt(e));
    }
    const RateFit fa = fit_rate(eps, a);
    CHECK(fa.slope == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(fa.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fa.points == 5);
    const RateFit fb = fit_rate(eps, b);
    CHECK(fb.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fb.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    int within = 0;
    double bias = 0.0;
    const int trials = 2000;
    for (int k = 0; k < trials; ++k) {
        std::vector<double> y;
        for (double e : eps) y.push_back(std::pow(e, 1.5) * (1.0 + noise(rng)));
        const double s = fit_rate(eps, y).slope;
        within += std::abs(s - 1.5) <= 0.08 ? 1 : 0;
        bias += (s - 1.5) / trials;
    }
    CHECK(within >= 0.99 * trials);
    CHECK(std::abs(bias) <= 0.01);

    CHECK_THROWS(fit_rate({0.1, 0.05, 0.02}, {1.0, 0.5, 0.2}));
    CHECK_THROWS(fit_rate({0.1, 0.05, 0.02, 0.01}, {1.0, 0.0, 0.2, 0.1}));
}

TEST_CASE("envelope and bounded ratio") {
    ErrorTable t;
    for (double e : {0.2, 0.1, 0.05, 0.025}) {
        ErrorRow a, b;
        a.eps = b.eps = e;
        a.f_id = "a";
        b.f_id = "b";
        a.err_l2 = std::pow(e, 1.5);
        b.err_l2 = 3.0 * e * e;
        a.err_h1 = b.err_h1 = std::sqrt(e);
        t.rows.push_back(a);
        t.rows.push_back(b);
    }
    CHECK(bounded_ratio(t, Norm::L2, "a", 1.5) == doctest::Approx(1.0));
    CHECK(bounded_ratio(t, Norm::L2, "b", 1.5) == doctest::Approx(std::sqrt(8.0)));
    const ErrorTable env = with_envelope(t);
    const auto rows = env.rows_for(kEnvelopeId);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.err_l2 == doctest::Approx(std::max(std::pow(r.eps, 1.5), 3.0 * r.eps * r.eps)));
    CHECK_THROWS(with_envelope(env));
    CHECK(env.f_ids().size() == 3);
}

TEST_CASE("test functions") {
    const auto specs = default_test_functions();
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].id == "mode1");
    CHECK(specs[1].id == "mode2");
    CHECK(specs[2].id == "mix");
    CHECK(specs[0].support_radius() == doctest::Approx(0.4 + 0.6));
    CHECK(specs[0].excites_mode1());
    CHECK_FALSE(specs[1].excites_mode1());
}

TEST_CASE("run_case validates its inputs") {
    const auto specs = default_test_functions();
    CHECK_THROWS_AS(run_case(FixedLCase{}, Complex(1.0, 0.0), specs, default_eps_list(), coarse()), ConfigError);
    CHECK_THROWS_AS(run_case(FixedLCase{}, kI, specs, {0.2, 0.1, 0.05}, coarse()), ConfigError);
    CHECK_THROWS_AS(run_case(FixedLCase{}, kI, specs, {0.2, 0.1, 0.1, 0.05}, coarse()), ConfigError);
    CHECK_THROWS_AS(run_case(FixedLCase{1.0, 1.0}, kI, specs, default_eps_list(), coarse()), ConfigError);
}

TEST_CASE("fixed L with E = 0 localises inside the window") {
    const ErrorTable T = run_case(FixedLCase{1.0, 0.0}, kI, default_test_functions(), default_eps_list(), coarse());
    CHECK(T.rows.size() == 15);
    for (const auto& id : T.f_ids()) {
        const auto rows = T.rows_for(id);
        for (std::size_t k = 1; k < rows.size(); ++k) {
            CHECK(rows[k].err_l2 < rows[k - 1].err_l2);
            CHECK(rows[k].outside_mass < rows[k - 1].outside_mass);
        }
        for (const auto& r : rows) {
            CHECK(r.effective_outside_max == 0.0);
            CHECK(r.solver_residual <= 1e-10);
            CHECK_FALSE(r.grid_tag.empty());
        }
    }
}

TEST_CASE("noncritical overlap: errors decrease") {
    CountSpec cs;
    const double ell = 0.5 * find_critical_length(1, 1e-3, cs).estimate;
    const ErrorTable T = run_case(OverlapCase{ell, 0}, kI, default_test_functions(), default_eps_list(), coarse());
    for (const auto& id : T.f_ids()) {
        const auto rows = T.rows_for(id);
        for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].err_l2 < rows[k - 1].err_l2);
    }
    CHECK(bounded_ratio(T, Norm::L2, "mode1", 1.5) <= 3.0);
}

TEST_CASE("critical overlap: square-root rate") {
    const ErrorTable T = run_case(OverlapCase{0.0, 1}, kI, default_test_functions(), default_eps_list(), coarse());
    CHECK(T.rows.front().ell > 0.2);
    CHECK(bounded_ratio(T, Norm::L2, "mode1", 0.5) <= 3.0);
    const RateFit f = fit_rate(T, Norm::L2, "mode1");
    CHECK(f.slope == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("auto criticality snaps to the grid critical length") {
    const OverlapCase r = resolve_case(OverlapCase{0.27, -1}, 1.0 / 16);
    CHECK(r.critical_n == 1);
    CountSpec cs;
    cs.h = 1.0 / 16;
    CHECK(r.ell == doctest::Approx(critical_length_on_grid(1, cs).value));
    CHECK(resolve_case(OverlapCase{0.7, -1}, 1.0 / 16).critical_n == 0);
}

TEST_CASE("discretization guard flags an under-resolved sweep") {
    const auto specs = default_test_functions();
    const GuardResult ok = discretization_guard(OverlapCase{0.14, 0}, kI, specs, 0.05, coarse());
    CHECK(ok.ratio <= 0.1);
    GridPolicy bad = coarse();
    bad.h1 = 0.25;
    const GuardResult flagged = discretization_guard(OverlapCase{0.14, 0}, kI, specs, 0.05, bad);
    CHECK(flagged.ratio > 0.1);
}
