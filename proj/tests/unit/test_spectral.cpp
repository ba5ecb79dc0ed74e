#include <Eigen/Dense>

#include <random>

#include "doctest.h"
#include "twistband/spectral.hpp"

using namespace twistband;

namespace {

Eigen::SparseMatrix<double> laplacian_1d(int n, double shift) {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        t.emplace_back(i, i, 2.0 + shift + 0.01 * i);
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, -1.0);
            t.emplace_back(i + 1, i, -1.0);
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

int dense_negative(const Eigen::SparseMatrix<double>& A) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(A)).eigenvalues();
    return static_cast<int>((ev.array() < 0.0).count());
}

}  // namespace

TEST_CASE("inertia matches a dense eigensolve") {
    for (double s : {-0.5, -1.2, -3.9, 0.3}) {
        const auto A = laplacian_1d(60, s);
        CHECK(negative_inertia(A) == dense_negative(A));
    }
}

TEST_CASE("shift-invert Lanczos finds the eigenvalues below a threshold") {
    const auto A = laplacian_1d(900, 0.0);
    const auto pairs = eigenvalues_below(A, 0.05, 10);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(A)).eigenvalues();
    const int below = static_cast<int>((ev.array() < 0.05).count());
    REQUIRE(static_cast<int>(pairs.size()) == std::min(below, 10));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].value == doctest::Approx(ev[i]).epsilon(1e-9));
        CHECK(pairs[i].residual <= 1e-8);
    }
}

TEST_CASE("no bound states without overlap") {
    CountSpec spec;
    spec.h = 1.0 / 16;
    CHECK(count_bound_states(0.0, spec) == 0);
    CHECK(spectrum_slice(0.0, spec).eigenvalues.empty());
}

TEST_CASE("a long overlap binds states below the threshold") {
    CountSpec spec;
    spec.h = 1.0 / 16;
    const SpectrumSlice s = spectrum_slice(10.0, spec);
    REQUIRE(s.count >= 1);
    const double top = discrete_threshold(spec.N2());
    for (double e : s.eigenvalues) {
        CHECK(e > 0.0);
        CHECK(e < top);
    }
    // Dense cross-check of the count on a moderate overlap.
    const SparseOperator op = twisted_operator(2.0, spec);
    CHECK(count_bound_states(2.0, spec) == dense_negative(threshold_matrix(op, top)));
}

TEST_CASE("counts grow monotonically with the overlap") {
    CountSpec spec;
    spec.h = 1.0 / 16;
    int prev = 0;
    for (int k = 0; k <= 6; ++k) {
        const int c = count_bound_states(0.5 * k, spec);
        CHECK(c >= prev);
        prev = c;
    }
    CHECK(prev >= 3);
}

TEST_CASE("critical lengths on a single grid") {
    CountSpec spec;
    spec.h = 1.0 / 16;
    const CriticalLevel l1 = critical_length_on_grid(1, spec);
    const CriticalLevel l2 = critical_length_on_grid(2, spec);
    CHECK(l1.value > 0.0);
    CHECK(l1.value < l2.value);
    CHECK(l1.hi - l1.lo <= 1e-9);
    CHECK(count_bound_states(l1.value - 1e-3, spec) == 0);
    CHECK(count_bound_states(l1.value + 1e-3, spec) == 1);
    CHECK(count_bound_states(l1.value + 0.2, spec) == 1);
    CHECK(count_bound_states(l2.value - 1e-3, spec) == 1);
    CHECK(count_bound_states(l2.value + 1e-3, spec) == 2);
}

TEST_CASE("extrapolated critical length") {
    CountSpec spec;
    spec.h = 1.0 / 16;
    const CriticalLength c = find_critical_length(1, 1e-3, spec);
    CHECK(c.levels.size() == 3);
    CHECK(c.bracket <= 1e-3);
    CHECK(c.agreement <= 3e-3);
    // Raw values decrease towards the extrapolated limit.
    CHECK(c.levels[0].value > c.levels[1].value);
    CHECK(c.levels[1].value > c.levels[2].value);
    CHECK(c.estimate < c.levels[2].value);
    CHECK_THROWS_AS(find_critical_length(1, 1e-4, spec), ConfigError);
}
