#pragma once

#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "twistband/discrete_op.hpp"

namespace twistband {

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;
    double residual = 0.0;
};

// Number of negative pivots of an LDL^T factorization (Sylvester inertia).
int negative_inertia(const Eigen::SparseMatrix<double>& A);

// Eigenpairs of a real symmetric matrix strictly below the threshold,
// ascending, by shift-invert Lanczos with full reorthogonalization.
std::vector<EigenPair> eigenvalues_below(const Eigen::SparseMatrix<double>& A, double threshold, int kmax);

struct CountSpec {
    double h = 0.05;
    double margin = 1.0;
    double delta_gap = 0.0;
    CutKind truncation = CutKind::Transparent;

    int N2() const;
};

double discrete_threshold(int N2);
SparseOperator twisted_operator(double ell, const CountSpec& spec, double extra_X = 0.0);
int count_bound_states(double ell, const CountSpec& spec, double extra_X = 0.0);

struct SpectrumSlice {
    std::vector<double> eigenvalues;
    int count = 0;
    double ell = 0.0;
    std::string grid_tag;
};

// Bound-state energies below the discrete threshold, located by inertia bisection.
SpectrumSlice spectrum_slice(double ell, const CountSpec& spec, double tol = 1e-10);

struct CriticalLevel {
    double h = 0.0;
    std::string grid_tag;
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;
};

struct CriticalLength {
    int n = 1;
    double estimate = 0.0;
    double bracket = 0.0;
    double agreement = 0.0;
    std::vector<CriticalLevel> levels;
    std::vector<double> extrapolated;
};

struct CriticalSearch {
    double ell_max = 20.0;
    double scan_step = 0.25;
    double polish = 1e-10;
    double extra_X = 0.0;
};

// Count jump n-1 -> n on a single grid.
CriticalLevel critical_length_on_grid(int n, const CountSpec& spec, const CriticalSearch& search = {});

// Three nested resolutions h, h/2, h/4. The raw values converge at first
// order (corner singularity); the estimate is the first-order extrapolation
// of the finest pair and the agreement compares it with the coarser pair.
CriticalLength find_critical_length(int n, double tol, const CountSpec& spec, const CriticalSearch& search = {});

}  // namespace twistband
