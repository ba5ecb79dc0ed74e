#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "twistband/spectral.hpp"

namespace twistband {

class NotCritical : public std::runtime_error {
public:
    NotCritical(const std::string& what, double ratio) : std::runtime_error(what), ratio_(ratio) {}
    double ratio() const { return ratio_; }

private:
    double ratio_;
};

struct VirtualLevel {
    int n = 1;
    double ell = 0.0;
    Geometry geometry;
    Grid grid;
    GridField phi;
    double c_minus = 0.0;
    double right_amplitude = 1.0;
    double parity_residual = 0.0;
    double ls_residual = 0.0;
    double decay_rate = 0.0;
};

// Threshold solution normalised by its right far-field amplitude, as the
// minimiser of |A phi| under that normalisation. The spacing and margin come
// from spec; ell must be critical on that grid (critical_length_on_grid).
VirtualLevel solve_virtual_level(double ell, int n, const CountSpec& spec);

std::array<double, 6> lemma31_residuals(const VirtualLevel& vl);

struct AuxSpec {
    double h = 1.0 / 32;
    double X = 10.0;
    double a = 1.0;

    int N2() const { return static_cast<int>(std::lround(1.0 / h)) + 1; }
};

struct AuxSolution {
    double E = 0.0;
    Complex mu;
    Geometry geometry;
    Grid grid;
    GridField v;
    double a = 1.0;
    Complex c0_minus;
    std::vector<Complex> c_plus;
    std::vector<Complex> c_minus;
    std::vector<Complex> rho_plus;
    std::vector<Complex> rho_minus;
    double h_norm = 0.0;
    double C = 0.0;
};

SparseOperator aux_operator(const AuxSpec& spec);
Complex aux_shift(double E, Complex mu, int N2);
GridField aux_bump(const SparseOperator& op, double c1, double c2, double width);

AuxSolution solve_aux_problem(const GridField& h, Complex mu, double E, const AuxSpec& spec);
// Relative mismatch between the field and its modal resynthesis at |x1| = x.
double resynthesis_error(const AuxSolution& s, double x);
// Exponent p of v ~ alpha r^p along the Neumann ray leaving the D/N corner.
double corner_exponent(const AuxSolution& s, double r_max = 0.25);

struct SingularPair {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

SingularPair extreme_singular_values(const Eigen::SparseMatrix<Complex>& S, int max_iter = 400);
double aux_min_singular_value(double E, Complex mu, const AuxSpec& spec);
SingularPair aux_singular_values(double E, Complex mu, const AuxSpec& spec);
// Same certificate on a twisted geometry at a (critical) ell, mu = 0.
SingularPair twisted_singular_values(double ell, const CountSpec& spec);

}  // namespace twistband
