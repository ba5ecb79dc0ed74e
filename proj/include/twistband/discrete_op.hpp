#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <vector>

#include "twistband/geometry.hpp"

namespace twistband {

inline constexpr std::size_t kMaxGridNodes = 20'000'000;

// Nodes are aligned to the geometry breakpoints (0, junctions, interior cuts).
// Segments between breakpoints are split uniformly with spacing <= target_h1;
// beyond the outermost breakpoints the spacing is exactly target_h1 and the
// window is rounded outward, so the local grid near the junctions does not
// depend on X.
Grid build_grid(const Geometry& geometry, int N2, double target_h1);

// Exact discrete far field beyond one truncation column.
struct CutBlock {
    int column = 0;
    bool left = false;
    Region region = Region::Right;
    double h = 0.0;
    std::vector<int> unknowns;
    std::vector<int> rows;
    Eigen::MatrixXd G;
    Eigen::MatrixXd phi;
    std::vector<double> tau;
};

struct SparseOperator {
    Grid grid;
    Geometry geometry;
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd sqrt_w;
    std::vector<int> unknown_of;
    std::vector<int> node_of;
    std::vector<CutBlock> cuts;

    int dimension() const { return static_cast<int>(node_of.size()); }
};

SparseOperator assemble_operator(const Grid& grid, const Geometry& geometry);

// Oscillatory left modes take the form e^{i k x1} as x1 -> -inf.
struct Radiation {
    bool left_oscillatory = false;
};

Complex exterior_root(double tau, Complex z, double h, bool oscillatory);
std::vector<Complex> cut_roots(const CutBlock& cut, Complex z, const Radiation& rad);
Complex cut_impedance(double tau, Complex z, double h, Complex rho);

Eigen::SparseMatrix<Complex> system_matrix(const SparseOperator& op, Complex z, const Radiation& rad = {});
Eigen::SparseMatrix<double> threshold_matrix(const SparseOperator& op, double E);

Eigen::VectorXcd weighted_unknowns(const SparseOperator& op, const GridField& field);
GridField field_from_unknowns(const SparseOperator& op, const Eigen::VectorXcd& y);
// Mode coefficients of a field on a cut column, in the cut's exterior basis.
Eigen::VectorXcd cut_coefficients(const CutBlock& cut, const GridField& field);

class ResolventSolver {
public:
    ResolventSolver(const SparseOperator& op, Complex z, Radiation rad = {});

    GridField solve(const GridField& rhs) const;
    Eigen::VectorXcd solve_unknowns(const Eigen::VectorXcd& b) const;
    const Eigen::SparseMatrix<Complex>& matrix() const { return S_; }
    Complex shift() const { return z_; }
    double last_residual() const { return last_residual_; }

private:
    const SparseOperator* op_;
    Complex z_;
    Eigen::SparseMatrix<Complex> S_;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>>> lu_;
    mutable double last_residual_ = 0.0;
};

GridField solve_resolvent(const SparseOperator& op, Complex z, const GridField& rhs, Radiation rad = {});

// Separation-of-variables solution of a decoupled problem whose interior
// Dirichlet cuts split the strip into pieces of uniform transverse type.
// f_modes[m-1] holds f_m on the grid columns; the shift is E + eps^2 lambda.
GridField mode_sum_reference(const Geometry& geometry, const Grid& grid, double eps, Complex lambda, double E,
                             const std::vector<LineFunction>& f_modes);

// 1D kernel of -d^2/dx^2 + k^2 on (a, b) with Dirichlet at finite ends.
Complex piece_kernel(Complex k, double a, double b, double x, double t);

std::size_t retained_mode_count(const std::vector<LineFunction>& f_modes, double rel_tail = 1e-8);

}  // namespace twistband
