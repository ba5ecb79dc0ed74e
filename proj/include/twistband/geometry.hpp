#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "twistband/types.hpp"

namespace twistband {

// Overlap window of half-length ell in rescaled variables.
struct RescaledEll {
    double ell = 0.0;
};

// Fixed overlap half-length L; the rescaled junction sits at L/eps.
struct FixedL {
    double L = 1.0;
    double eps = 0.1;
};

// Half strip problem: Dirichlet on the bottom for x1 > 0, Neumann elsewhere.
struct AuxStar {};

using Regime = std::variant<RescaledEll, FixedL, AuxStar>;

enum class Side { Bottom, Top, Cut };
enum class Region { Right, Left, Middle };
enum class CutKind { Dirichlet, Transparent };

inline constexpr double kDirichletMargin = 8.0;
inline constexpr double kTransparentMargin = 0.5;

struct Segment {
    Side side;
    double a;
    double b;
};

struct BoundaryPartition {
    std::vector<Segment> dirichlet;
    std::vector<Segment> neumann;
    std::vector<Segment> transparent;
};

struct Geometry {
    Regime regime;
    double X = 0.0;
    double junction = 0.0;
    double bottom_dirichlet_from = 0.0;
    std::optional<double> top_dirichlet_to;
    std::vector<double> dirichlet_cuts;
    CutKind truncation = CutKind::Transparent;

    bool bottom_dirichlet(double x1) const;
    bool top_dirichlet(double x1) const;
    // Transverse type of the open column at x1 (not defined on a junction).
    Region region_at(double x1) const;
    // Regions whose first profile enters the projection at x1; two entries
    // on a gluing line, where the profiles are averaged.
    std::vector<Region> projection_regions(double x1) const;
    std::vector<double> breakpoints() const;
};

std::pair<Geometry, BoundaryPartition> make_geometry(const Regime& regime, double X,
                                                     CutKind truncation = CutKind::Transparent);
BoundaryPartition partition_of(const Geometry& g);
Geometry with_cut(Geometry g, double x1);

struct TransverseMode {
    int m = 1;
    Region region = Region::Right;
    double energy = kQuarterPiSq;

    double profile(double x2) const;
};

TransverseMode transverse_mode(int m, Region region);
// Eigenvalue of the three-point transverse operator with the same boundary types.
double discrete_energy(int m, Region region, int N2);
// Node samples of the profile, normalised for trapezoid weights on N2 nodes.
Eigen::VectorXd mode_samples(int m, Region region, int N2);
int mode_count(Region region, int N2);

struct SpectralParameter {
    Complex lambda;
    double E = kQuarterPiSq;
    double eps = 0.1;

    Complex mu() const;
    Complex k(int m) const;
};

SpectralParameter make_spectral_parameter(Complex lambda, double E, double eps);

struct Grid {
    std::vector<double> x1;
    int N2 = 17;

    int N1() const { return static_cast<int>(x1.size()); }
    double h2() const { return 1.0 / (N2 - 1); }
    double x2(int j) const { return j * h2(); }
    std::size_t size() const { return x1.size() * static_cast<std::size_t>(N2); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * N2 + j; }
    std::vector<double> weights1() const;
    std::vector<double> weights2() const;
    int column_of(double x, double tol = 1e-9) const;
    double max_h1() const;
    std::string tag() const;
    bool same_as(const Grid& o) const;
};

struct GridField {
    Grid grid;
    Eigen::VectorXcd values;

    GridField() = default;
    explicit GridField(Grid g) : grid(std::move(g)), values(Eigen::VectorXcd::Zero(grid.size())) {}

    Complex& at(int i, int j) { return values[grid.index(i, j)]; }
    Complex at(int i, int j) const { return values[grid.index(i, j)]; }
};

struct LineFunction {
    std::vector<double> x;
    std::vector<Complex> v;

    std::vector<double> weights() const;
    double spacing() const;
    double l2_norm() const;
};

LineFunction project_mode(const GridField& field, int m, const Geometry& geometry);

struct ScaledNorms {
    double l2 = 0.0;
    double h1 = 0.0;
};

// Norms of w(x) = W(x/eps) on the thin strip, from the rescaled field W.
ScaledNorms scaled_norms(const GridField& diff, double eps);
double l2_norm(const GridField& field);
double gradient_energy(const GridField& field);

}  // namespace twistband
