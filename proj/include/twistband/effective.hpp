#pragma once

#include <vector>

#include "twistband/geometry.hpp"

namespace twistband {

enum class EffectiveTag { FreeLine, DirichletAtZero, TwistedAtZero, DirichletAtPmL };
enum class PmLRegion { Inside, Outside };

struct EffectiveKind {
    EffectiveTag tag = EffectiveTag::FreeLine;
    int parity_sign = 1;
    double L = 1.0;
    PmLRegion region = PmLRegion::Inside;

    static EffectiveKind free_line() { return {}; }
    static EffectiveKind dirichlet_at_zero() { return {EffectiveTag::DirichletAtZero}; }
    static EffectiveKind twisted(int sign);
    static EffectiveKind dirichlet_at_pm_l(double L, PmLRegion region);

    // Support of the indicator applied to the input (everything except DirichletAtPmL).
    bool active(double x) const;
};

// Kind used at a critical length: odd n carries no condition at 0.
EffectiveKind critical_kind(int n);
// Fixed-L kind for E in {0, pi^2/4}; inside for E = 0, outside otherwise.
EffectiveKind fixed_l_kind(double L, double E);
void check_kind_matches(const EffectiveKind& kind, double E);

// Resolvent kernel of -d^2/dx^2 + mu^2 with the kind's conditions.
Complex green_kernel(const EffectiveKind& kind, Complex mu, double x, double t);

// U = (L - lambda)^{-1} (1_active g), trapezoid quadrature on the nodes of g.
LineFunction apply_effective_resolvent(const EffectiveKind& kind, Complex lambda, const LineFunction& g);
// The same quadrature at a single point.
Complex effective_resolvent_at(const EffectiveKind& kind, Complex lambda, const LineFunction& g, double x);

// Rescaled sampling eps^{-1/2} chi_1(X) U(eps X1). U must be sampled at eps * grid.x1.
GridField effective_term_field(const LineFunction& U, double eps, const Grid& grid, const Geometry& geometry);

struct TwistedData {
    Complex F_plus;
    Complex F_minus;
    Complex T0;
    double eps = 0.0;
    Complex lambda;
};

TwistedData twisted_data(const LineFunction& f1, double eps, Complex lambda, int n);

struct TwistedSolution {
    // The node at x = 0 carries the value from the right.
    LineFunction U;
    Complex plus, minus;
    Complex dplus, dminus;
};

// Dirichlet part plus the far-field correction carried by T0, with the
// one-sided limits at 0 taken from the same representation. Independent of
// the kernel quadrature in apply_effective_resolvent.
TwistedSolution twisted_explicit_solution(const LineFunction& f1, double eps, Complex lambda, int n);

}  // namespace twistband
