#include "twistband/effective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "twistband/discrete_op.hpp"

namespace twistband {

namespace {

constexpr double kTol = 1e-12;

Complex root_minus(Complex lambda) {
    if (lambda.imag() == 0.0) throw ConfigError("lambda must be nonreal");
    return std::sqrt(-lambda);
}

int sgn(double x) { return x < 0.0 ? -1 : 1; }

int zero_index(const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(x[i]) <= kTol) return static_cast<int>(i);
    throw std::invalid_argument("line function has no node at x = 0");
}

}  // namespace

EffectiveKind EffectiveKind::twisted(int sign) {
    if (sign != 1 && sign != -1) throw ConfigError("parity sign must be +1 or -1");
    EffectiveKind k;
    k.tag = EffectiveTag::TwistedAtZero;
    k.parity_sign = sign;
    return k;
}

EffectiveKind EffectiveKind::dirichlet_at_pm_l(double L, PmLRegion region) {
    if (!(L > 0.0)) throw ConfigError("L must be positive");
    EffectiveKind k;
    k.tag = EffectiveTag::DirichletAtPmL;
    k.L = L;
    k.region = region;
    return k;
}

bool EffectiveKind::active(double x) const {
    if (tag != EffectiveTag::DirichletAtPmL) return true;
    return region == PmLRegion::Inside ? std::abs(x) <= L + kTol : std::abs(x) >= L - kTol;
}

EffectiveKind critical_kind(int n) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    return n % 2 == 1 ? EffectiveKind::free_line() : EffectiveKind::twisted(-1);
}

EffectiveKind fixed_l_kind(double L, double E) {
    if (std::abs(E) <= 1e-12) return EffectiveKind::dirichlet_at_pm_l(L, PmLRegion::Inside);
    if (std::abs(E - kQuarterPiSq) <= 1e-12) return EffectiveKind::dirichlet_at_pm_l(L, PmLRegion::Outside);
    throw ConfigError("E must be 0 or pi^2/4");
}

void check_kind_matches(const EffectiveKind& kind, double E) {
    if (kind.tag != EffectiveTag::DirichletAtPmL) return;
    const PmLRegion want = fixed_l_kind(kind.L, E).region;
    if (kind.region != want) throw ConfigError("DirichletAtPmL region does not match E");
}

Complex green_kernel(const EffectiveKind& kind, Complex mu, double x, double t) {
    if (!(mu.real() > 0.0)) throw ConfigError("green_kernel needs Re mu > 0");
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind.tag) {
        case EffectiveTag::FreeLine: return std::exp(-mu * std::abs(x - t)) / (2.0 * mu);
        case EffectiveTag::DirichletAtZero: {
            if (x == 0.0 || t == 0.0 || (x > 0.0) != (t > 0.0)) return 0.0;
            return (std::exp(-mu * std::abs(x - t)) - std::exp(-mu * (std::abs(x) + std::abs(t)))) / (2.0 * mu);
        }
        case EffectiveTag::TwistedAtZero: {
            const double d = sgn(x) == sgn(t) ? std::abs(x - t) : std::abs(x) + std::abs(t);
            const double s = kind.parity_sign == 1 ? 1.0 : static_cast<double>(sgn(x) * sgn(t));
            return s * std::exp(-mu * d) / (2.0 * mu);
        }
        case EffectiveTag::DirichletAtPmL: {
            const double L = kind.L;
            if (kind.region == PmLRegion::Inside) {
                if (std::abs(x) >= L || std::abs(t) >= L) return 0.0;
                return piece_kernel(mu, -L, L, x, t);
            }
            if (x > L && t > L) return piece_kernel(mu, L, inf, x, t);
            if (x < -L && t < -L) return piece_kernel(mu, -inf, -L, x, t);
            return 0.0;
        }
    }
    return 0.0;
}

namespace {

// Trapezoid source weights; an odd twisted kernel jumps at t = 0 and the two
// one-sided limits cancel on that node.
std::vector<Complex> sources(const EffectiveKind& kind, const LineFunction& g) {
    const auto w = g.weights();
    std::vector<Complex> src(g.x.size());
    const bool odd = kind.tag == EffectiveTag::TwistedAtZero && kind.parity_sign == -1;
    for (std::size_t s = 0; s < g.x.size(); ++s) {
        const bool drop = !kind.active(g.x[s]) || (odd && g.x[s] == 0.0);
        src[s] = drop ? Complex(0.0) : w[s] * g.v[s];
    }
    return src;
}

Complex apply_at(const EffectiveKind& kind, Complex mu, const LineFunction& g, const std::vector<Complex>& src,
                 double x) {
    Complex acc = 0.0;
    for (std::size_t s = 0; s < g.x.size(); ++s)
        if (src[s] != Complex(0.0)) acc += green_kernel(kind, mu, x, g.x[s]) * src[s];
    return acc;
}

}  // namespace

LineFunction apply_effective_resolvent(const EffectiveKind& kind, Complex lambda, const LineFunction& g) {
    const Complex mu = root_minus(lambda);
    const auto src = sources(kind, g);
    LineFunction U{g.x, std::vector<Complex>(g.x.size(), 0.0)};
    for (std::size_t i = 0; i < g.x.size(); ++i) U.v[i] = apply_at(kind, mu, g, src, g.x[i]);
    return U;
}

Complex effective_resolvent_at(const EffectiveKind& kind, Complex lambda, const LineFunction& g, double x) {
    return apply_at(kind, root_minus(lambda), g, sources(kind, g), x);
}

GridField effective_term_field(const LineFunction& U, double eps, const Grid& grid, const Geometry& geometry) {
    if (U.x.size() != grid.x1.size()) throw std::invalid_argument("U must be sampled at eps * grid.x1");
    GridField out(grid);
    const double scale = 1.0 / std::sqrt(eps);
    for (int i = 0; i < grid.N1(); ++i) {
        const double X1 = grid.x1[i];
        if (std::abs(U.x[i] - eps * X1) > 1e-9 * std::max(1.0, std::abs(eps * X1)))
            throw std::invalid_argument("U must be sampled at eps * grid.x1");
        if (U.v[i] == Complex(0.0)) continue;
        const auto regions = geometry.projection_regions(X1);
        for (int j = 0; j < grid.N2; ++j) {
            if ((j == 0 && geometry.bottom_dirichlet(X1)) || (j == grid.N2 - 1 && geometry.top_dirichlet(X1))) continue;
            double p = 0.0;
            for (Region r : regions) p += transverse_mode(1, r).profile(grid.x2(j));
            p /= static_cast<double>(regions.size());
            out.at(i, j) = scale * p * U.v[i];
        }
    }
    return out;
}

TwistedData twisted_data(const LineFunction& f1, double eps, Complex lambda, int n) {
    const Complex k = root_minus(lambda);
    const int i0 = zero_index(f1.x);
    TwistedData d;
    d.eps = eps;
    d.lambda = lambda;
    Complex fp = 0.0, fm = 0.0;
    for (std::size_t s = 0; s + 1 < f1.x.size(); ++s) {
        const double a = f1.x[s], b = f1.x[s + 1];
        const Complex seg = 0.5 * (b - a) * (std::exp(-k * std::abs(a)) * f1.v[s] + std::exp(-k * std::abs(b)) * f1.v[s + 1]);
        (static_cast<int>(s) >= i0 ? fp : fm) += seg;
    }
    d.F_plus = fp / (2.0 * k);
    d.F_minus = fm / (2.0 * k);
    const double sigma = n % 2 == 1 ? 1.0 : -1.0;
    d.T0 = std::sqrt(2.0) * (d.F_plus + sigma * d.F_minus);
    return d;
}

TwistedSolution twisted_explicit_solution(const LineFunction& f1, double eps, Complex lambda, int n) {
    const Complex k = root_minus(lambda);
    const TwistedData td = twisted_data(f1, eps, lambda, n);
    const double sigma = n % 2 == 1 ? 1.0 : -1.0;
    const Complex amp = td.T0 / std::sqrt(2.0);
    const auto& x = f1.x;
    const int N = static_cast<int>(x.size());
    const int i0 = zero_index(x);

    // Dirichlet-at-0 part on each half line:
    // V(x) = [e^{-k|x|} int_0^{|x|} sinh(k s) g + sinh(k|x|) int_{|x|}^inf e^{-k s} g] / k.
    std::vector<Complex> inner(N, 0.0), outer(N, 0.0);
    for (int i = i0 + 1; i < N; ++i)
        inner[i] = inner[i - 1] + 0.5 * (x[i] - x[i - 1]) *
                                      (std::sinh(k * x[i - 1]) * f1.v[i - 1] + std::sinh(k * x[i]) * f1.v[i]);
    for (int i = N - 2; i >= i0; --i)
        outer[i] = outer[i + 1] + 0.5 * (x[i + 1] - x[i]) *
                                      (std::exp(-k * x[i]) * f1.v[i] + std::exp(-k * x[i + 1]) * f1.v[i + 1]);
    for (int i = i0 - 1; i >= 0; --i)
        inner[i] = inner[i + 1] + 0.5 * (x[i + 1] - x[i]) *
                                      (std::sinh(-k * x[i]) * f1.v[i] + std::sinh(-k * x[i + 1]) * f1.v[i + 1]);
    std::vector<Complex> outer_left(N, 0.0);
    for (int i = 1; i <= i0; ++i)
        outer_left[i] = outer_left[i - 1] + 0.5 * (x[i] - x[i - 1]) *
                                                (std::exp(k * x[i - 1]) * f1.v[i - 1] + std::exp(k * x[i]) * f1.v[i]);

    TwistedSolution out;
    out.U.x = x;
    out.U.v.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        const double r = std::abs(x[i]);
        const Complex ia = inner[i];
        const Complex oa = i >= i0 ? outer[i] : outer_left[i];
        const Complex V = (std::exp(-k * r) * ia + std::sinh(k * r) * oa) / k;
        const double side = i >= i0 ? 1.0 : sigma;
        out.U.v[i] = V + std::exp(-k * r) * amp * side;
    }
    out.plus = amp;
    out.minus = sigma * amp;
    // V'(+0) = int_0^inf e^{-ks} g and V'(-0) = -int_{-inf}^0 e^{ks} g.
    out.dplus = outer[i0] - k * amp;
    out.dminus = -outer_left[i0] + sigma * k * amp;
    return out;
}

}  // namespace twistband
