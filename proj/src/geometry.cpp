#include "twistband/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace twistband {

namespace {

constexpr double kTol = 1e-9;

}  // namespace

bool Geometry::bottom_dirichlet(double x1) const { return x1 >= bottom_dirichlet_from - kTol; }

bool Geometry::top_dirichlet(double x1) const {
    return top_dirichlet_to.has_value() && x1 <= *top_dirichlet_to + kTol;
}

Region Geometry::region_at(double x1) const {
    const bool bottom = x1 > bottom_dirichlet_from;
    const bool top = top_dirichlet_to.has_value() && x1 < *top_dirichlet_to;
    if (bottom && !top) return Region::Right;
    if (top && !bottom) return Region::Left;
    if (!top && !bottom) return Region::Middle;
    throw std::logic_error("column with Dirichlet data on both sides");
}

std::vector<Region> Geometry::projection_regions(double x1) const {
    if (std::holds_alternative<RescaledEll>(regime)) {
        if (x1 > kTol) return {Region::Right};
        if (x1 < -kTol) return {Region::Left};
        return {Region::Right, Region::Left};
    }
    if (std::holds_alternative<FixedL>(regime)) {
        const double j = junction;
        if (std::abs(x1 - j) <= kTol) return {Region::Middle, Region::Right};
        if (std::abs(x1 + j) <= kTol) return {Region::Middle, Region::Left};
        if (x1 > j) return {Region::Right};
        if (x1 < -j) return {Region::Left};
        return {Region::Middle};
    }
    if (x1 > kTol) return {Region::Right};
    if (x1 < -kTol) return {Region::Middle};
    return {Region::Right, Region::Middle};
}

std::vector<double> Geometry::breakpoints() const {
    std::vector<double> b{0.0};
    if (!std::holds_alternative<AuxStar>(regime) && junction > kTol) {
        b.push_back(junction);
        b.push_back(-junction);
    }
    for (double c : dirichlet_cuts) b.push_back(c);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(), [](double p, double q) { return std::abs(p - q) <= kTol; }),
            b.end());
    return b;
}

std::pair<Geometry, BoundaryPartition> make_geometry(const Regime& regime, double X, CutKind truncation) {
    Geometry g;
    g.regime = regime;
    g.X = X;
    g.truncation = truncation;
    if (const auto* r = std::get_if<RescaledEll>(&regime)) {
        if (!(r->ell >= 0.0)) throw ConfigError("ell must be nonnegative");
        g.junction = r->ell;
        g.bottom_dirichlet_from = r->ell;
        g.top_dirichlet_to = -r->ell;
    } else if (const auto* f = std::get_if<FixedL>(&regime)) {
        if (!(f->L > 0.0) || !(f->eps > 0.0)) throw ConfigError("L and eps must be positive");
        g.junction = f->L / f->eps;
        g.bottom_dirichlet_from = g.junction;
        g.top_dirichlet_to = -g.junction;
    } else {
        g.junction = 0.0;
        g.bottom_dirichlet_from = 0.0;
    }
    const double margin = truncation == CutKind::Dirichlet ? kDirichletMargin : kTransparentMargin;
    if (!(X >= g.junction + margin)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "truncation X=%g below junction %g + margin %g", X, g.junction, margin);
        throw ConfigError(buf);
    }
    return {g, partition_of(g)};
}

BoundaryPartition partition_of(const Geometry& g) {
    BoundaryPartition p;
    const double X = g.X;
    const double b = std::clamp(g.bottom_dirichlet_from, -X, X);
    p.dirichlet.push_back({Side::Bottom, b, X});
    if (b > -X) p.neumann.push_back({Side::Bottom, -X, b});
    if (g.top_dirichlet_to) {
        const double t = std::clamp(*g.top_dirichlet_to, -X, X);
        p.dirichlet.push_back({Side::Top, -X, t});
        if (t < X) p.neumann.push_back({Side::Top, t, X});
    } else {
        p.neumann.push_back({Side::Top, -X, X});
    }
    auto& cuts = g.truncation == CutKind::Dirichlet ? p.dirichlet : p.transparent;
    cuts.push_back({Side::Cut, -X, -X});
    cuts.push_back({Side::Cut, X, X});
    for (double c : g.dirichlet_cuts) p.dirichlet.push_back({Side::Cut, c, c});
    return p;
}

Geometry with_cut(Geometry g, double x1) {
    g.dirichlet_cuts.push_back(x1);
    return g;
}

double TransverseMode::profile(double x2) const {
    switch (region) {
        case Region::Right: return std::sqrt(2.0) * std::sin(kPi * (m - 0.5) * x2);
        case Region::Left: return std::sqrt(2.0) * std::sin(kPi * (m - 0.5) * (1.0 - x2));
        case Region::Middle: return m == 1 ? 1.0 : std::sqrt(2.0) * std::cos(kPi * (m - 1) * x2);
    }
    return 0.0;
}

TransverseMode transverse_mode(int m, Region region) {
    if (m < 1) throw std::invalid_argument("mode index must be >= 1");
    const double q = region == Region::Middle ? m - 1.0 : m - 0.5;
    return {m, region, kPi * kPi * q * q};
}

double discrete_energy(int m, Region region, int N2) {
    const double h = 1.0 / (N2 - 1);
    const double q = region == Region::Middle ? m - 1.0 : m - 0.5;
    const double s = std::sin(q * kPi * h / 2.0);
    return 4.0 / (h * h) * s * s;
}

int mode_count(Region region, int N2) { return region == Region::Middle ? N2 : N2 - 1; }

Eigen::VectorXd mode_samples(int m, Region region, int N2) {
    if (m < 1 || m > mode_count(region, N2)) throw std::invalid_argument("mode index outside grid range");
    const TransverseMode mode = transverse_mode(m, region);
    Eigen::VectorXd v(N2);
    const double h = 1.0 / (N2 - 1);
    for (int j = 0; j < N2; ++j) v[j] = mode.profile(j * h);
    if (region == Region::Middle && m == N2) v /= std::sqrt(2.0);
    return v;
}

Complex SpectralParameter::mu() const { return eps * std::sqrt(-lambda); }

Complex SpectralParameter::k(int m) const {
    const double Em = transverse_mode(m, Region::Right).energy;
    return std::sqrt(Complex(Em - kQuarterPiSq) - eps * eps * lambda);
}

SpectralParameter make_spectral_parameter(Complex lambda, double E, double eps) {
    if (lambda.imag() == 0.0) throw ConfigError("lambda must be nonreal");
    if (std::abs(E) > 1e-12 && std::abs(E - kQuarterPiSq) > 1e-12) throw ConfigError("E must be 0 or pi^2/4");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    return {lambda, E, eps};
}

std::vector<double> Grid::weights1() const {
    std::vector<double> a(x1.size(), 0.0);
    for (std::size_t i = 0; i + 1 < x1.size(); ++i) {
        const double d = x1[i + 1] - x1[i];
        a[i] += d / 2;
        a[i + 1] += d / 2;
    }
    return a;
}

std::vector<double> Grid::weights2() const {
    std::vector<double> b(N2, h2());
    b.front() /= 2;
    b.back() /= 2;
    return b;
}

int Grid::column_of(double x, double tol) const {
    auto it = std::lower_bound(x1.begin(), x1.end(), x - tol);
    if (it == x1.end() || std::abs(*it - x) > tol) return -1;
    return static_cast<int>(it - x1.begin());
}

double Grid::max_h1() const {
    double h = 0.0;
    for (std::size_t i = 0; i + 1 < x1.size(); ++i) h = std::max(h, x1[i + 1] - x1[i]);
    return h;
}

std::string Grid::tag() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "N1=%d;N2=%d;h1=%.6g;X=%.6g", N1(), N2, max_h1(), x1.empty() ? 0.0 : x1.back());
    return buf;
}

bool Grid::same_as(const Grid& o) const { return N2 == o.N2 && x1 == o.x1; }

std::vector<double> LineFunction::weights() const {
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double d = x[i + 1] - x[i];
        w[i] += d / 2;
        w[i + 1] += d / 2;
    }
    return w;
}

double LineFunction::spacing() const {
    double h = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) h = std::max(h, x[i + 1] - x[i]);
    return h;
}

double LineFunction::l2_norm() const {
    const auto w = weights();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * std::norm(v[i]);
    return std::sqrt(s);
}

LineFunction project_mode(const GridField& field, int m, const Geometry& geometry) {
    const Grid& g = field.grid;
    if (static_cast<std::size_t>(field.values.size()) != g.size() || g.N1() < 2)
        throw std::invalid_argument("field does not match its grid");
    if (g.x1.front() > -geometry.junction || g.x1.back() < geometry.junction)
        throw std::invalid_argument("grid does not cover the geometry junctions");
    const auto beta = g.weights2();
    Eigen::VectorXd prof[3];
    for (Region r : {Region::Right, Region::Left, Region::Middle})
        if (m <= mode_count(r, g.N2)) prof[static_cast<int>(r)] = mode_samples(m, r, g.N2);
    LineFunction out;
    out.x = g.x1;
    out.v.assign(g.N1(), Complex(0.0));
    for (int i = 0; i < g.N1(); ++i) {
        const auto regions = geometry.projection_regions(g.x1[i]);
        Complex acc = 0.0;
        for (Region r : regions) {
            const auto& p = prof[static_cast<int>(r)];
            if (p.size() == 0) throw std::invalid_argument("mode index outside grid range");
            Complex s = 0.0;
            for (int j = 0; j < g.N2; ++j) s += beta[j] * p[j] * field.at(i, j);
            acc += s;
        }
        out.v[i] = acc / static_cast<double>(regions.size());
    }
    return out;
}

double l2_norm(const GridField& field) {
    const Grid& g = field.grid;
    const auto a = g.weights1();
    const auto b = g.weights2();
    double s = 0.0;
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j < g.N2; ++j) s += a[i] * b[j] * std::norm(field.at(i, j));
    return std::sqrt(s);
}

double gradient_energy(const GridField& field) {
    const Grid& g = field.grid;
    const auto a = g.weights1();
    const auto b = g.weights2();
    const double h2 = g.h2();
    double s = 0.0;
    for (int i = 0; i + 1 < g.N1(); ++i) {
        const double dx = g.x1[i + 1] - g.x1[i];
        for (int j = 0; j < g.N2; ++j) s += b[j] * std::norm(field.at(i + 1, j) - field.at(i, j)) / dx;
    }
    for (int i = 0; i < g.N1(); ++i)
        for (int j = 0; j + 1 < g.N2; ++j) s += a[i] * std::norm(field.at(i, j + 1) - field.at(i, j)) / h2;
    return s;
}

ScaledNorms scaled_norms(const GridField& diff, double eps) {
    const double m = l2_norm(diff);
    const double e = gradient_energy(diff);
    return {eps * m, std::sqrt(eps * eps * m * m + e)};
}

}  // namespace twistband
