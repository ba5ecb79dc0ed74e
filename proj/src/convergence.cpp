#include "twistband/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <stdexcept>

#include "twistband/discrete_op.hpp"

namespace twistband {

namespace {

constexpr double kTol = 1e-9;

double gauss(double x, const BumpComponent& b) {
    const double r = (x - b.center) / b.width;
    return std::abs(r) <= 5.0 ? b.amplitude * std::exp(-0.5 * r * r) : 0.0;
}

// sum_{k>=0} |A r^k - B s^k|^2
double geo(Complex A, Complex r, Complex B, Complex s) {
    const double rr = std::norm(r), ss = std::norm(s);
    if (!(rr < 1.0) || !(ss < 1.0)) throw SolverError("exterior tail does not decay", std::max(rr, ss));
    double out = std::norm(A) / (1.0 - rr) + std::norm(B) / (1.0 - ss);
    out -= 2.0 * (A * std::conj(B) / (1.0 - r * std::conj(s))).real();
    return out;
}

struct Tail {
    double mass = 0.0;
    double energy = 0.0;
    double full_mass = 0.0;
};

// Exterior contribution beyond one transparent cut: the full solution continues
// with the exterior roots, the effective term with e^{-kappa eps dist}.
Tail exterior_tail(const CutBlock& cut, const GridField& full, const GridField& emb, Complex z, Complex q) {
    const Eigen::VectorXcd a = cut_coefficients(cut, full);
    const Eigen::VectorXcd e = cut_coefficients(cut, emb);
    const auto rho = cut_roots(cut, z, {});
    const double h = cut.h;
    Tail t;
    for (int m = 0; m < a.size(); ++m) {
        const Complex c0 = a[m] - e[m];
        const double mass = 0.5 * h * std::norm(c0) + h * geo(a[m] * rho[m], rho[m], e[m] * q, q);
        const double hor = geo(a[m] * (rho[m] - 1.0), rho[m], e[m] * (q - 1.0), q) / h;
        t.mass += mass;
        t.energy += hor + cut.tau[m] * mass;
        t.full_mass += 0.5 * h * std::norm(a[m]) + h * geo(a[m] * rho[m], rho[m], 0.0, 0.0);
    }
    return t;
}

struct Setup {
    Geometry geometry;
    double E_resc = 0.0;
    EffectiveKind kind;
    double L = 0.0;
    bool fixed_l = false;
    double ell = 0.0;
};

Setup make_setup(const ConvergenceCase& c, double eps, double X, int N2, double ell) {
    Setup s;
    const double tau1 = discrete_threshold(N2);
    if (const auto* t = std::get_if<OverlapCase>(&c)) {
        s.geometry = make_geometry(RescaledEll{ell}, X, CutKind::Transparent).first;
        s.E_resc = tau1;
        s.kind = t->critical_n > 0 ? critical_kind(t->critical_n) : EffectiveKind::dirichlet_at_zero();
        s.ell = ell;
    } else {
        const auto& t2 = std::get<FixedLCase>(c);
        s.geometry = make_geometry(FixedL{t2.L, eps}, X, CutKind::Transparent).first;
        s.E_resc = std::abs(t2.E) <= 1e-12 ? 0.0 : tau1;
        s.kind = fixed_l_kind(t2.L, t2.E);
        s.L = t2.L;
        s.fixed_l = true;
    }
    return s;
}

double mode_profile(int m, const Geometry& g, double x1, double x2) {
    const auto regions = g.projection_regions(x1);
    double p = 0.0;
    for (Region r : regions) p += transverse_mode(m, r).profile(x2);
    return p / static_cast<double>(regions.size());
}

GridField test_field(const SparseOperator& op, const TestFunctionSpec& spec, double eps) {
    const Grid& g = op.grid;
    GridField F(g);
    const double scale = 1.0 / std::sqrt(eps);
    for (int i = 0; i < g.N1(); ++i) {
        const double x = eps * g.x1[i];
        for (const auto& b : spec.components) {
            const double amp = gauss(x, b);
            if (amp == 0.0) continue;
            for (int j = 0; j < g.N2; ++j) {
                if (op.unknown_of[g.index(i, j)] < 0) continue;
                F.at(i, j) += scale * amp * mode_profile(b.mode, op.geometry, g.x1[i], g.x2(j));
            }
        }
    }
    return F;
}

double window_half_length(const ConvergenceCase& c, const std::vector<TestFunctionSpec>& specs, double eps,
                          const GridPolicy& policy) {
    double R = 0.0;
    for (const auto& s : specs) R = std::max(R, s.support_radius());
    if (const auto* t = std::get_if<FixedLCase>(&c)) R = std::max(R, t->L);
    double X = (R + policy.window_pad) / eps;
    if (const auto* t = std::get_if<FixedLCase>(&c)) X = std::max(X, t->L / eps + kTransparentMargin);
    return X;
}

std::vector<ErrorRow> run_cell(const ConvergenceCase& c, double ell, Complex lambda,
                               const std::vector<TestFunctionSpec>& specs, double eps, const GridPolicy& policy) {
    if (!(eps > 0.0 && eps <= 0.3)) throw ConfigError("eps must lie in (0, 0.3]");
    const int N2 = policy.N2();
    const double X = std::max(window_half_length(c, specs, eps, policy), ell + kTransparentMargin);
    const Setup s = make_setup(c, eps, X, N2, ell);
    const SparseOperator op = assemble_operator(build_grid(s.geometry, N2, policy.longitudinal()), s.geometry);
    const Grid& g = op.grid;
    const Complex z = s.E_resc + eps * eps * lambda;
    const ResolventSolver solver(op, z);
    const Complex kappa = std::sqrt(-lambda);

    std::vector<ErrorRow> rows;
    for (const auto& spec : specs) {
        const GridField F = test_field(op, spec, eps);
        const GridField v = solver.solve(F);
        const double residual = solver.last_residual();

        LineFunction P = project_mode(F, 1, s.geometry);
        for (auto& x : P.x) x *= eps;
        for (auto& val : P.v) val *= std::sqrt(eps);
        const LineFunction U = apply_effective_resolvent(s.kind, lambda, P);
        const GridField emb = effective_term_field(U, eps, g, s.geometry);

        GridField full(g);
        full.values = eps * eps * v.values;
        GridField D(g);
        D.values = full.values - emb.values;

        double mass = std::pow(l2_norm(D), 2);
        double energy = gradient_energy(D);
        double full_out = 0.0;
        for (const auto& cut : op.cuts) {
            const Complex q = std::exp(-kappa * eps * cut.h);
            const Tail t = exterior_tail(cut, full, emb, z, q);
            mass += t.mass;
            energy += t.energy;
            full_out += t.full_mass;
        }
        const double fn = eps * l2_norm(F);

        ErrorRow row;
        row.eps = eps;
        row.f_id = spec.id;
        row.f_norm = fn;
        row.err_l2 = eps * std::sqrt(mass) / fn;
        row.err_h1 = std::sqrt(eps * eps * mass + energy) / fn;
        row.ell = s.ell;
        row.solver_residual = residual;
        row.unknowns = op.dimension();
        row.grid_tag = g.tag();
        if (s.fixed_l) {
            const auto a = g.weights1();
            const auto b = g.weights2();
            double out = 0.0;
            for (int i = 0; i < g.N1(); ++i) {
                const double x = eps * g.x1[i];
                const bool outside = std::abs(x) > s.L + kTol;
                const bool masked = !s.kind.active(x) && std::abs(std::abs(x) - s.L) > kTol;
                for (int j = 0; j < g.N2; ++j) {
                    if (outside) out += a[i] * b[j] * std::norm(full.at(i, j));
                    if (masked) row.effective_outside_max = std::max(row.effective_outside_max, std::abs(emb.at(i, j)));
                }
            }
            row.outside_mass = eps * std::sqrt(out + full_out) / fn;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

double TestFunctionSpec::support_radius() const {
    double r = 0.0;
    for (const auto& c : components) r = std::max(r, std::abs(c.center) + 5.0 * c.width);
    return r;
}

bool TestFunctionSpec::excites_mode1() const {
    return std::any_of(components.begin(), components.end(), [](const BumpComponent& c) { return c.mode == 1; });
}

std::vector<TestFunctionSpec> default_test_functions(double center, double width) {
    return {
        {"mode1", {{1, center, width, 1.0}}},
        {"mode2", {{2, center, width, 1.0}}},
        {"mix", {{1, center, width, 1.0}, {2, center - 0.5 * width, 0.75 * width, 0.5}}},
    };
}

int GridPolicy::N2() const { return static_cast<int>(std::lround(1.0 / h)) + 1; }

std::vector<std::string> ErrorTable::f_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : rows)
        if (std::find(ids.begin(), ids.end(), r.f_id) == ids.end()) ids.push_back(r.f_id);
    return ids;
}

std::vector<ErrorRow> ErrorTable::rows_for(const std::string& f_id) const {
    std::vector<ErrorRow> out;
    for (const auto& r : rows)
        if (r.f_id == f_id) out.push_back(r);
    return out;
}

OverlapCase resolve_case(const OverlapCase& c, double h) {
    if (!(c.ell >= 0.0)) throw ConfigError("ell must be nonnegative");
    OverlapCase out = c;
    if (out.critical_n < 0) {
        out.critical_n = 0;
        for (int n = 1; n <= 3; ++n) {
            const double ln = find_critical_length(n, 1e-3, CountSpec{}).estimate;
            if (std::abs(ln - c.ell) <= 1e-2) {
                out.critical_n = n;
                break;
            }
            if (ln > c.ell) break;
        }
    }
    if (out.critical_n > 0) {
        CountSpec spec;
        spec.h = h;
        out.ell = critical_length_on_grid(out.critical_n, spec).value;
    }
    return out;
}

std::string case_label(const ConvergenceCase& c) {
    char buf[96];
    if (const auto* t = std::get_if<OverlapCase>(&c))
        std::snprintf(buf, sizeof buf, "theorem21 ell=%.10g critical_n=%d", t->ell, t->critical_n);
    else {
        const auto& t2 = std::get<FixedLCase>(c);
        std::snprintf(buf, sizeof buf, "theorem22 L=%.10g E=%.10g", t2.L, t2.E);
    }
    return buf;
}

std::vector<double> default_eps_list() { return {0.2, 0.141, 0.1, 0.071, 0.05}; }

ErrorTable run_case(const ConvergenceCase& c, Complex lambda, const std::vector<TestFunctionSpec>& specs,
                    const std::vector<double>& eps_list, const GridPolicy& policy) {
    if (lambda.imag() == 0.0) throw ConfigError("lambda must be nonreal");
    if (eps_list.size() < 4) throw ConfigError("eps list needs at least 4 values");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps list must be strictly decreasing");
    ConvergenceCase resolved = c;
    double ell = 0.0;
    if (const auto* t = std::get_if<OverlapCase>(&c)) {
        const OverlapCase r = resolve_case(*t, policy.h);
        resolved = r;
        ell = r.ell;
    }
    ErrorTable table;
    table.case_label = case_label(resolved);
    table.lambda = lambda;
    std::vector<std::vector<ErrorRow>> cells(eps_list.size());
    const std::size_t workers = static_cast<std::size_t>(std::max(1, policy.threads));
    for (std::size_t start = 0; start < eps_list.size(); start += workers) {
        std::vector<std::future<std::vector<ErrorRow>>> batch;
        const std::size_t stop = std::min(eps_list.size(), start + workers);
        for (std::size_t k = start; k < stop; ++k)
            batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run_cell,
                                       std::cref(resolved), ell, lambda, std::cref(specs), eps_list[k],
                                       std::cref(policy)));
        for (std::size_t k = start; k < stop; ++k) cells[k] = batch[k - start].get();
    }
    for (auto& cell : cells) table.rows.insert(table.rows.end(), cell.begin(), cell.end());
    return table;
}

ErrorTable with_envelope(const ErrorTable& table) {
    ErrorTable out = table;
    std::vector<ErrorRow> env;
    for (const auto& r : table.rows) {
        if (r.f_id == kEnvelopeId) throw std::invalid_argument("table already has an envelope");
        auto it = std::find_if(env.begin(), env.end(), [&](const ErrorRow& e) { return e.eps == r.eps; });
        if (it == env.end()) {
            ErrorRow e = r;
            e.f_id = kEnvelopeId;
            env.push_back(e);
            continue;
        }
        it->err_l2 = std::max(it->err_l2, r.err_l2);
        it->err_h1 = std::max(it->err_h1, r.err_h1);
        it->outside_mass = std::max(it->outside_mass, r.outside_mass);
        it->effective_outside_max = std::max(it->effective_outside_max, r.effective_outside_max);
        it->solver_residual = std::max(it->solver_residual, r.solver_residual);
    }
    out.rows.insert(out.rows.end(), env.begin(), env.end());
    return out;
}

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& err) {
    if (eps.size() != err.size()) throw std::invalid_argument("size mismatch");
    if (eps.size() < 4) throw std::invalid_argument("rate fit needs at least 4 points");
    const std::size_t n = eps.size();
    double mx = 0.0, my = 0.0;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eps[i] > 0.0 && err[i] > 0.0)) throw std::invalid_argument("rate fit needs positive data");
        x[i] = std::log(eps[i]);
        y[i] = std::log(err[i]);
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.points = static_cast<int>(n);
    return f;
}

RateFit fit_rate(const ErrorTable& table, Norm norm, const std::string& f_id) {
    std::vector<double> e, v;
    for (const auto& r : table.rows_for(f_id)) {
        e.push_back(r.eps);
        v.push_back(norm == Norm::L2 ? r.err_l2 : r.err_h1);
    }
    return fit_rate(e, v);
}

double bounded_ratio(const ErrorTable& table, Norm norm, const std::string& f_id, double p) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : table.rows_for(f_id)) {
        const double q = (norm == Norm::L2 ? r.err_l2 : r.err_h1) / std::pow(r.eps, p);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    if (!(lo > 0.0)) throw std::invalid_argument("bounded_ratio needs positive errors");
    return hi / lo;
}

GuardResult discretization_guard(const ConvergenceCase& c, Complex lambda, const std::vector<TestFunctionSpec>& specs,
                                 double eps_min, const GridPolicy& policy) {
    GuardResult worst;
    GridPolicy fine = policy;
    fine.h = policy.h / 2;
    fine.h1 = policy.h1 / 2;
    std::vector<ErrorRow> coarse_rows, fine_rows;
    if (const auto* t = std::get_if<OverlapCase>(&c)) {
        const OverlapCase rc = resolve_case(*t, policy.h);
        const OverlapCase rf = resolve_case(OverlapCase{t->ell, rc.critical_n == 0 ? 0 : rc.critical_n}, fine.h);
        coarse_rows = run_cell(rc, rc.ell, lambda, specs, eps_min, policy);
        fine_rows = run_cell(rf, rf.ell, lambda, specs, eps_min, fine);
    } else {
        coarse_rows = run_cell(c, 0.0, lambda, specs, eps_min, policy);
        fine_rows = run_cell(c, 0.0, lambda, specs, eps_min, fine);
    }
    for (std::size_t k = 0; k < coarse_rows.size(); ++k) {
        const double a = coarse_rows[k].err_l2;
        const double b = fine_rows[k].err_l2;
        const double r = std::abs(a - b) / b;
        if (k == 0 || r > worst.ratio) worst = {r, a, b};
    }
    return worst;
}

}  // namespace twistband
