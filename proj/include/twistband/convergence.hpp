#pragma once

#include <string>
#include <variant>
#include <vector>

#include "twistband/effective.hpp"
#include "twistband/spectral.hpp"

namespace twistband {

// amplitude * exp(-((x1 - center)/width)^2 / 2) on |x1 - center| <= 5 width,
// times the mode-m transverse profile; original variables.
struct BumpComponent {
    int mode = 1;
    double center = 0.4;
    double width = 0.12;
    double amplitude = 1.0;
};

struct TestFunctionSpec {
    std::string id;
    std::vector<BumpComponent> components;

    double support_radius() const;
    bool excites_mode1() const;
};

// mode1, mode2 and mix, with supports centred at `center`.
std::vector<TestFunctionSpec> default_test_functions(double center = 0.4, double width = 0.12);

// critical_n: 0 noncritical, n > 0 critical at the n-th length (ell is then
// snapped to the critical length of the sweep grid), -1 decides from ell.
struct OverlapCase {
    double ell = 0.7;
    int critical_n = -1;
};

struct FixedLCase {
    double L = 1.0;
    double E = 0.0;
};

using ConvergenceCase = std::variant<OverlapCase, FixedLCase>;

struct GridPolicy {
    double h = 1.0 / 32;
    // Longitudinal spacing; 0 means h.
    double h1 = 0.0;
    double window_pad = 0.25;
    int threads = 1;

    int N2() const;
    double longitudinal() const { return h1 > 0.0 ? h1 : h; }
};

struct ErrorRow {
    double eps = 0.0;
    std::string f_id;
    double err_l2 = 0.0;
    double err_h1 = 0.0;
    double f_norm = 0.0;
    // Full solution outside [-L, L] relative to |f| (fixed-L cases only).
    double outside_mass = 0.0;
    // Largest |effective term| on the region where E_E vanishes.
    double effective_outside_max = 0.0;
    double ell = 0.0;
    double solver_residual = 0.0;
    int unknowns = 0;
    std::string grid_tag;
};

struct ErrorTable {
    std::string case_label;
    Complex lambda;
    std::vector<ErrorRow> rows;

    std::vector<std::string> f_ids() const;
    std::vector<ErrorRow> rows_for(const std::string& f_id) const;
};

enum class Norm { L2, H1 };

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int points = 0;
};

// Resolves auto criticality and snaps critical ell to the grid with spacing h.
OverlapCase resolve_case(const OverlapCase& c, double h);
std::string case_label(const ConvergenceCase& c);

std::vector<double> default_eps_list();

ErrorTable run_case(const ConvergenceCase& c, Complex lambda, const std::vector<TestFunctionSpec>& specs,
                    const std::vector<double>& eps_list, const GridPolicy& policy = {});

inline const std::string kEnvelopeId = "sup";
// Appends rows with f_id "sup" holding, per eps, the largest L2 and H1 errors
// over the test functions; a sampled stand-in for the operator norm.
ErrorTable with_envelope(const ErrorTable& table);

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& err);
RateFit fit_rate(const ErrorTable& table, Norm norm, const std::string& f_id);

// max / min over eps of err / eps^p.
double bounded_ratio(const ErrorTable& table, Norm norm, const std::string& f_id, double p);

struct GuardResult {
    double ratio = 0.0;
    double err_h = 0.0;
    double err_h2 = 0.0;
};

// |err_h - err_{h/2}| / err_{h/2} in the L2 error at eps_min, worst over specs.
GuardResult discretization_guard(const ConvergenceCase& c, Complex lambda, const std::vector<TestFunctionSpec>& specs,
                                 double eps_min, const GridPolicy& policy = {});

}  // namespace twistband
