#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "twistband/types.hpp"

namespace twistband {

enum class Scenario { CriticalLengths, VirtualLevel, Identities, AuxProblem, OverlapRates, FixedLRates, All };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

struct RunConfig {
    Scenario scenario = Scenario::All;
    double ell = 0.7;
    int critical_n = 1;
    double L = 1.0;
    std::vector<double> E = {0.0, kQuarterPiSq};
    Complex lambda{0.0, 1.0};
    std::vector<double> eps = {0.2, 0.141, 0.1, 0.071, 0.05};
    double h = 1.0 / 32;
    double count_h = 0.05;
    double crit_tol = 1e-3;
    int n_max = 2;
    double aux_h = 1.0 / 16;
    double aux_X = 10.0;
    std::vector<Complex> mu_samples = {0.0, 0.05, 0.1, std::polar(0.1, kPi / 4), std::polar(0.1, -kPi / 4)};
    double center = 0.4;
    double width = 0.12;
    // Centre of the test functions for E = pi^2/4, whose support lies outside [-L, L].
    double center_outside = 1.7;
    double window_pad = 0.25;
    bool guard = true;
    std::string out = "twistband_out";
    int threads = 1;
    std::uint64_t seed = 0;
};

// Text starting with '{' is parsed inline, anything else is read as a path.
RunConfig parse_config(const std::string& path_or_text);
RunConfig parse_config_json(const nlohmann::ordered_json& j);
void validate(const RunConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);
// FNV-1a of the canonical JSON form, 16 hex digits.
std::string config_hash(const RunConfig& c);

struct Gate {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;
    bool pass = false;
};

struct CsvTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ReportBundle {
    std::string config_hash;
    std::vector<CsvTable> tables;
    std::vector<std::pair<std::string, std::string>> svgs;
    std::vector<Gate> gates;
    nlohmann::ordered_json fits = nlohmann::ordered_json::object();
    nlohmann::ordered_json residuals = nlohmann::ordered_json::object();
    std::vector<std::string> grid_tags;

    // Throws if a gate with the same name was already recorded.
    void add_gate(const std::string& name, double value, const std::string& relation, double threshold);
    void add_gate(const std::string& name, bool pass);
    void add_grid_tag(const std::string& tag);
    bool all_pass() const;
    nlohmann::ordered_json summary(const RunConfig& c) const;
};

std::string format_number(double v);
std::string render_csv(const CsvTable& t);
std::string render_loglog_svg(const std::string& title, const std::vector<SvgSeries>& series,
                              const std::vector<double>& reference_slopes);

ReportBundle run_scenario(const RunConfig& c);
// Files go to a staging directory next to dir, which then replaces dir.
void write_bundle(const ReportBundle& b, const RunConfig& c, const std::string& dir);

}  // namespace twistband
