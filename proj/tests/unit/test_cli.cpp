#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "twistband/cli.hpp"

using namespace twistband;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("twistband_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("a minimal config takes the defaults") {
    const RunConfig c = parse_config("{}");
    const RunConfig d;
    CHECK(c.scenario == Scenario::All);
    CHECK(c.eps == d.eps);
    CHECK(c.h == d.h);
    CHECK(c.lambda == d.lambda);
    CHECK(c.E.size() == 2);
    const RunConfig e = parse_config(R"({"scenario": "theorem22", "E": ["pi^2/4"], "lambda": {"re": 1, "im": 2}})");
    CHECK(e.scenario == Scenario::FixedLRates);
    CHECK(e.E.at(0) == doctest::Approx(kQuarterPiSq));
    CHECK(e.lambda == Complex(1.0, 2.0));
}

TEST_CASE("invalid configs name the offending key") {
    CHECK(error_of(R"({"lambda": {"re": 1, "im": 0}})").find("lambda.im") != std::string::npos);
    CHECK(error_of(R"({"epsilonn": [0.1]})").find("epsilonn") != std::string::npos);
    CHECK(error_of(R"({"lambda": {"re": 0, "im": 1, "phase": 2}})").find("lambda.phase") != std::string::npos);
    CHECK(error_of(R"({"eps": [0.2, 0.1, 0.05]})").find("eps") != std::string::npos);
    CHECK(error_of(R"({"eps": [0.2, 0.1, 0.12, 0.05]})").find("eps") != std::string::npos);
    CHECK(error_of(R"({"h": 0.03})").find("'h'") != std::string::npos);
    CHECK(error_of(R"({"E": [1.0]})").find("E") != std::string::npos);
    CHECK(error_of(R"({"scenario": "everything"})").find("scenario") != std::string::npos);
    CHECK(error_of(R"({"center": 0.9})").find("center") != std::string::npos);
    CHECK(error_of("{not json").find("JSON") != std::string::npos);
    CHECK_FALSE(error_of("/nonexistent/twistband.json").empty());
}

TEST_CASE("config hash is deterministic and ignores output location") {
    const RunConfig a = parse_config(R"({"ell": 0.5})");
    RunConfig b = parse_config(R"({"ell": 0.5, "out": "elsewhere", "threads": 3})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 7;
    CHECK(config_hash(a) != config_hash(b));
    // Round trip through the canonical form.
    CHECK(config_hash(parse_config_json(to_json(a))) == config_hash(a));
}

TEST_CASE("CSV numbers use twelve significant digits") {
    CHECK(format_number(0.1) == "1.000000000000e-01");
    CHECK(format_number(-2.5e-7) == "-2.500000000000e-07");
    CsvTable t{"t", {"a", "b"}, {{"x,y", format_number(1.0)}}};
    CHECK(render_csv(t) == "a,b\n\"x,y\",1.000000000000e+00\n");
    t.rows.push_back({"only one"});
    CHECK_THROWS(render_csv(t));
}

TEST_CASE("log-log plots carry dashed reference slopes") {
    const std::string svg = render_loglog_svg("t", {{"mode1", {0.2, 0.1, 0.05}, {1e-2, 4e-3, 1e-3}}}, {0.5, 1.5});
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("data-slope=\"0.5\"") != std::string::npos);
    CHECK(svg.find("data-slope=\"1.5\"") != std::string::npos);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    CHECK(svg.find("slope 0.5 (dashed)") != std::string::npos);
}

TEST_CASE("gates are recorded once") {
    ReportBundle b;
    b.add_gate("x", 1.0, "<=", 2.0);
    b.add_gate("y", false);
    CHECK_THROWS(b.add_gate("x", 0.0, ">=", 1.0));
    CHECK_FALSE(b.all_pass());
    const auto s = b.summary(RunConfig{});
    CHECK(s["gates"]["x"]["pass"] == true);
    CHECK(s["gates"]["y"]["pass"] == false);
    CHECK(s["all_pass"] == false);
}

TEST_CASE("bundles replace the output directory atomically") {
    const fs::path root = scratch("bundle");
    const fs::path dir = root / "out";
    fs::create_directories(dir);
    std::ofstream(dir / "stale.csv") << "old\n";
    ReportBundle b;
    b.config_hash = "0";
    b.tables.push_back({"t", {"a"}, {{"1"}}});
    b.add_gate("g", true);
    write_bundle(b, RunConfig{}, dir.string());
    CHECK(fs::exists(dir / "t.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "config.json"));
    CHECK_FALSE(fs::exists(dir / "stale.csv"));
    for (const auto& e : fs::directory_iterator(root)) CHECK(e.path().filename() == "out");
    fs::remove_all(root);
}

TEST_CASE("reruns produce byte-identical output") {
    const fs::path root = scratch("rerun");
    RunConfig c = parse_config(R"({"scenario": "virtual_level"})");
    write_bundle(run_scenario(c), c, (root / "a").string());
    write_bundle(run_scenario(c), c, (root / "b").string());
    for (const char* f : {"virtual_level.csv", "summary.json", "config.json"}) {
        const std::string a = slurp(root / "a" / f);
        CHECK_FALSE(a.empty());
        CHECK(a == slurp(root / "b" / f));
    }
    fs::remove_all(root);
}
