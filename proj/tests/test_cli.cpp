#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "mdhw/config.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/io.hpp"
#include "mdhw/scenarios.hpp"

using namespace mdhw;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mdhw_test_cli_" + name);
    fs::remove_all(p);
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.issues();
    }
    return {};
}

bool has_issue(const std::vector<std::string>& v, const std::string& key) {
    for (const auto& s : v)
        if (s.rfind(key + ":", 0) == 0) return true;
    return false;
}

}  // namespace

TEST_CASE("minimal config takes the defaults") {
    const RunConfig c = parse_config("scenario = decompose\n");
    CHECK(c.resolution == 16);
    CHECK(c.m == 16);
    CHECK(c.steps == 128);
    CHECK(c.geometry == "annulus");
    CHECK(c.horizon() == 1.0);
    CHECK(c.horizon() / c.steps == 1.0 / 128);
}

TEST_CASE("values, comments and dotted keys") {
    const RunConfig c = parse_config(
        "# dilating annulus\n"
        "scenario = verify-geometry   # trailing comment\n"
        "\n"
        "motion.name = dilation\n"
        "motion.lambda0 = 2\n"
        "motion.amplitude=0.5\n"
        "differentiate.anchors = 0.1, 0.4,0.9\n"
        "seed = 42\n");
    CHECK(c.motion == "dilation");
    CHECK(c.lambda0 == 2.0);
    CHECK(c.amplitude == 0.5);
    CHECK(c.seed == 42);
    REQUIRE(c.anchors.size() == 3);
    CHECK(c.anchors[1] == 0.4);
}

TEST_CASE("negative radius names the key") {
    const auto v = issues_of("scenario = decompose\ngeometry.R1 = -1\n");
    CHECK(has_issue(v, "geometry.R1"));
    CHECK_FALSE(has_issue(v, "geometry.R0"));
}

TEST_CASE("unknown scenario lists the valid ones") {
    const auto v = issues_of("scenario = relax\n");
    REQUIRE(v.size() == 1);
    for (const auto& s : scenario_names()) CHECK(v[0].find(s) != std::string::npos);
}

TEST_CASE("all violations are reported together") {
    const auto v = issues_of("scenario = solve-periodic\nresolution = 1\ngalerkin.m = 0\ncutoff.rho = 2\nfoo.bar = 1\n");
    CHECK(has_issue(v, "resolution"));
    CHECK(has_issue(v, "galerkin.m"));
    CHECK(has_issue(v, "cutoff.rho"));
    CHECK(has_issue(v, "foo.bar"));
}

TEST_CASE("period consistency and step bound") {
    CHECK(has_issue(issues_of("scenario = decompose\nmotion.name = dilation\ntime.T = 1.5\n"), "time.T"));
    CHECK(issues_of("scenario = decompose\nmotion.name = dilation\ntime.T = 3\n").empty());
    CHECK(has_issue(issues_of("scenario = decompose\ntime.steps = 32\n"), "time.steps"));
}

TEST_CASE("parse errors carry the line") {
    auto line_of = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("scenario = decompose\n# ok\nresolution 16\n") == 3);
    CHECK(line_of("scenario = decompose\nresolution = sixteen\n") == 2);
    CHECK(line_of("scenario = decompose\nresolution = 16.5\n") == 2);
    CHECK(line_of("scenario = decompose\n = 3\n") == 2);
    CHECK(line_of("scenario = decompose\nseed = 1\nseed = 2\n") == 3);
    CHECK(line_of("galerkin.m =\n") == 1);
}

TEST_CASE("the command fills in or must match the scenario") {
    CHECK(parse_config("resolution = 8\n", "decompose").scenario == "decompose");
    CHECK(has_issue(issues_of("resolution = 8\n"), "scenario"));
    CHECK_THROWS_AS(parse_config("scenario = decompose\n", "differentiate"), ValidationError);
}

TEST_CASE("named fields") {
    const auto f = named_field("solenoidal", 3, 1);
    const Vec3 x(0.3, -0.7, 1.1);
    const double h = 1e-5;
    double div = 0.0;
    for (int i = 0; i < 3; ++i) {
        Vec3 e = Vec3::Zero();
        e[i] = h;
        div += (f(x + e)[i] - f(x - e)[i]) / (2 * h);
    }
    CHECK(std::abs(div) <= 1e-9);
    CHECK((named_field("mixed", 3, 1)(x) - named_field("mixed", 3, 1)(x)).norm() == 0.0);
    CHECK((named_field("mixed", 3, 1)(x) - named_field("mixed", 3, 2)(x)).norm() > 0.0);
    CHECK_THROWS_AS(named_field("vortex", 1, 0), BadParameters);
}

TEST_CASE("csv and vtk writers") {
    const std::string dir = scratch("writers");
    fs::create_directories(dir);
    {
        CsvWriter csv(dir + "/t.csv", {"a", "b"});
        csv.cell(1).cell(0.1).end_row();
        CHECK_THROWS_AS(csv.cell(1).cell(2).cell(3), BadParameters);
    }
    CHECK(slurp(dir + "/t.csv") == "a,b\n1,0.1\n1,2");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
    const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    write_vtk(dir + "/t.vtk", "tet", pts, {{0, 1, 2, 3}}, {{"s", VectorXd::Ones(4)}, {"v", VectorXd::Zero(12)}});
    const std::string vtk = slurp(dir + "/t.vtk");
    CHECK(vtk.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
    CHECK(vtk.find("CELL_TYPES 1\n10\n") != std::string::npos);
    CHECK(vtk.find("POINT_DATA 4\nSCALARS s double 1") != std::string::npos);
    CHECK(vtk.find("VECTORS v double") != std::string::npos);
    CHECK_THROWS_AS(write_vtk(dir + "/bad.vtk", "x", pts, {{0, 1, 2, 3}}, {{"s", VectorXd::Ones(5)}}), BadParameters);
}

TEST_CASE("verify-geometry on the dilation") {
    RunConfig c = parse_config(
        "scenario = verify-geometry\nmotion.name = dilation\nmotion.amplitude = 0.1\n"
        "motion.period = 6.283185307179586\nresolution = 4\n");
    c.output_dir = scratch("vg");
    const ScenarioOutcome out = run_scenario(c);
    CHECK(out.status == kExitOk);
    const auto rep = nlohmann::json::parse(out.report);
    CHECK(rep["analytic"]["pass"] == true);
    for (const auto& [k, v] : rep["analytic"]["residuals"].items()) CHECK_MESSAGE(v.get<double>() <= 1e-10, k);
    CHECK(rep["finite_difference"]["pass"] == true);
    CHECK(rep["divergence"]["max_defect"].get<double>() <= 1e-6);
    CHECK(slurp(fs::path(c.output_dir) / "report.json") == out.report);

    // rerun: bit-identical report
    const ScenarioOutcome again = run_scenario(c);
    CHECK(again.report == out.report);
    c.seed = 2;
    CHECK(run_scenario(c).report != out.report);
}

TEST_CASE("strict decompose rejects a non-solenoidal field") {
    RunConfig c = parse_config("scenario = decompose\nresolution = 4\ndecompose.field = x\n");
    c.output_dir = scratch("strict");
    try {
        run_scenario(c, true);
        FAIL("expected NonSolenoidalInput");
    } catch (const ScenarioFailure& e) {
        CHECK(e.kind() == "NonSolenoidalInput");
        CHECK(e.module() == "hw_decomposition");
        CHECK(e.operation() == "decompose_solenoidal");
    }
    const auto rep = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "report.json"));
    CHECK(rep["status"] == "error");
    CHECK(rep["error"]["kind"] == "NonSolenoidalInput");

    SUBCASE("without strict the same field decomposes") {
        const ScenarioOutcome out = run_scenario(c, false);
        CHECK(out.status == kExitOk);
        const auto r = nlohmann::json::parse(out.report);
        CHECK(r["fields"][0]["residual"].get<double>() <= 1e-6);
        CHECK(fs::exists(fs::path(c.output_dir) / "decompose.vtk"));
    }
    SUBCASE("a discretely solenoidal probe passes strict mode") {
        c.field = "solenoidal";
        CHECK(run_scenario(c, true).status == kExitOk);
    }
}

TEST_CASE("solve-periodic without convergence still writes the report") {
    RunConfig c = parse_config(
        "scenario = solve-periodic\nmotion.name = pulsating_annulus\nmotion.amplitude = 0.05\n"
        "galerkin.m = 4\ngalerkin.max_iters = 2\ngalerkin.ball_starts = 2\nresolution = 4\n"
        "galerkin.smallness_resolution = 4\n");
    c.output_dir = scratch("noconv");
    const ScenarioOutcome out = run_scenario(c);
    CHECK(out.status == kExitNoConvergence);
    const auto rep = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "report.json"));
    CHECK(rep["status"] == "NoConvergence");
    CHECK(rep["fixed_point"]["converged"] == false);
    CHECK(rep["fixed_point"]["residual_history"].size() == 2);
    CHECK(rep["ball_invariance"]["pass"] == true);
    CHECK(fs::exists(fs::path(c.output_dir) / "residual_history.csv"));
    CHECK(fs::exists(fs::path(c.output_dir) / "energy_ledger.csv"));
}

TEST_CASE("module errors carry context") {
    RunConfig c = parse_config(
        "scenario = solve-periodic\nmotion.name = pulsating_annulus\nmotion.amplitude = 0.05\n"
        "galerkin.m = 2\nbeta.flux = 5000\nresolution = 4\ngalerkin.smallness_resolution = 4\n");
    c.output_dir = scratch("blowup");
    try {
        run_scenario(c);
        FAIL("expected failure for a large flux");
    } catch (const ScenarioFailure& e) {
        CHECK(e.kind() == "BadParameters");
        CHECK(e.module() == "galerkin_periodic");
        CHECK(e.operation() == "ball_radius");
    }
    RunConfig bad = c;
    bad.R1 = -1.0;
    CHECK_THROWS_AS(run_scenario(bad), ValidationError);
}
