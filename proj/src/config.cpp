#include "mdhw/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "mdhw/errors.hpp"
#include "mdhw/galerkin.hpp"

namespace mdhw {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, int line, const std::string& key) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError(line, "'" + key + "' expects a number, got '" + v + "'");
    }
}

long long to_int(const std::string& v, int line, const std::string& key) {
    try {
        size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ParseError(line, "'" + key + "' expects an integer, got '" + v + "'");
    }
}

using Setter = std::function<void(RunConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& setters() {
    auto num = [](double RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& v, int line) { c.*f = to_double(v, line, ""); });
    };
    auto integer = [](int RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& v, int line) {
            c.*f = static_cast<int>(to_int(v, line, ""));
        });
    };
    auto str = [](std::string RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& v, int) { c.*f = v; });
    };
    static const std::map<std::string, Setter> s = {
        {"scenario", str(&RunConfig::scenario)},
        {"seed",
         [](RunConfig& c, const std::string& v, int line) {
             const long long i = to_int(v, line, "seed");
             if (i < 0) throw ParseError(line, "'seed' must be nonnegative");
             c.seed = static_cast<std::uint64_t>(i);
         }},
        {"output.dir", str(&RunConfig::output_dir)},
        {"geometry.kind", str(&RunConfig::geometry)},
        {"geometry.R0", num(&RunConfig::R0)},
        {"geometry.R1", num(&RunConfig::R1)},
        {"geometry.major", num(&RunConfig::major)},
        {"geometry.minor", num(&RunConfig::minor)},
        {"geometry.mesh_file", str(&RunConfig::mesh_file)},
        {"resolution", integer(&RunConfig::resolution)},
        {"motion.name", str(&RunConfig::motion)},
        {"motion.lambda0", num(&RunConfig::lambda0)},
        {"motion.amplitude", num(&RunConfig::amplitude)},
        {"motion.period", num(&RunConfig::period)},
        {"motion.shear", num(&RunConfig::shear)},
        {"motion.omega", num(&RunConfig::omega)},
        {"time.T", num(&RunConfig::T)},
        {"time.steps", integer(&RunConfig::steps)},
        {"time.samples", integer(&RunConfig::samples)},
        {"decompose.field", str(&RunConfig::field)},
        {"decompose.count", integer(&RunConfig::n_fields)},
        {"decompose.time", num(&RunConfig::decompose_time)},
        {"verify.points", integer(&RunConfig::points)},
        {"verify.div_probes", integer(&RunConfig::div_probes)},
        {"differentiate.anchors",
         [](RunConfig& c, const std::string& v, int line) {
             c.anchors.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) c.anchors.push_back(to_double(trim(item), line, "anchors"));
         }},
        {"differentiate.eps", num(&RunConfig::eps)},
        {"estimate.probes", integer(&RunConfig::probes)},
        {"galerkin.m", integer(&RunConfig::m)},
        {"galerkin.forcing", str(&RunConfig::forcing)},
        {"galerkin.forcing_amplitude", num(&RunConfig::forcing_amplitude)},
        {"galerkin.n_r", integer(&RunConfig::n_r)},
        {"galerkin.n_theta", integer(&RunConfig::n_theta)},
        {"galerkin.n_phi", integer(&RunConfig::n_phi)},
        {"galerkin.max_iters", integer(&RunConfig::max_iters)},
        {"galerkin.tol", num(&RunConfig::fp_tol)},
        {"galerkin.ball_starts", integer(&RunConfig::ball_starts)},
        {"galerkin.smallness_resolution", integer(&RunConfig::smallness_resolution)},
        {"cutoff.rho", num(&RunConfig::rho)},
        {"cutoff.delta", num(&RunConfig::delta)},
        {"beta.field", str(&RunConfig::beta)},
        {"beta.flux", num(&RunConfig::flux)},
        {"tol.cg", num(&RunConfig::cg_tol)},
        {"output.vtk_stride", integer(&RunConfig::vtk_stride)},
    };
    return s;
}

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
    return std::any_of(opts.begin(), opts.end(), [&](const char* o) { return v == o; });
}

}  // namespace

double RunConfig::motion_period() const {
    if (motion == "shear") return 2.0 * std::acos(-1.0) / omega;
    return period;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> n{"verify-geometry", "decompose", "differentiate", "solve-periodic",
                                            "estimate-constant"};
    return n;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v;
        for (const auto& [key, s] : setters()) v.push_back(key);
        return v;
    }();
    return k;
}

std::vector<std::string> validate(const RunConfig& c) {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) bad.push_back(msg);
    };
    if (std::find(scenario_names().begin(), scenario_names().end(), c.scenario) == scenario_names().end()) {
        std::string list;
        for (const auto& s : scenario_names()) list += (list.empty() ? "" : ", ") + s;
        bad.push_back("scenario: unknown scenario '" + c.scenario + "'; valid scenarios: " + list);
    }
    need(one_of(c.geometry, {"annulus", "torus", "mesh"}), "geometry.kind: expected annulus, torus or mesh");
    need(c.R0 > 0.0, "geometry.R0: radius must be positive");
    need(c.R1 > 0.0, "geometry.R1: radius must be positive");
    need(!(c.R0 > 0.0 && c.R1 > 0.0) || c.R1 < c.R0, "geometry.R1: must be below geometry.R0");
    need(c.major > 0.0, "geometry.major: radius must be positive");
    need(c.minor > 0.0, "geometry.minor: radius must be positive");
    need(!(c.major > 0.0 && c.minor > 0.0) || c.minor < c.major, "geometry.minor: must be below geometry.major");
    need(c.geometry != "mesh" || !c.mesh_file.empty(), "geometry.mesh_file: required for geometry.kind = mesh");
    need(c.resolution >= 4 && c.resolution <= 64, "resolution: expected 4..64");
    need(one_of(c.motion, {"identity", "dilation", "shear", "pulsating_annulus"}),
         "motion.name: expected identity, dilation, shear or pulsating_annulus");
    need(c.period > 0.0, "motion.period: must be positive");
    need(c.omega > 0.0, "motion.omega: must be positive");
    if (c.motion == "dilation") {
        need(c.lambda0 > 0.0, "motion.lambda0: must be positive");
        need(std::abs(c.amplitude) < c.lambda0, "motion.amplitude: must stay below motion.lambda0");
    }
    if (c.motion == "pulsating_annulus") {
        need(c.geometry == "annulus", "motion.name: pulsating_annulus needs geometry.kind = annulus");
        need(std::abs(c.amplitude) < c.R1 && c.R1 + std::abs(c.amplitude) < c.R0,
             "motion.amplitude: inner radius must stay in (0, geometry.R0)");
    }
    need(c.T >= 0.0, "time.T: must be nonnegative");
    if (c.T > 0.0 && c.motion != "identity" && c.motion_period() > 0.0) {
        const double k = c.T / c.motion_period();
        need(std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k) && std::round(k) >= 1.0,
             "time.T: must be a multiple of the motion period");
    }
    need(c.steps >= 64, "time.steps: dt must not exceed T/64");
    need(c.samples >= 1 && c.samples <= 1000, "time.samples: expected 1..1000");
    need(one_of(c.field, {"solenoidal", "mixed", "swirl", "x"}),
         "decompose.field: expected solenoidal, mixed, swirl or x");
    need(c.n_fields >= 1 && c.n_fields <= 100, "decompose.count: expected 1..100");
    need(c.points >= 1 && c.points <= 10000, "verify.points: expected 1..10000");
    need(c.div_probes >= 0 && c.div_probes <= 1000, "verify.div_probes: expected 0..1000");
    need(!c.anchors.empty(), "differentiate.anchors: at least one anchor");
    need(c.eps > 0.0 && c.eps < 1.0, "differentiate.eps: expected (0, 1)");
    need(c.probes >= 8, "estimate.probes: at least 8");
    need(c.m >= 1 && c.m <= max_shell_modes(BasisOrdering::Ritz),
         "galerkin.m: expected 1.." + std::to_string(max_shell_modes(BasisOrdering::Ritz)));
    need(one_of(c.forcing, {"swirl", "steady", "none"}), "galerkin.forcing: expected swirl, steady or none");
    need(c.n_r >= 2 && c.n_theta >= 2 && c.n_phi >= 4, "galerkin.n_r: quadrature too coarse");
    need(c.max_iters >= 1, "galerkin.max_iters: must be positive");
    need(c.fp_tol > 0.0, "galerkin.tol: must be positive");
    need(c.ball_starts >= 0, "galerkin.ball_starts: must be nonnegative");
    need(c.smallness_resolution >= 4 && c.smallness_resolution <= 64, "galerkin.smallness_resolution: expected 4..64");
    need(c.rho > 0.0 && c.rho < 1.0, "cutoff.rho: expected (0, 1)");
    need(c.delta > 0.0 && 2.0 * c.delta < c.rho, "cutoff.delta: expected 0 < 2 delta < rho");
    need(one_of(c.beta, {"radial", "none"}), "beta.field: expected radial or none");
    need(c.cg_tol > 0.0 && c.cg_tol < 1e-3, "tol.cg: expected (0, 1e-3)");
    need(c.vtk_stride >= 1, "output.vtk_stride: must be positive");
    return bad;
}

RunConfig parse_config(const std::string& text, const std::string& scenario) {
    RunConfig c;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    std::vector<std::string> unknown;
    std::map<std::string, int> seen;
    while (std::getline(is, raw)) {
        ++line;
        const std::string s = trim(raw.substr(0, raw.find('#')));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(line, "expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError(line, "missing key");
        if (value.empty()) throw ParseError(line, "missing value for '" + key + "'");
        if (seen.count(key)) throw ParseError(line, "duplicate key '" + key + "' (first on line " +
                                                        std::to_string(seen[key]) + ")");
        seen[key] = line;
        const auto it = setters().find(key);
        if (it == setters().end()) {
            unknown.push_back(key + ": unknown key (line " + std::to_string(line) + ")");
            continue;
        }
        try {
            it->second(c, value, line);
        } catch (const ParseError&) {
            // setters do not know their key; rebuild the message with it
            throw ParseError(line, "'" + key + "' has invalid value '" + value + "'");
        }
    }
    std::vector<std::string> bad = unknown;
    if (!scenario.empty()) {
        if (seen.count("scenario") && c.scenario != scenario)
            bad.push_back("scenario: config names '" + c.scenario + "' but the command is '" + scenario + "'");
        c.scenario = scenario;
    } else if (!seen.count("scenario")) {
        bad.push_back("scenario: missing");
    }
    const bool named = !c.scenario.empty() || seen.count("scenario");
    for (const auto& r : validate(c))
        if (named || r.rfind("scenario:", 0) != 0) bad.push_back(r);
    if (!bad.empty()) throw ValidationError(bad);
    return c;
}

MotionPtr make_motion(const RunConfig& c) {
    if (c.motion == "identity") return make_identity(c.period);
    if (c.motion == "dilation") return make_dilation(c.lambda0, c.amplitude, c.period);
    if (c.motion == "shear") return make_shear(c.shear, c.omega);
    if (c.motion == "pulsating_annulus") return make_pulsating_annulus(c.R0, c.R1, c.amplitude, c.period);
    throw BadParameters("unknown motion '" + c.motion + "'");
}

ReferenceMesh make_mesh(const RunConfig& c) { return make_mesh(c, c.resolution); }

ReferenceMesh make_mesh(const RunConfig& c, int resolution) {
    if (c.geometry == "annulus") return generate_annulus_mesh(c.R0, c.R1, resolution);
    if (c.geometry == "torus") return generate_solid_torus_mesh(c.major, c.minor, resolution);
    std::ifstream in(c.mesh_file);
    if (!in) throw BadParameters("cannot open mesh file '" + c.mesh_file + "'");
    return read_mesh(in);
}

}  // namespace mdhw
