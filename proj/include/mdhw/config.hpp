/// @file config.hpp
/// @brief Run configuration: flat `key = value` text with dotted namespaces.
///
/// Lines are `key = value`; `#` starts a comment; blank lines are ignored.
/// Keys not listed in config_keys() are rejected. Defaults: resolution 16,
/// galerkin.m 16, time.steps 128 (dt = T / 128).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdhw/geometry.hpp"
#include "mdhw/mesh.hpp"

namespace mdhw {

struct RunConfig {
    std::string scenario;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    // geometry: annulus | torus | mesh
    std::string geometry = "annulus";
    double R0 = 2.0, R1 = 1.0;          // annulus outer / inner radius
    double major = 2.0, minor = 0.5;    // torus radii
    std::string mesh_file;
    int resolution = 16;

    // motion: identity | dilation | shear | pulsating_annulus
    std::string motion = "identity";
    double lambda0 = 1.0, amplitude = 0.1, period = 1.0;
    double shear = 0.2, omega = 1.0;

    double T = 0.0;  // 0 means one motion period
    int steps = 128;
    int samples = 9;  // time grid for decompose / estimate-constant / smallness

    // verify-geometry
    int points = 12;
    int div_probes = 20;

    // decompose
    std::string field = "mixed";  // solenoidal | mixed | swirl | x
    int n_fields = 1;
    double decompose_time = 0.0;

    // differentiate
    std::vector<double> anchors{0.3};
    double eps = 1e-2;

    // estimate-constant
    int probes = 8;

    // galerkin
    int m = 16;
    std::string forcing = "swirl";  // swirl | steady | none
    double forcing_amplitude = 1.0;
    int n_r = 8, n_theta = 8, n_phi = 16;
    int max_iters = 50;
    double fp_tol = 1e-6;
    int ball_starts = 20;
    int smallness_resolution = 8;

    // cutoff
    double rho = 0.5, delta = 0.2;

    // boundary data: outward flux through Gamma_1 of the radial field
    std::string beta = "radial";  // radial | none
    double flux = 5.0;

    double cg_tol = 1e-11;
    int vtk_stride = 32;

    /// Period of the motion in time units.
    double motion_period() const;
    /// T, defaulted to one motion period.
    double horizon() const { return T > 0.0 ? T : motion_period(); }
};

/// Names accepted for `scenario`.
const std::vector<std::string>& scenario_names();
/// All accepted keys.
const std::vector<std::string>& config_keys();

/// Throws ParseError (with line) for malformed lines or values, ValidationError
/// listing every range violation, unknown key and unknown scenario. A nonempty
/// `scenario` (the CLI subcommand) fills in or must match the `scenario` key.
RunConfig parse_config(const std::string& text, const std::string& scenario = "");

/// Range checks on a config built in code; returns the violations.
std::vector<std::string> validate(const RunConfig& c);

MotionPtr make_motion(const RunConfig& c);
ReferenceMesh make_mesh(const RunConfig& c);
ReferenceMesh make_mesh(const RunConfig& c, int resolution);

}  // namespace mdhw
