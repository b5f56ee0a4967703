/// @file scenarios.hpp
/// @brief Scenario orchestration behind the command line tool.
///
/// Every run writes `report.json` into the output directory, also when a
/// module fails (the report then carries the error). Reports hold no timings,
/// so reruns with the same config and seed are bit-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdhw/config.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/fem.hpp"

namespace mdhw {

enum ExitStatus : int {
    kExitOk = 0,
    kExitChecksFailed = 1,  // the run finished but a reported check is red
    kExitUsage = 2,         // ParseError / ValidationError / bad flags
    kExitModuleError = 3,
    kExitNoConvergence = 4,
};

/// A module error with the module and operation it came from; kind() is the
/// kind of the original error.
class ScenarioFailure : public Error {
public:
    ScenarioFailure(const std::string& kind, std::string module, std::string operation, const std::string& what)
        : Error(kind, module + "." + operation + ": " + what),
          module_(std::move(module)),
          operation_(std::move(operation)) {}
    const std::string& module() const { return module_; }
    const std::string& operation() const { return operation_; }

private:
    std::string module_, operation_;
};

struct ScenarioOutcome {
    int status = kExitOk;
    std::string report;                  // contents of report.json
    std::vector<std::string> artifacts;  // file names inside the output directory
};

/// Runs c.scenario. Throws ScenarioFailure after writing the error report.
ScenarioOutcome run_scenario(const RunConfig& c, bool strict = false);

/// Named physical test fields: "x", "swirl", "solenoidal" (analytic,
/// divergence free) and "mixed" (seeded trigonometric with a linear part).
VectorFn named_field(const std::string& name, std::uint64_t seed, int k);

}  // namespace mdhw
