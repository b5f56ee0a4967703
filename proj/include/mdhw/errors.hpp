/// @file errors.hpp
/// @brief Exception types raised by the library.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mdhw {

class Error : public std::runtime_error {
public:
    Error(const std::string& kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(kind) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define MDHW_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}         \
    };

MDHW_DEFINE_ERROR(SingularJacobian)
MDHW_DEFINE_ERROR(DegenerateLevelSet)
MDHW_DEFINE_ERROR(InvalidRadii)
MDHW_DEFINE_ERROR(UnknownLabel)
MDHW_DEFINE_ERROR(SolverDivergence)
MDHW_DEFINE_ERROR(DependentBasis)
MDHW_DEFINE_ERROR(NonSolenoidalInput)
MDHW_DEFINE_ERROR(BadParameters)
MDHW_DEFINE_ERROR(FluxViolation)
MDHW_DEFINE_ERROR(BlowupDetected)
MDHW_DEFINE_ERROR(NoConvergence)
MDHW_DEFINE_ERROR(InvalidMesh)

#undef MDHW_DEFINE_ERROR

/// Malformed configuration text; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& msg)
        : Error("ParseError", "line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Aggregated configuration violations.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : Error("ValidationError", join(issues)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) s += "; ";
            s += v[i];
        }
        return s;
    }
    std::vector<std::string> issues_;
};

}  // namespace mdhw
