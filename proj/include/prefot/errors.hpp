#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefot {

enum class ErrorKind {
    CurveSelfIntersection,
    MeshingFailure,
    DimensionMismatch,
    SolverStagnation,
    NewtonDivergence,
    ZeroMass,
    Infeasible,
    NoBracket,
    DegenerateInput,
    ClosedCurve,
    ParseError,
    ValidationError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; the kind decides how callers
/// (and the CLI exit code) react.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::CurveSelfIntersection: return "CurveSelfIntersection";
        case ErrorKind::MeshingFailure: return "MeshingFailure";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SolverStagnation: return "SolverStagnation";
        case ErrorKind::NewtonDivergence: return "NewtonDivergence";
        case ErrorKind::ZeroMass: return "ZeroMass";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::NoBracket: return "NoBracket";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::ClosedCurve: return "ClosedCurve";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace prefot
