#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace powertalk {

/// Failure categories surfaced by the library. The CLI maps each category
/// onto a process exit code.
enum class ErrorKind {
    DisconnectedGraph,
    NonpositiveResistance,
    DuplicateLine,
    NoConverter,
    InvalidArgument,
    NoRealRoot,
    NonConvergence,
    SingularSystem,
    TopologyMismatch,
    InputOnLoadBus,
    InfeasibleBudget,
    EmptySearchSpace,
    ParseError,
    SchemaError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace powertalk
