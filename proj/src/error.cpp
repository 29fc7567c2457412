#include "powertalk/error.hpp"

namespace powertalk {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorKind::NonpositiveResistance: return "NonpositiveResistance";
        case ErrorKind::DuplicateLine: return "DuplicateLine";
        case ErrorKind::NoConverter: return "NoConverter";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NoRealRoot: return "NoRealRoot";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::TopologyMismatch: return "TopologyMismatch";
        case ErrorKind::InputOnLoadBus: return "InputOnLoadBus";
        case ErrorKind::InfeasibleBudget: return "InfeasibleBudget";
        case ErrorKind::EmptySearchSpace: return "EmptySearchSpace";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::SchemaError: return "SchemaError";
    }
    return "Unknown";
}

}  // namespace powertalk
