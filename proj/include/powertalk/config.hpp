#pragma once

// Grid description documents (JSON):
//
//   {
//     "buses": [ {"id": "A", "load": {"r_cr": 50, "i_cc": 0, "d_cp": 2500},
//                 "vsc": {"x_nom": 400, "r_nom": 0.39, "r_max": 1.5, "pi": 10}} ],
//     "lines": [ {"a": "A", "b": "C", "r": 0.19},
//                {"a": "B", "b": "C", "rho": 0.641, "length_km": 1.0} ],
//     "sim":   {"sigma_z": 0.01, "seed": 1, "slots": 100000}
//   }
//
// "load", every load field, "vsc.r_max", "vsc.pi" and "sim" are optional.

#include "powertalk/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace powertalk {

struct SimDefaults {
    double sigma_z = 0.01;  // V
    std::uint64_t seed = 1;
    std::uint64_t slots = 100000;
};

struct GridDocument {
    GridSpec grid;
    SimDefaults sim;
};

/// Throws Error(ParseError) for malformed JSON (with line and column) and
/// Error(SchemaError) for missing, mistyped or unknown fields.
GridDocument parse_config(std::string_view text);

GridDocument load_config(const std::filesystem::path& path);

/// Canonical JSON for a document; lines are always written with "r".
std::string serialize_config(const GridDocument& doc);

}  // namespace powertalk
