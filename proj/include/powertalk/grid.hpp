#pragma once

// =============================================================================
// Grid model: buses, loads, converters and distribution lines of a DC
// microgrid, plus the structural matrices assembled from them.
// =============================================================================

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace powertalk {

/// Dense index of a bus, in [0, N).
struct BusId {
    std::size_t index = 0;

    constexpr BusId() = default;
    constexpr explicit BusId(std::size_t i) : index(i) {}
    auto operator<=>(const BusId&) const = default;
};

/// Local load at a bus: resistive, constant-current and constant-power parts
/// in parallel. An absent resistive part is an open circuit.
struct LoadSpec {
    std::optional<double> r_cr;  // Ω
    double i_cc = 0.0;           // A
    double d_cp = 0.0;           // W

    bool empty() const { return !r_cr && i_cc == 0.0 && d_cp == 0.0; }
};

/// Nameplate of a droop-controlled voltage source converter.
struct VscSpec {
    double x_nom = 0.0;            // V, nominal reference voltage
    double r_nom = 0.0;            // Ω, nominal virtual resistance
    std::optional<double> r_max;   // Ω, upper end of the virtual-resistance range
    double pi_budget = 0.0;        // W, power deviation budget
};

struct BusSpec {
    std::string name;
    LoadSpec load;
    std::optional<VscSpec> vsc;
};

struct LineSpec {
    BusId a;
    BusId b;
    double r_line = 0.0;  // Ω

    /// Distance based line model, r = rho * length.
    static LineSpec from_length(BusId a, BusId b, double rho_ohm_per_km, double length_km) {
        return {a, b, rho_ohm_per_km * length_km};
    }
};

struct GridSpec {
    std::vector<BusSpec> buses;
    std::vector<LineSpec> lines;
};

/// A neighbour of a bus together with the conductance of the connecting line.
struct Neighbor {
    std::size_t bus;
    double conductance;  // S
};

/// Grid whose invariants have been checked. Only obtainable via validate_grid.
class ValidatedGrid {
public:
    const GridSpec& spec() const { return spec_; }
    std::size_t bus_count() const { return spec_.buses.size(); }
    std::size_t vsc_count() const { return vsc_buses_.size(); }

    /// Bus indices hosting a converter, ascending. Position k in this list is
    /// the converter index used by DroopState and per-converter outputs.
    const std::vector<std::size_t>& vsc_buses() const { return vsc_buses_; }

    /// Converter index for a bus, or nullopt for load-only buses.
    std::optional<std::size_t> vsc_index(std::size_t bus) const;
    bool has_vsc(std::size_t bus) const { return vsc_index(bus).has_value(); }

    const VscSpec& vsc(std::size_t k) const { return *spec_.buses[vsc_buses_[k]].vsc; }
    const LoadSpec& load(std::size_t bus) const { return spec_.buses[bus].load; }
    const std::vector<Neighbor>& neighbors(std::size_t bus) const { return adjacency_[bus]; }

    /// Line resistance between two buses; nullopt when not directly connected.
    std::optional<double> line_resistance(std::size_t a, std::size_t b) const;

    /// Conductance of the resistive load part, 0 when absent.
    double load_conductance(std::size_t bus) const;

    /// Looks a bus up by name.
    std::optional<BusId> find(const std::string& name) const;

private:
    friend ValidatedGrid validate_grid(GridSpec spec);

    GridSpec spec_;
    std::vector<std::size_t> vsc_buses_;
    std::vector<std::ptrdiff_t> vsc_slot_;
    std::vector<std::vector<Neighbor>> adjacency_;
};

/// Checks every structural invariant of a grid description.
/// Throws Error with DisconnectedGraph, NonpositiveResistance, DuplicateLine
/// or NoConverter.
ValidatedGrid validate_grid(GridSpec spec);

/// Live droop parameters, one entry per converter in vsc_buses() order.
struct DroopState {
    Eigen::VectorXd x;  // V
    Eigen::VectorXd r;  // Ω
};

/// Droop state at the nameplate values.
DroopState nominal_droop(const ValidatedGrid& grid);

struct NetworkMatrices {
    Eigen::MatrixXd psi;    // line-conductance Laplacian, S
    Eigen::VectorXd y;      // 1/r_n on converter buses, 0 elsewhere
    Eigen::VectorXd y_cr;   // 1/r_cr, 0 when absent
    Eigen::VectorXd r_bus;  // equivalent bus-to-ground resistance, Ω
};

NetworkMatrices network_matrices(const ValidatedGrid& grid, const DroopState& droop);

/// Throws InvalidArgument unless the droop state has one positive finite
/// resistance and one finite reference per converter.
void check_droop(const ValidatedGrid& grid, const DroopState& droop);

}  // namespace powertalk
