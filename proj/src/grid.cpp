#include "powertalk/grid.hpp"

#include "powertalk/error.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <utility>

namespace powertalk {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }
bool nonnegative_finite(double v) { return std::isfinite(v) && v >= 0.0; }

void check_bus(const BusSpec& bus, std::size_t n) {
    const std::string where = "bus " + std::to_string(n) + (bus.name.empty() ? "" : " (" + bus.name + ")");
    if (bus.load.r_cr && !positive_finite(*bus.load.r_cr)) {
        throw Error(ErrorKind::NonpositiveResistance, where + ": load resistance must be positive");
    }
    if (!nonnegative_finite(bus.load.i_cc) || !nonnegative_finite(bus.load.d_cp)) {
        throw Error(ErrorKind::InvalidArgument, where + ": constant-current and constant-power loads must be finite and non-negative");
    }
    if (!bus.vsc) return;
    const VscSpec& vsc = *bus.vsc;
    if (!positive_finite(vsc.r_nom)) {
        throw Error(ErrorKind::NonpositiveResistance, where + ": nominal virtual resistance must be positive");
    }
    if (!positive_finite(vsc.x_nom)) {
        throw Error(ErrorKind::InvalidArgument, where + ": nominal reference voltage must be positive");
    }
    if (vsc.r_max && !(std::isfinite(*vsc.r_max) && *vsc.r_max >= vsc.r_nom)) {
        throw Error(ErrorKind::InvalidArgument, where + ": r_max must be finite and >= r_nom");
    }
    if (!nonnegative_finite(vsc.pi_budget)) {
        throw Error(ErrorKind::InvalidArgument, where + ": power deviation budget must be finite and non-negative");
    }
}

}  // namespace

std::optional<std::size_t> ValidatedGrid::vsc_index(std::size_t bus) const {
    if (bus >= vsc_slot_.size() || vsc_slot_[bus] < 0) return std::nullopt;
    return static_cast<std::size_t>(vsc_slot_[bus]);
}

std::optional<double> ValidatedGrid::line_resistance(std::size_t a, std::size_t b) const {
    for (const Neighbor& nb : adjacency_.at(a)) {
        if (nb.bus == b) return 1.0 / nb.conductance;
    }
    return std::nullopt;
}

double ValidatedGrid::load_conductance(std::size_t bus) const {
    const auto& r_cr = spec_.buses[bus].load.r_cr;
    return r_cr ? 1.0 / *r_cr : 0.0;
}

std::optional<BusId> ValidatedGrid::find(const std::string& name) const {
    for (std::size_t n = 0; n < spec_.buses.size(); ++n) {
        if (spec_.buses[n].name == name) return BusId{n};
    }
    return std::nullopt;
}

ValidatedGrid validate_grid(GridSpec spec) {
    const std::size_t n_bus = spec.buses.size();
    if (n_bus == 0) throw Error(ErrorKind::NoConverter, "grid has no buses");

    for (std::size_t n = 0; n < n_bus; ++n) check_bus(spec.buses[n], n);

    std::vector<std::vector<Neighbor>> adjacency(n_bus);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const LineSpec& line : spec.lines) {
        const std::size_t a = line.a.index;
        const std::size_t b = line.b.index;
        if (a >= n_bus || b >= n_bus || a == b) {
            throw Error(ErrorKind::InvalidArgument,
                        "line " + std::to_string(a) + "-" + std::to_string(b) + " has invalid endpoints");
        }
        if (!positive_finite(line.r_line)) {
            throw Error(ErrorKind::NonpositiveResistance,
                        "line " + std::to_string(a) + "-" + std::to_string(b) + " resistance must be positive");
        }
        if (!seen.emplace(std::min(a, b), std::max(a, b)).second) {
            throw Error(ErrorKind::DuplicateLine, "more than one line between buses " + std::to_string(a) + " and " +
                                                      std::to_string(b));
        }
        adjacency[a].push_back({b, 1.0 / line.r_line});
        adjacency[b].push_back({a, 1.0 / line.r_line});
    }

    // Connectivity by depth-first search from bus 0.
    std::vector<bool> reached(n_bus, false);
    std::vector<std::size_t> stack{0};
    reached[0] = true;
    while (!stack.empty()) {
        const std::size_t n = stack.back();
        stack.pop_back();
        for (const Neighbor& nb : adjacency[n]) {
            if (!reached[nb.bus]) {
                reached[nb.bus] = true;
                stack.push_back(nb.bus);
            }
        }
    }
    for (std::size_t n = 0; n < n_bus; ++n) {
        if (!reached[n]) throw Error(ErrorKind::DisconnectedGraph, "bus " + std::to_string(n) + " is not reachable from bus 0");
    }

    ValidatedGrid grid;
    grid.vsc_slot_.assign(n_bus, -1);
    for (std::size_t n = 0; n < n_bus; ++n) {
        if (spec.buses[n].vsc) {
            grid.vsc_slot_[n] = static_cast<std::ptrdiff_t>(grid.vsc_buses_.size());
            grid.vsc_buses_.push_back(n);
        }
    }
    if (grid.vsc_buses_.empty()) throw Error(ErrorKind::NoConverter, "at least one bus must host a converter");

    grid.adjacency_ = std::move(adjacency);
    grid.spec_ = std::move(spec);
    return grid;
}

DroopState nominal_droop(const ValidatedGrid& grid) {
    const std::size_t k_count = grid.vsc_count();
    DroopState droop{Eigen::VectorXd(k_count), Eigen::VectorXd(k_count)};
    for (std::size_t k = 0; k < k_count; ++k) {
        droop.x[k] = grid.vsc(k).x_nom;
        droop.r[k] = grid.vsc(k).r_nom;
    }
    return droop;
}

void check_droop(const ValidatedGrid& grid, const DroopState& droop) {
    const auto k_count = static_cast<Eigen::Index>(grid.vsc_count());
    if (droop.x.size() != k_count || droop.r.size() != k_count) {
        throw Error(ErrorKind::InvalidArgument, "droop state must have one entry per converter");
    }
    for (Eigen::Index k = 0; k < k_count; ++k) {
        if (!positive_finite(droop.r[k])) {
            throw Error(ErrorKind::NonpositiveResistance, "virtual resistance of converter " + std::to_string(k) + " must be positive");
        }
        if (!std::isfinite(droop.x[k])) {
            throw Error(ErrorKind::InvalidArgument, "reference voltage of converter " + std::to_string(k) + " is not finite");
        }
    }
}

NetworkMatrices network_matrices(const ValidatedGrid& grid, const DroopState& droop) {
    check_droop(grid, droop);
    const auto n_bus = static_cast<Eigen::Index>(grid.bus_count());
    NetworkMatrices m{Eigen::MatrixXd::Zero(n_bus, n_bus), Eigen::VectorXd::Zero(n_bus), Eigen::VectorXd::Zero(n_bus),
                      Eigen::VectorXd::Zero(n_bus)};
    for (Eigen::Index n = 0; n < n_bus; ++n) {
        const auto bus = static_cast<std::size_t>(n);
        for (const Neighbor& nb : grid.neighbors(bus)) {
            m.psi(n, n) += nb.conductance;
            m.psi(n, static_cast<Eigen::Index>(nb.bus)) = -nb.conductance;
        }
        if (auto k = grid.vsc_index(bus)) m.y[n] = 1.0 / droop.r[static_cast<Eigen::Index>(*k)];
        m.y_cr[n] = grid.load_conductance(bus);
        m.r_bus[n] = 1.0 / (m.y_cr[n] + m.psi(n, n) + m.y[n]);
    }
    return m;
}

}  // namespace powertalk
