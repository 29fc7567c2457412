#include "powertalk/budget.hpp"

#include "powertalk/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace powertalk {

using Eigen::Index;

Eigen::VectorXd vr_power_investment(const ValidatedGrid& grid, const SteadyState& nominal_state,
                                    const SteadyState& new_state) {
    const auto k_count = static_cast<Index>(grid.vsc_count());
    Eigen::VectorXd dp(k_count);
    for (Index k = 0; k < k_count; ++k) dp[k] = new_state.p[k] - nominal_state.p[k];
    return dp;
}

Eigen::VectorXd vr_power_investment(const ValidatedGrid& grid, const DroopState& droop_nom, const DroopState& droop_new,
                                    const SolverOptions& options) {
    check_droop(grid, droop_nom);
    check_droop(grid, droop_new);
    if (droop_nom.x != droop_new.x) {
        throw Error(ErrorKind::InvalidArgument, "virtual-resistance investment requires identical reference voltages");
    }
    const SteadyState nominal = solve_steady_state(grid, droop_nom, options);
    const SteadyState moved = solve_steady_state(grid, droop_new, options);
    return vr_power_investment(grid, nominal, moved);
}

Eigen::VectorXd nameplate_budgets(const ValidatedGrid& grid) {
    Eigen::VectorXd pi(static_cast<Index>(grid.vsc_count()));
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) pi[static_cast<Index>(k)] = grid.vsc(k).pi_budget;
    return pi;
}

Eigen::VectorXd maximize_linear_program(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const Index rows = a.rows();
    const Index cols = a.cols();
    if (b.size() != rows || c.size() != cols) throw Error(ErrorKind::InvalidArgument, "linear program dimensions disagree");
    if ((b.array() < 0.0).any()) throw Error(ErrorKind::InvalidArgument, "linear program needs b >= 0");

    // Tableau [A I | b] with objective row [-c 0 | 0]; slack basis is feasible.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols + rows + 1);
    t.topLeftCorner(rows, cols) = a;
    t.block(0, cols, rows, rows).setIdentity();
    t.topRightCorner(rows, 1) = b;
    t.bottomLeftCorner(1, cols) = -c.transpose();
    std::vector<Index> basis(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) basis[static_cast<std::size_t>(i)] = cols + i;

    const double eps = 1e-12;
    for (int iter = 0; iter < 10000; ++iter) {
        Index enter = -1;
        for (Index j = 0; j < cols + rows; ++j) {
            if (t(rows, j) < -eps) {
                enter = j;
                break;
            }
        }
        if (enter < 0) break;
        Index leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < rows; ++i) {
            if (t(i, enter) > eps) {
                const double ratio = t(i, cols + rows) / t(i, enter);
                if (ratio < best - eps ||
                    (std::abs(ratio - best) <= eps && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) throw Error(ErrorKind::InvalidArgument, "linear program is unbounded");
        t.row(leave) /= t(leave, enter);
        for (Index i = 0; i <= rows; ++i) {
            if (i != leave) t.row(i) -= t(i, enter) * t.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }

    Eigen::VectorXd s = Eigen::VectorXd::Zero(cols);
    for (Index i = 0; i < rows; ++i) {
        const Index j = basis[static_cast<std::size_t>(i)];
        if (j < cols) s[j] = t(i, cols + rows);
    }
    return s;
}

BudgetAllocation allocate_input_variance(const ValidatedGrid& grid, const Eigen::MatrixXd& phi, const Eigen::VectorXd& pi,
                                         const Eigen::VectorXd& dp_vr, const std::vector<BusId>& transmitters,
                                         const AllocationOptions& options) {
    const auto n_bus = static_cast<Index>(grid.bus_count());
    const auto k_count = static_cast<Index>(grid.vsc_count());
    if (phi.rows() != n_bus || phi.cols() != n_bus || pi.size() != k_count || dp_vr.size() != k_count) {
        throw Error(ErrorKind::InvalidArgument, "budget inputs do not match the grid dimensions");
    }
    if (transmitters.empty()) throw Error(ErrorKind::InvalidArgument, "at least one transmitter is required");
    for (const BusId t : transmitters) {
        if (t.index >= grid.bus_count() || !grid.has_vsc(t.index)) {
            throw Error(ErrorKind::InputOnLoadBus, "transmitter bus " + std::to_string(t.index) + " hosts no converter");
        }
    }

    BudgetAllocation out;
    out.dp_vr = dp_vr;
    out.s = Eigen::VectorXd::Zero(n_bus);

    // Remaining budget per converter row.
    Eigen::VectorXd room(k_count);
    for (Index k = 0; k < k_count; ++k) {
        room[k] = pi[k] * pi[k] - dp_vr[k] * dp_vr[k];
        if (room[k] < 0.0) {
            throw Error(ErrorKind::InfeasibleBudget, "converter " + std::to_string(k) + " has spent more than its budget on virtual-resistance changes");
        }
    }

    // Squared coefficients restricted to converter rows and transmitter columns.
    const auto t_count = static_cast<Index>(transmitters.size());
    Eigen::MatrixXd rows(k_count, t_count);
    for (Index k = 0; k < k_count; ++k) {
        const auto n = static_cast<Index>(grid.vsc_buses()[static_cast<std::size_t>(k)]);
        for (Index j = 0; j < t_count; ++j) {
            const double c = phi(n, static_cast<Index>(transmitters[static_cast<std::size_t>(j)].index));
            rows(k, j) = c * c;
        }
    }

    Eigen::VectorXd s_tx(t_count);
    if (options.mode == AllocationMode::EqualVariance) {
        double s = std::numeric_limits<double>::infinity();
        const Eigen::VectorXd load = rows.rowwise().sum();
        for (Index k = 0; k < k_count; ++k) {
            if (load[k] > 0.0) s = std::min(s, room[k] / load[k]);
        }
        if (!std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "no budget row constrains the transmitters");
        s_tx.setConstant(s);
    } else {
        Eigen::VectorXd w = Eigen::VectorXd::Ones(t_count);
        if (!options.weights.empty()) {
            if (static_cast<Index>(options.weights.size()) != t_count) {
                throw Error(ErrorKind::InvalidArgument, "one weight per transmitter is required");
            }
            for (Index j = 0; j < t_count; ++j) w[j] = options.weights[static_cast<std::size_t>(j)];
        }
        s_tx = maximize_linear_program(rows, room, w);
    }

    for (Index j = 0; j < t_count; ++j) out.s[static_cast<Index>(transmitters[static_cast<std::size_t>(j)].index)] = s_tx[j];
    out.slack = room - rows * s_tx;
    out.feasible = (out.slack.array() >= -1e-9 * (1.0 + room.array())).all();
    return out;
}

}  // namespace powertalk
