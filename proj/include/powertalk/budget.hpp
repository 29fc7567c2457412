#pragma once

// =============================================================================
// Power-deviation budget bookkeeping.
//
// A converter's total supplied-power deviation splits into a static part caused
// by moving its virtual resistance off nominal, and a signaling part caused by
// reference-voltage inputs. With zero-mean, mutually independent inputs the
// budget rows read
//   sum_m phi_nm^2 E[dx_m^2] <= pi_n^2 - (dp_vr_n)^2.
// =============================================================================

#include "powertalk/grid.hpp"
#include "powertalk/steady_state.hpp"

#include <Eigen/Dense>

#include <vector>

namespace powertalk {

struct BudgetAllocation {
    Eigen::VectorXd dp_vr;  // per converter, W
    Eigen::VectorXd s;      // per bus input variance E[dx^2], V^2; zero for silent buses
    bool feasible = false;
    Eigen::VectorXd slack;  // per converter, W^2
};

/// Static power deviation of each converter when moving from droop_nom to
/// droop_new with unchanged reference voltages.
Eigen::VectorXd vr_power_investment(const ValidatedGrid& grid, const DroopState& droop_nom, const DroopState& droop_new,
                                    const SolverOptions& options = {});

/// Same, reusing an already solved nominal operating point.
Eigen::VectorXd vr_power_investment(const ValidatedGrid& grid, const SteadyState& nominal_state,
                                    const SteadyState& new_state);

enum class AllocationMode {
    EqualVariance,  // largest common variance for all transmitters
    WeightedLp,     // maximize sum_m w_m s_m over the same rows
};

struct AllocationOptions {
    AllocationMode mode = AllocationMode::EqualVariance;
    std::vector<double> weights;  // per transmitter, WeightedLp only; empty means all ones
};

/// Input variances for the given transmitters that satisfy every budget row.
/// A single transmitter gets s_t = min_n (pi_n^2 - dp_n^2) / phi_nt^2.
/// Throws InfeasibleBudget when some pi_n^2 < dp_vr_n^2, InputOnLoadBus when a
/// transmitter hosts no converter.
BudgetAllocation allocate_input_variance(const ValidatedGrid& grid, const Eigen::MatrixXd& phi, const Eigen::VectorXd& pi,
                                         const Eigen::VectorXd& dp_vr, const std::vector<BusId>& transmitters,
                                         const AllocationOptions& options = {});

/// Budget vector built from the converter nameplates.
Eigen::VectorXd nameplate_budgets(const ValidatedGrid& grid);

/// Maximizes c.s subject to A s <= b, s >= 0, with b >= 0. Dense tableau
/// simplex with Bland's rule; returns the optimal s. Rows of A are constraints.
Eigen::VectorXd maximize_linear_program(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace powertalk
