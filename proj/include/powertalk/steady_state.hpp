#pragma once

// =============================================================================
// Steady-state operating point of a droop-controlled DC grid.
//
// Each bus obeys the current balance
//   (x_n - v_n)/r_n = v_n/r_cr + i_cc + d_cp/v_n + sum_m (v_n - v_m)/r_nm
// which, for fixed neighbour voltages, is a quadratic in v_n whose positive
// root is the physical solution.
// =============================================================================

#include "powertalk/grid.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace powertalk {

enum class SolverMethod {
    GaussSeidel,  // damped sweeps of the per-bus positive root
    Newton,       // full-system Newton on the current-balance residual
};

struct SolverOptions {
    double tol = 1e-10;      // A, max current-balance residual
    int max_iter = 10000;
    double damping = 0.7;    // Gauss-Seidel relaxation factor
    SolverMethod method = SolverMethod::GaussSeidel;
};

struct SteadyState {
    Eigen::VectorXd v;      // per bus, V
    Eigen::VectorXd i;      // per converter, A
    Eigen::VectorXd p;      // per converter, W
    Eigen::VectorXd kappa;  // per bus, linearization factor >= 1
    Eigen::VectorXd r_bus;  // per bus, Ω
    double residual = 0.0;  // A
    int iterations = 0;
};

/// Solves the coupled bus equations. Throws NoRealRoot when a bus quadratic
/// has no positive root during the iteration, NonConvergence when max_iter is
/// exhausted.
SteadyState solve_steady_state(const ValidatedGrid& grid, const DroopState& droop, const SolverOptions& options = {});

/// Max over buses of |current-balance residual| at voltages v.
double current_balance_residual(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v);

/// Per-converter output current and power at bus voltages v.
struct VscOutputs {
    Eigen::VectorXd i;  // A
    Eigen::VectorXd p;  // W
};
VscOutputs vsc_outputs(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v);

/// Linearization factor of every bus at voltages v:
///   kappa_n = (1 + b_n / sqrt(b_n^2 - 4 d_n / r_bus_n)) / 2,
///   b_n = x_n/r_n + sum_m v_m/r_nm - i_cc.
/// Exactly 1 on buses without a constant-power load.
Eigen::VectorXd kappa_factors(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v);

struct ViabilityViolation {
    std::size_t bus;
    double drive;  // x_n/r_n + sum_m v_m/r_nm - i_cc, A
    double bound;  // sqrt(4 d_cp / r_bus), A
};

/// Real-root condition of every bus quadratic given neighbour voltages.
/// For a converter bus this is x_n >= r_n (sqrt(4 d/r_bus) - sum_m v_m/r_nm + i_cc);
/// load-only buses drop the reference term. Violations are returned, not thrown.
std::vector<ViabilityViolation> check_viability(const ValidatedGrid& grid, const DroopState& droop,
                                                const Eigen::VectorXd& v_neighbors);

/// Closed-form operating point of the two-source star: converter buses A and B
/// without local load, each tied by one line to a load bus C. Independent of
/// the iterative solvers. Throws TopologyMismatch for any other grid and
/// NoRealRoot when the load-bus quadratic has no real root.
Eigen::VectorXd two_source_closed_form(const ValidatedGrid& grid, const DroopState& droop);

}  // namespace powertalk
