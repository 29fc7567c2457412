#pragma once

// =============================================================================
// Linearized power-talk channel.
//
// Around an operating point the bus-voltage deviations respond linearly to
// reference-voltage deviations,
//   dv = H dx,   H = (Psi_k + K^-1 (Y + Y_cr))^-1 Y,
// where Psi_k is the line Laplacian with its diagonal divided by kappa.
// Supplied-power deviations follow dp = Phi dx.
// =============================================================================

#include "powertalk/grid.hpp"
#include "powertalk/steady_state.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace powertalk {

struct ChannelModel {
    Eigen::MatrixXd H;      // N x N, V/V; columns of load-only buses are zero
    Eigen::MatrixXd Phi;    // N x N, W/V; rows of load-only buses are zero
    Eigen::VectorXd kappa;  // per bus
    SteadyState operating_point;
    DroopState droop;
};

/// Builds H, Phi and K at a solved operating point. Throws SingularSystem if
/// the system matrix cannot be factored.
ChannelModel linearize(const ValidatedGrid& grid, const DroopState& droop, const SteadyState& state);

/// phi_nm = h_nm (x_n - 2 v_n)/r_n, plus v_n/r_n on the diagonal.
Eigen::MatrixXd power_coefficients(const ValidatedGrid& grid, const ChannelModel& model);

struct SingleBusChannel {
    std::vector<double> h;  // per unit
    double kappa = 1.0;
    double r_bus = 0.0;     // Ω
};

/// Units sharing one bus with negligible line resistance: h_m = kappa r_bus / r_m.
/// Uses each unit's nominal droop parameters. Throws NoRealRoot when the bus
/// quadratic has no real root.
SingleBusChannel single_bus_channel(const std::vector<VscSpec>& units, const LoadSpec& load);

struct ChannelOutputs {
    Eigen::VectorXd dv;        // H dx
    Eigen::VectorXd dv_noisy;  // dv + N(0, sigma_z^2) per bus
};

/// Noise-free and observed outputs for a per-bus input vector. Throws
/// InputOnLoadBus when dx is nonzero on a bus without a converter.
ChannelOutputs predict_outputs(const ChannelModel& model, const Eigen::VectorXd& dx, double sigma_z, std::uint64_t rng_seed);

}  // namespace powertalk
