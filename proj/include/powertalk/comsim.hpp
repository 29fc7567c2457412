#pragma once

// =============================================================================
// Slot-based Monte-Carlo simulation of one-way power talk.
//
// Each slot carries one equiprobable antipodal symbol on the transmitter's
// reference voltage. The receiver observes its bus-voltage deviation plus
// Gaussian noise and decides with a sign test on h * observation.
// =============================================================================

#include "powertalk/channel.hpp"
#include "powertalk/grid.hpp"
#include "powertalk/steady_state.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace powertalk {

enum class ChannelMode { Nonlinear, Linearized };

struct SimConfig {
    std::uint64_t slots = 100000;
    double amplitude = 0.0;  // V, symbols are +-amplitude
    double sigma_z = 0.01;   // V
    ChannelMode mode = ChannelMode::Nonlinear;
    std::uint64_t rng_seed = 1;
    BusId tx{0};
    BusId rx{1};
    unsigned threads = 1;    // 0 = hardware concurrency; results do not depend on it
    bool record_trace = false;
    SolverOptions solver;
};

struct SlotRecord {
    std::uint64_t slot = 0;
    int symbol = 0;          // +1 or -1
    double dv_rx = 0.0;      // noise-free output at the receiver, V
    double observation = 0.0;
    int decision = 0;
};

struct SimReport {
    double ber = 0.0;
    double ber_ci95 = 0.0;        // half-width of the normal-approximation interval
    double snr_empirical = 0.0;   // mean^2 / variance of the projected observation
    Eigen::VectorXd p_dev_mean_sq;  // per converter, W^2, against nameplate-droop power
    std::uint64_t slots_run = 0;
    std::uint64_t bit_errors = 0;
    std::vector<bool> budget_exceeded;  // p_dev_mean_sq > 1.05 pi^2 with nameplate budgets
    std::vector<SlotRecord> trace;
};

/// Counter-based generator: the stream of slot k depends only on (seed, k).
class SlotRng {
public:
    using result_type = std::uint64_t;
    SlotRng(std::uint64_t seed, std::uint64_t slot);
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

private:
    std::uint64_t state_;
};

/// Runs cfg.slots transmissions at the droop state described by model.
SimReport run_transmission(const ValidatedGrid& grid, const DroopState& droop, const ChannelModel& model, const SimConfig& cfg);

struct ComplianceRow {
    double empirical = 0.0;  // W^2
    double bound = 0.0;      // pi^2, W^2
    bool pass = false;       // empirical <= (1 + slack) * bound
};

/// Empirical E[(p_n(t) - p_n^nom)^2] per converter against the budgets pi.
std::vector<ComplianceRow> measure_power_compliance(const ValidatedGrid& grid, const DroopState& droop, const SimConfig& cfg,
                                                    const Eigen::VectorXd& pi, double slack = 0.05);

/// Gaussian tail probability Q(x).
double q_function(double x);

}  // namespace powertalk
