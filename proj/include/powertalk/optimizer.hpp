#pragma once

// =============================================================================
// One-way SNR maximization over virtual resistances.
//
// For a link tx -> rx the received SNR is min_n g_n / sigma_z^2 with
//   g_n = h_{rx,tx}^2 / phi_{n,tx}^2 * (pi_n^2 - dp_vr_n^2)
// over every converter row n. Moving r_tx and r_rx reshapes the channel gain
// and the power coefficients but spends budget through dp_vr.
// =============================================================================

#include "powertalk/channel.hpp"
#include "powertalk/grid.hpp"
#include "powertalk/steady_state.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace powertalk {

/// Budget-independent quantities of a link at one droop configuration.
struct LinkTerms {
    double h = 0.0;         // h_{rx,tx}
    Eigen::VectorXd phi;    // phi_{n,tx} per converter row
    Eigen::VectorXd dp_vr;  // per converter, W
};

struct SnrEvaluation {
    double snr = 0.0;
    Eigen::VectorXd g;      // per converter row; +inf where phi_{n,tx} = 0
    bool in_domain = true;  // pi_n^2 >= dp_vr_n^2 for every converter
    LinkTerms terms;
};

LinkTerms link_terms(const ValidatedGrid& grid, const DroopState& droop, const SteadyState& nominal_state, BusId tx, BusId rx,
                     const SolverOptions& options = {});

/// g values and SNR for a budget vector (per converter, W). SNR is clamped to 0
/// outside the feasible domain.
SnrEvaluation evaluate_snr(const LinkTerms& terms, const Eigen::VectorXd& pi, double sigma_z);

SnrEvaluation one_way_snr(const ValidatedGrid& grid, const DroopState& droop, const DroopState& nominal, const Eigen::VectorXd& pi,
                          double sigma_z, BusId tx, BusId rx, const SolverOptions& options = {});

/// C = log2(1 + snr) / 2, bits per slot.
double capacity(double snr);

struct GridSearchOptions {
    double step = 0.005;                       // Ω
    std::optional<double> r_max_tx;            // Ω, overrides nameplate/default
    std::optional<double> r_max_rx;
    bool refine = false;                       // extra pass at step/10 around the incumbent
    unsigned threads = 0;                      // 0 = hardware concurrency
    SolverOptions solver{.method = SolverMethod::Newton};
};

/// Largest r_n in [r_nom, 10 r_nom] that keeps the bus real-root condition with
/// 10% margin at the nominal neighbour voltages.
double default_r_max(const ValidatedGrid& grid, const SteadyState& nominal_state, std::size_t converter);

/// Link terms over the (r_tx, r_rx) search box. Other converters stay nominal.
class SearchSurface {
public:
    SearchSurface(const ValidatedGrid& grid, const DroopState& nominal, BusId tx, BusId rx, const GridSearchOptions& options);

    std::size_t tx_points() const { return r_tx_.size(); }
    std::size_t rx_points() const { return r_rx_.size(); }
    double r_tx(std::size_t i) const { return r_tx_[i]; }
    double r_rx(std::size_t j) const { return r_rx_[j]; }
    double step() const { return step_; }

    /// nullopt where the operating point could not be solved.
    const std::optional<LinkTerms>& at(std::size_t i, std::size_t j) const { return terms_[i * r_rx_.size() + j]; }

    DroopState droop_at(double r_tx, double r_rx) const;
    std::size_t tx_converter() const { return k_tx_; }
    std::size_t rx_converter() const { return k_rx_; }

private:
    DroopState nominal_;
    std::size_t k_tx_ = 0;
    std::size_t k_rx_ = 0;
    double step_ = 0.0;
    std::vector<double> r_tx_;
    std::vector<double> r_rx_;
    std::vector<std::optional<LinkTerms>> terms_;
};

struct OptimizationResult {
    Eigen::VectorXd r_star;     // per converter, Ω
    double snr = 0.0;
    double capacity = 0.0;      // bits/slot
    Eigen::VectorXd g_values;   // per converter row at r_star
    double grid_step = 0.0;     // Ω
    std::size_t evaluations = 0;
    double snr_nominal = 0.0;
    std::size_t tx_index = 0;   // grid position of r_star along the tx axis
    std::size_t rx_index = 0;
};

/// Argmax of the SNR over a precomputed surface. Ties go to the smallest r_tx,
/// then the smallest r_rx.
OptimizationResult best_on_surface(const SearchSurface& surface, const Eigen::VectorXd& pi, double sigma_z);

/// Exhaustive grid search of the SNR over [r_nom, r_max] for r_tx and r_rx.
/// Throws EmptySearchSpace when r_max < r_nom or step <= 0.
OptimizationResult maximize_snr_grid(const ValidatedGrid& grid, const DroopState& nominal, const Eigen::VectorXd& pi,
                                     double sigma_z, BusId tx, BusId rx, const GridSearchOptions& options = {});

struct SweepRow {
    double pi = 0.0;  // W, applied to every converter
    double capacity_nominal = 0.0;
    double capacity_opt = 0.0;
    double r_tx_star = 0.0;
    double r_rx_star = 0.0;
    double snr_nominal = 0.0;
    double snr_opt = 0.0;
};

/// Nominal versus optimized capacity for each budget level (equal budgets).
std::vector<SweepRow> capacity_sweep(const ValidatedGrid& grid, const DroopState& nominal, const std::vector<double>& pi_range,
                                     double sigma_z, BusId tx, BusId rx, const GridSearchOptions& options = {});

struct ConcavityOptions {
    std::uint64_t seed = 1;
    double fd_step = 1e-3;     // Ω
    double rel_tol = 1e-6;     // max eigenvalue <= rel_tol * ||Hessian||_F
    std::optional<double> r_max_tx;
    std::optional<double> r_max_rx;
    SolverOptions solver{.method = SolverMethod::Newton};
};

struct ProbePoint {
    double r_tx = 0.0;
    double r_rx = 0.0;
    Eigen::VectorXd g;              // per converter row
    Eigen::VectorXd max_eigen;      // per converter row
    Eigen::VectorXd hessian_norm;   // per converter row
    bool concave = true;
};

struct ConcavityReport {
    std::vector<ProbePoint> points;
    std::size_t violations = 0;          // (point, row) pairs failing the eigenvalue test
    std::size_t attempts = 0;            // candidate draws, accepted or not
    Eigen::MatrixXd gradient_at_nominal; // rows: converter rows; cols: d/dr_tx, d/dr_rx
    Eigen::VectorXd g_at_nominal;
    bool grows_along_joint_increase = false;  // d g_n/dr_tx + d g_n/dr_rx >= 0 for all n
    bool grows_in_each_coordinate = false;    // every gradient entry >= 0
};

/// Finite-difference Hessians of g at random points whose whole stencil lies
/// inside the feasible domain R = {g_n >= 0 for all n}.
ConcavityReport concavity_probe(const ValidatedGrid& grid, const DroopState& nominal, const Eigen::VectorXd& pi, BusId tx,
                                BusId rx, std::size_t samples, const ConcavityOptions& options = {});

}  // namespace powertalk
