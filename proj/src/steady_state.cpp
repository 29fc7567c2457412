#include "powertalk/steady_state.hpp"

#include "powertalk/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace powertalk {

namespace {

using Eigen::Index;

struct BusTerms {
    double inv_r_bus;  // 1/r_bus
    double drive;      // b_n
    double d_cp;
};

BusTerms bus_terms(const ValidatedGrid& grid, const DroopState& droop, std::size_t n, const Eigen::VectorXd& v) {
    const LoadSpec& load = grid.load(n);
    double g_sum = grid.load_conductance(n);
    double drive = -load.i_cc;
    for (const Neighbor& nb : grid.neighbors(n)) {
        g_sum += nb.conductance;
        drive += nb.conductance * v[static_cast<Index>(nb.bus)];
    }
    if (auto k = grid.vsc_index(n)) {
        const double r = droop.r[static_cast<Index>(*k)];
        g_sum += 1.0 / r;
        drive += droop.x[static_cast<Index>(*k)] / r;
    }
    return {g_sum, drive, load.d_cp};
}

// Positive root of v^2/r_bus - b v + d = 0.
double positive_root(const BusTerms& t, std::size_t n) {
    const double disc = t.drive * t.drive - 4.0 * t.d_cp * t.inv_r_bus;
    if (disc < 0.0 || t.drive <= 0.0) {
        throw Error(ErrorKind::NoRealRoot, "bus " + std::to_string(n) + " has no positive voltage solution");
    }
    return (t.drive + std::sqrt(disc)) / (2.0 * t.inv_r_bus);
}

Eigen::VectorXd initial_voltages(const ValidatedGrid& grid, const DroopState& droop) {
    const std::size_t n_bus = grid.bus_count();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Index>(n_bus));
    const double mean_x = droop.x.mean();
    for (std::size_t n = 0; n < n_bus; ++n) {
        if (auto k = grid.vsc_index(n)) v[static_cast<Index>(n)] = droop.x[static_cast<Index>(*k)];
    }
    for (std::size_t n = 0; n < n_bus; ++n) {
        if (grid.has_vsc(n)) continue;
        double sum = 0.0;
        int count = 0;
        for (const Neighbor& nb : grid.neighbors(n)) {
            if (auto k = grid.vsc_index(nb.bus)) {
                sum += droop.x[static_cast<Index>(*k)];
                ++count;
            }
        }
        v[static_cast<Index>(n)] = count > 0 ? sum / count : mean_x;
    }
    return v;
}

void solve_gauss_seidel(const ValidatedGrid& grid, const DroopState& droop, const SolverOptions& options,
                        Eigen::VectorXd& v, int& iterations) {
    const std::size_t n_bus = grid.bus_count();
    for (iterations = 1; iterations <= options.max_iter; ++iterations) {
        for (std::size_t n = 0; n < n_bus; ++n) {
            const double root = positive_root(bus_terms(grid, droop, n, v), n);
            double& vn = v[static_cast<Index>(n)];
            vn += options.damping * (root - vn);
        }
        if (current_balance_residual(grid, droop, v) <= options.tol) return;
    }
    throw Error(ErrorKind::NonConvergence,
                "Gauss-Seidel did not reach " + std::to_string(options.tol) + " A in " + std::to_string(options.max_iter) + " sweeps");
}

void solve_newton(const ValidatedGrid& grid, const DroopState& droop, const SolverOptions& options, Eigen::VectorXd& v,
                  int& iterations) {
    const NetworkMatrices net = network_matrices(grid, droop);
    const auto n_bus = static_cast<Index>(grid.bus_count());
    Eigen::VectorXd x_bus = Eigen::VectorXd::Zero(n_bus);
    Eigen::VectorXd i_cc(n_bus), d_cp(n_bus);
    for (Index n = 0; n < n_bus; ++n) {
        const auto bus = static_cast<std::size_t>(n);
        if (auto k = grid.vsc_index(bus)) x_bus[n] = droop.x[static_cast<Index>(*k)];
        i_cc[n] = grid.load(bus).i_cc;
        d_cp[n] = grid.load(bus).d_cp;
    }
    const Eigen::MatrixXd base = net.psi + Eigen::MatrixXd((net.y + net.y_cr).asDiagonal());

    for (iterations = 1; iterations <= options.max_iter; ++iterations) {
        // Injected current minus absorbed current, per bus.
        const Eigen::VectorXd f = net.y.cwiseProduct(x_bus) - base * v - i_cc - d_cp.cwiseQuotient(v);
        if (f.cwiseAbs().maxCoeff() <= options.tol) {
            --iterations;
            return;
        }
        Eigen::MatrixXd jac = base;
        jac.diagonal() -= d_cp.cwiseQuotient(v.cwiseAbs2());
        Eigen::VectorXd step = jac.partialPivLu().solve(f);
        // Keep the iterate on the positive branch.
        double scale = 1.0;
        while (((v + scale * step).array() <= 0.0).any() && scale > 1e-12) scale *= 0.5;
        if (!std::isfinite(step.norm()) || scale <= 1e-12) {
            throw Error(ErrorKind::NoRealRoot, "Newton iteration left the positive-voltage region");
        }
        v += scale * step;
        // Residual floor: the update no longer changes v beyond rounding.
        if (scale == 1.0 && step.cwiseAbs().maxCoeff() <= 8.0 * std::numeric_limits<double>::epsilon() * v.cwiseAbs().maxCoeff()) {
            return;
        }
    }
    throw Error(ErrorKind::NonConvergence, "Newton did not converge in " + std::to_string(options.max_iter) + " iterations");
}

}  // namespace

double current_balance_residual(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v) {
    double worst = 0.0;
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        const double vn = v[static_cast<Index>(n)];
        const LoadSpec& load = grid.load(n);
        double f = -(vn * grid.load_conductance(n) + load.i_cc + load.d_cp / vn);
        for (const Neighbor& nb : grid.neighbors(n)) f -= (vn - v[static_cast<Index>(nb.bus)]) * nb.conductance;
        if (auto k = grid.vsc_index(n)) {
            f += (droop.x[static_cast<Index>(*k)] - vn) / droop.r[static_cast<Index>(*k)];
        }
        worst = std::max(worst, std::abs(f));
    }
    return worst;
}

VscOutputs vsc_outputs(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v) {
    const auto k_count = static_cast<Index>(grid.vsc_count());
    VscOutputs out{Eigen::VectorXd(k_count), Eigen::VectorXd(k_count)};
    for (Index k = 0; k < k_count; ++k) {
        const double vn = v[static_cast<Index>(grid.vsc_buses()[static_cast<std::size_t>(k)])];
        out.i[k] = (droop.x[k] - vn) / droop.r[k];
        out.p[k] = vn * out.i[k];
    }
    return out;
}

Eigen::VectorXd kappa_factors(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& v) {
    const std::size_t n_bus = grid.bus_count();
    Eigen::VectorXd kappa = Eigen::VectorXd::Ones(static_cast<Index>(n_bus));
    for (std::size_t n = 0; n < n_bus; ++n) {
        const BusTerms t = bus_terms(grid, droop, n, v);
        if (t.d_cp == 0.0) continue;
        const double disc = t.drive * t.drive - 4.0 * t.d_cp * t.inv_r_bus;
        if (disc <= 0.0 || t.drive <= 0.0) {
            throw Error(ErrorKind::NoRealRoot, "bus " + std::to_string(n) + " is outside the viable region");
        }
        kappa[static_cast<Index>(n)] = 0.5 * (1.0 + t.drive / std::sqrt(disc));
    }
    return kappa;
}

std::vector<ViabilityViolation> check_viability(const ValidatedGrid& grid, const DroopState& droop,
                                                const Eigen::VectorXd& v_neighbors) {
    check_droop(grid, droop);
    std::vector<ViabilityViolation> violations;
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        const BusTerms t = bus_terms(grid, droop, n, v_neighbors);
        const double bound = std::sqrt(4.0 * t.d_cp * t.inv_r_bus);
        // A zero drive with no constant-power load only admits v = 0.
        if (t.drive < bound || (t.drive <= 0.0 && t.d_cp == 0.0)) violations.push_back({n, t.drive, bound});
    }
    return violations;
}

SteadyState solve_steady_state(const ValidatedGrid& grid, const DroopState& droop, const SolverOptions& options) {
    check_droop(grid, droop);
    if (!(options.tol > 0.0) || options.max_iter < 1 || !(options.damping > 0.0 && options.damping <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "solver options out of range");
    }
    SteadyState state;
    state.v = initial_voltages(grid, droop);
    if (options.method == SolverMethod::GaussSeidel) {
        solve_gauss_seidel(grid, droop, options, state.v, state.iterations);
    } else {
        solve_newton(grid, droop, options, state.v, state.iterations);
    }
    state.residual = current_balance_residual(grid, droop, state.v);
    VscOutputs out = vsc_outputs(grid, droop, state.v);
    state.i = std::move(out.i);
    state.p = std::move(out.p);
    state.kappa = kappa_factors(grid, droop, state.v);
    state.r_bus = network_matrices(grid, droop).r_bus;
    return state;
}

Eigen::VectorXd two_source_closed_form(const ValidatedGrid& grid, const DroopState& droop) {
    check_droop(grid, droop);
    if (grid.bus_count() != 3 || grid.vsc_count() != 2 || grid.spec().lines.size() != 2) {
        throw Error(ErrorKind::TopologyMismatch, "closed form needs two converter buses and one load bus");
    }
    std::size_t load_bus = 0;
    while (grid.has_vsc(load_bus)) ++load_bus;

    double drive = -grid.load(load_bus).i_cc;
    double g_sum = grid.load_conductance(load_bus);
    struct Source {
        std::size_t bus;
        double x, r, r_line;
    };
    Source src[2];
    for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t bus = grid.vsc_buses()[k];
        const auto r_line = grid.line_resistance(bus, load_bus);
        if (!r_line || !grid.load(bus).empty()) {
            throw Error(ErrorKind::TopologyMismatch, "converter bus " + std::to_string(bus) +
                                                         " must carry no load and connect directly to the load bus");
        }
        src[k] = {bus, droop.x[static_cast<Index>(k)], droop.r[static_cast<Index>(k)], *r_line};
        drive += src[k].x / (src[k].r + src[k].r_line);
        g_sum += 1.0 / (src[k].r + src[k].r_line);
    }

    const double d_cp = grid.load(load_bus).d_cp;
    const double disc = drive * drive - 4.0 * d_cp * g_sum;
    if (disc < 0.0 || drive <= 0.0) throw Error(ErrorKind::NoRealRoot, "load bus has no positive voltage solution");

    Eigen::VectorXd v(3);
    const double v_load = (drive + std::sqrt(disc)) / (2.0 * g_sum);
    v[static_cast<Index>(load_bus)] = v_load;
    for (const Source& s : src) {
        const double r_bus = 1.0 / (1.0 / s.r + 1.0 / s.r_line);
        v[static_cast<Index>(s.bus)] = r_bus * (s.x / s.r + v_load / s.r_line);
    }
    return v;
}

}  // namespace powertalk
