#include "powertalk/channel.hpp"

#include "powertalk/error.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace powertalk {

using Eigen::Index;

ChannelModel linearize(const ValidatedGrid& grid, const DroopState& droop, const SteadyState& state) {
    const NetworkMatrices net = network_matrices(grid, droop);
    const auto n_bus = static_cast<Index>(grid.bus_count());
    if (state.v.size() != n_bus) throw Error(ErrorKind::InvalidArgument, "operating point does not match the grid");

    ChannelModel model;
    model.kappa = kappa_factors(grid, droop, state.v);

    Eigen::MatrixXd system = net.psi;
    for (Index n = 0; n < n_bus; ++n) {
        system(n, n) = (net.psi(n, n) + net.y[n] + net.y_cr[n]) / model.kappa[n];
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond > 1e3 * std::numeric_limits<double>::epsilon())) {
        throw Error(ErrorKind::SingularSystem, "linearized system is singular (rcond " + std::to_string(rcond) + ")");
    }
    model.H = lu.solve(Eigen::MatrixXd(net.y.asDiagonal()));
    model.operating_point = state;
    model.droop = droop;
    model.Phi = power_coefficients(grid, model);
    return model;
}

Eigen::MatrixXd power_coefficients(const ValidatedGrid& grid, const ChannelModel& model) {
    const auto n_bus = static_cast<Index>(grid.bus_count());
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_bus, n_bus);
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) {
        const auto n = static_cast<Index>(grid.vsc_buses()[k]);
        const double x = model.droop.x[static_cast<Index>(k)];
        const double r = model.droop.r[static_cast<Index>(k)];
        const double v = model.operating_point.v[n];
        phi.row(n) = model.H.row(n) * ((x - 2.0 * v) / r);
        phi(n, n) += v / r;
    }
    return phi;
}

SingleBusChannel single_bus_channel(const std::vector<VscSpec>& units, const LoadSpec& load) {
    if (units.empty()) throw Error(ErrorKind::InvalidArgument, "single-bus channel needs at least one unit");
    double g_sum = load.r_cr ? 1.0 / *load.r_cr : 0.0;
    double drive = -load.i_cc;
    for (const VscSpec& u : units) {
        if (!(u.r_nom > 0.0)) throw Error(ErrorKind::NonpositiveResistance, "unit virtual resistance must be positive");
        g_sum += 1.0 / u.r_nom;
        drive += u.x_nom / u.r_nom;
    }
    SingleBusChannel out;
    out.r_bus = 1.0 / g_sum;
    const double disc = drive * drive - 4.0 * load.d_cp / out.r_bus;
    if (disc < 0.0 || drive <= 0.0) throw Error(ErrorKind::NoRealRoot, "single-bus quadratic has no positive root");
    out.kappa = load.d_cp == 0.0 ? 1.0 : 0.5 * (1.0 + drive / std::sqrt(disc));
    out.h.reserve(units.size());
    for (const VscSpec& u : units) out.h.push_back(out.kappa * out.r_bus / u.r_nom);
    return out;
}

ChannelOutputs predict_outputs(const ChannelModel& model, const Eigen::VectorXd& dx, double sigma_z, std::uint64_t rng_seed) {
    if (dx.size() != model.H.cols()) throw Error(ErrorKind::InvalidArgument, "input vector length must equal the bus count");
    if (!(sigma_z >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise standard deviation must be non-negative");
    for (Index n = 0; n < dx.size(); ++n) {
        if (dx[n] != 0.0 && model.H.col(n).isZero(0.0)) {
            throw Error(ErrorKind::InputOnLoadBus, "bus " + std::to_string(n) + " hosts no converter and cannot transmit");
        }
    }
    ChannelOutputs out{model.H * dx, {}};
    out.dv_noisy = out.dv;
    if (sigma_z > 0.0) {
        std::mt19937_64 rng(rng_seed);
        std::normal_distribution<double> noise(0.0, sigma_z);
        for (Index n = 0; n < out.dv_noisy.size(); ++n) out.dv_noisy[n] += noise(rng);
    }
    return out;
}

}  // namespace powertalk
