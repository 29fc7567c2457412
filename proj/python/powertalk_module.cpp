// Python bindings for the main operations. Bus arguments accept an index or a
// bus id from the grid document.

#include "powertalk/budget.hpp"
#include "powertalk/channel.hpp"
#include "powertalk/comsim.hpp"
#include "powertalk/config.hpp"
#include "powertalk/error.hpp"
#include "powertalk/optimizer.hpp"
#include "powertalk/steady_state.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <variant>

namespace py = pybind11;
using namespace powertalk;

namespace {

using BusRef = std::variant<std::size_t, std::string>;

BusId resolve(const ValidatedGrid& grid, const BusRef& ref) {
    if (const auto* index = std::get_if<std::size_t>(&ref)) {
        if (*index >= grid.bus_count()) throw Error(ErrorKind::InvalidArgument, "bus index out of range");
        return BusId{*index};
    }
    const std::string& name = std::get<std::string>(ref);
    if (auto id = grid.find(name)) return *id;
    throw Error(ErrorKind::InvalidArgument, "unknown bus '" + name + "'");
}

DroopState droop_or_nominal(const ValidatedGrid& grid, const std::optional<DroopState>& droop) {
    return droop ? *droop : nominal_droop(grid);
}

DroopState with_resistances(const ValidatedGrid& grid, const Eigen::VectorXd& r) {
    DroopState d = nominal_droop(grid);
    if (r.size() != d.r.size()) throw Error(ErrorKind::InvalidArgument, "one resistance per converter is required");
    d.r = r;
    return d;
}

Eigen::VectorXd budgets(const ValidatedGrid& grid, const std::optional<Eigen::VectorXd>& pi) {
    return pi ? *pi : nameplate_budgets(grid);
}

SolverMethod method_from(const std::string& name) {
    if (name == "gauss_seidel") return SolverMethod::GaussSeidel;
    if (name == "newton") return SolverMethod::Newton;
    throw Error(ErrorKind::InvalidArgument, "method must be 'gauss_seidel' or 'newton'");
}

}  // namespace

PYBIND11_MODULE(_powertalk, m) {
    m.doc() = "Power-talk channel modelling and SNR optimization for droop-controlled DC microgrids";

    static py::exception<Error> error_type(m, "PowertalkError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            // The message starts with the error kind, e.g. "NoRealRoot: ...".
            PyErr_SetString(error_type.ptr(), e.what());
        }
    });

    py::class_<ValidatedGrid>(m, "Grid")
        .def_static("from_file", [](const std::string& path) { return validate_grid(load_config(path).grid); }, py::arg("path"))
        .def_static("from_json", [](const std::string& text) { return validate_grid(parse_config(text).grid); }, py::arg("text"))
        .def_property_readonly("bus_count", &ValidatedGrid::bus_count)
        .def_property_readonly("vsc_buses", &ValidatedGrid::vsc_buses)
        .def_property_readonly("bus_names", [](const ValidatedGrid& g) {
            std::vector<std::string> names;
            for (const BusSpec& b : g.spec().buses) names.push_back(b.name);
            return names;
        })
        .def("nominal_droop", &nominal_droop)
        .def("budgets", &nameplate_budgets)
        .def("to_json", [](const ValidatedGrid& g) { return serialize_config(GridDocument{g.spec(), {}}); });

    py::class_<DroopState>(m, "DroopState")
        .def(py::init<>())
        .def(py::init([](Eigen::VectorXd x, Eigen::VectorXd r) { return DroopState{std::move(x), std::move(r)}; }), py::arg("x"), py::arg("r"))
        .def_readwrite("x", &DroopState::x)
        .def_readwrite("r", &DroopState::r);

    py::class_<SteadyState>(m, "SteadyState")
        .def_readonly("v", &SteadyState::v)
        .def_readonly("i", &SteadyState::i)
        .def_readonly("p", &SteadyState::p)
        .def_readonly("kappa", &SteadyState::kappa)
        .def_readonly("r_bus", &SteadyState::r_bus)
        .def_readonly("residual", &SteadyState::residual)
        .def_readonly("iterations", &SteadyState::iterations);

    py::class_<ChannelModel>(m, "ChannelModel")
        .def_readonly("H", &ChannelModel::H)
        .def_readonly("Phi", &ChannelModel::Phi)
        .def_readonly("kappa", &ChannelModel::kappa)
        .def_readonly("operating_point", &ChannelModel::operating_point);

    py::class_<BudgetAllocation>(m, "BudgetAllocation")
        .def_readonly("dp_vr", &BudgetAllocation::dp_vr)
        .def_readonly("s", &BudgetAllocation::s)
        .def_readonly("feasible", &BudgetAllocation::feasible)
        .def_readonly("slack", &BudgetAllocation::slack);

    py::class_<OptimizationResult>(m, "OptimizationResult")
        .def_readonly("r_star", &OptimizationResult::r_star)
        .def_readonly("snr", &OptimizationResult::snr)
        .def_readonly("capacity", &OptimizationResult::capacity)
        .def_readonly("g_values", &OptimizationResult::g_values)
        .def_readonly("grid_step", &OptimizationResult::grid_step)
        .def_readonly("evaluations", &OptimizationResult::evaluations)
        .def_readonly("snr_nominal", &OptimizationResult::snr_nominal);

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("pi", &SweepRow::pi)
        .def_readonly("capacity_nominal", &SweepRow::capacity_nominal)
        .def_readonly("capacity_opt", &SweepRow::capacity_opt)
        .def_readonly("r_tx_star", &SweepRow::r_tx_star)
        .def_readonly("r_rx_star", &SweepRow::r_rx_star)
        .def_readonly("snr_nominal", &SweepRow::snr_nominal)
        .def_readonly("snr_opt", &SweepRow::snr_opt);

    py::class_<SimReport>(m, "SimReport")
        .def_readonly("ber", &SimReport::ber)
        .def_readonly("ber_ci95", &SimReport::ber_ci95)
        .def_readonly("snr_empirical", &SimReport::snr_empirical)
        .def_readonly("p_dev_mean_sq", &SimReport::p_dev_mean_sq)
        .def_readonly("slots_run", &SimReport::slots_run)
        .def_readonly("bit_errors", &SimReport::bit_errors)
        .def_readonly("budget_exceeded", &SimReport::budget_exceeded);

    m.def("droop_with", &with_resistances, py::arg("grid"), py::arg("r"),
          "Nominal droop state with the given virtual resistances (one per converter).");

    m.def(
        "solve_steady_state",
        [](const ValidatedGrid& grid, std::optional<DroopState> droop, const std::string& method, double tol) {
            SolverOptions opts;
            opts.method = method_from(method);
            opts.tol = tol;
            py::gil_scoped_release release;
            return solve_steady_state(grid, droop_or_nominal(grid, droop), opts);
        },
        py::arg("grid"), py::arg("droop") = py::none(), py::arg("method") = "gauss_seidel", py::arg("tol") = 1e-10);

    m.def(
        "linearize",
        [](const ValidatedGrid& grid, std::optional<DroopState> droop) {
            const DroopState d = droop_or_nominal(grid, droop);
            return linearize(grid, d, solve_steady_state(grid, d));
        },
        py::arg("grid"), py::arg("droop") = py::none());

    m.def(
        "allocate_input_variance",
        [](const ValidatedGrid& grid, const BusRef& tx, std::optional<DroopState> droop, std::optional<Eigen::VectorXd> pi) {
            const DroopState d = droop_or_nominal(grid, droop);
            const SteadyState nominal = solve_steady_state(grid, nominal_droop(grid));
            const SteadyState state = solve_steady_state(grid, d);
            const ChannelModel model = linearize(grid, d, state);
            return allocate_input_variance(grid, model.Phi, budgets(grid, pi), vr_power_investment(grid, nominal, state),
                                           {resolve(grid, tx)});
        },
        py::arg("grid"), py::arg("tx"), py::arg("droop") = py::none(), py::arg("pi") = py::none());

    m.def(
        "one_way_snr",
        [](const ValidatedGrid& grid, const BusRef& tx, const BusRef& rx, std::optional<DroopState> droop,
           std::optional<Eigen::VectorXd> pi, double sigma_z) {
            return one_way_snr(grid, droop_or_nominal(grid, droop), nominal_droop(grid), budgets(grid, pi), sigma_z,
                               resolve(grid, tx), resolve(grid, rx))
                .snr;
        },
        py::arg("grid"), py::arg("tx"), py::arg("rx"), py::arg("droop") = py::none(), py::arg("pi") = py::none(),
        py::arg("sigma_z") = 0.01);

    m.def(
        "maximize_snr",
        [](const ValidatedGrid& grid, const BusRef& tx, const BusRef& rx, std::optional<Eigen::VectorXd> pi, double sigma_z,
           double step, std::optional<double> r_max_tx, std::optional<double> r_max_rx, bool refine, unsigned threads) {
            GridSearchOptions opts;
            opts.step = step;
            opts.r_max_tx = r_max_tx;
            opts.r_max_rx = r_max_rx;
            opts.refine = refine;
            opts.threads = threads;
            const BusId t = resolve(grid, tx), r = resolve(grid, rx);
            const Eigen::VectorXd b = budgets(grid, pi);
            py::gil_scoped_release release;
            return maximize_snr_grid(grid, nominal_droop(grid), b, sigma_z, t, r, opts);
        },
        py::arg("grid"), py::arg("tx"), py::arg("rx"), py::arg("pi") = py::none(), py::arg("sigma_z") = 0.01,
        py::arg("step") = 0.005, py::arg("r_max_tx") = py::none(), py::arg("r_max_rx") = py::none(), py::arg("refine") = false,
        py::arg("threads") = 0);

    m.def(
        "capacity_sweep",
        [](const ValidatedGrid& grid, const BusRef& tx, const BusRef& rx, const std::vector<double>& pi_range, double sigma_z,
           double step, std::optional<double> r_max_tx, std::optional<double> r_max_rx, unsigned threads) {
            GridSearchOptions opts;
            opts.step = step;
            opts.r_max_tx = r_max_tx;
            opts.r_max_rx = r_max_rx;
            opts.threads = threads;
            const BusId t = resolve(grid, tx), r = resolve(grid, rx);
            py::gil_scoped_release release;
            return capacity_sweep(grid, nominal_droop(grid), pi_range, sigma_z, t, r, opts);
        },
        py::arg("grid"), py::arg("tx"), py::arg("rx"), py::arg("pi_range"), py::arg("sigma_z") = 0.01, py::arg("step") = 0.005,
        py::arg("r_max_tx") = py::none(), py::arg("r_max_rx") = py::none(), py::arg("threads") = 0);

    m.def(
        "simulate",
        [](const ValidatedGrid& grid, const BusRef& tx, const BusRef& rx, double amplitude, std::uint64_t slots, double sigma_z,
           const std::string& mode, std::uint64_t seed, std::optional<DroopState> droop, unsigned threads) {
            const DroopState d = droop_or_nominal(grid, droop);
            SimConfig cfg;
            cfg.tx = resolve(grid, tx);
            cfg.rx = resolve(grid, rx);
            cfg.amplitude = amplitude;
            cfg.slots = slots;
            cfg.sigma_z = sigma_z;
            cfg.rng_seed = seed;
            cfg.threads = threads;
            if (mode == "nonlinear") cfg.mode = ChannelMode::Nonlinear;
            else if (mode == "linearized") cfg.mode = ChannelMode::Linearized;
            else throw Error(ErrorKind::InvalidArgument, "mode must be 'nonlinear' or 'linearized'");
            py::gil_scoped_release release;
            const ChannelModel model = linearize(grid, d, solve_steady_state(grid, d));
            return run_transmission(grid, d, model, cfg);
        },
        py::arg("grid"), py::arg("tx"), py::arg("rx"), py::arg("amplitude"), py::arg("slots") = 100000, py::arg("sigma_z") = 0.01,
        py::arg("mode") = "nonlinear", py::arg("seed") = 1, py::arg("droop") = py::none(), py::arg("threads") = 1);

    m.def("capacity", &capacity, py::arg("snr"), "Bits per slot, log2(1 + snr) / 2.");
    m.def("q_function", &q_function, py::arg("x"));
}
