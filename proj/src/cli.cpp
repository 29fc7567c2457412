#include "powertalk/cli.hpp"

#include "powertalk/budget.hpp"
#include "powertalk/channel.hpp"
#include "powertalk/comsim.hpp"
#include "powertalk/config.hpp"
#include "powertalk/error.hpp"
#include "powertalk/log.hpp"
#include "powertalk/optimizer.hpp"
#include "powertalk/steady_state.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace powertalk {

using Eigen::Index;

namespace {

struct Options {
    std::string grid_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    double step = 0.005;
    std::vector<double> pi;
    std::optional<double> sigma_z;
    std::string mode = "nonlinear";
    std::optional<std::uint64_t> slots;
    std::string tx;
    std::string rx;
    std::vector<double> r;
    std::optional<double> amplitude;
    std::string trace_path;
    bool refine = false;
    unsigned threads = 0;
};

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string row;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) row += ',';
        row += c;
        first = false;
    }
    return row + '\n';
}

std::string bus_name(const ValidatedGrid& grid, std::size_t n) {
    const std::string& name = grid.spec().buses[n].name;
    return name.empty() ? std::to_string(n) : name;
}

BusId resolve_bus(const ValidatedGrid& grid, const std::string& name, std::size_t fallback_vsc, const char* role) {
    if (name.empty()) {
        if (grid.vsc_count() <= fallback_vsc) throw Error(ErrorKind::InvalidArgument, std::string("no default ") + role + " converter");
        return BusId{grid.vsc_buses()[fallback_vsc]};
    }
    if (auto id = grid.find(name)) return *id;
    throw Error(ErrorKind::InvalidArgument, std::string("unknown ") + role + " bus '" + name + "'");
}

DroopState droop_from(const ValidatedGrid& grid, const Options& opt) {
    DroopState droop = nominal_droop(grid);
    if (opt.r.empty()) return droop;
    if (opt.r.size() != grid.vsc_count()) throw Error(ErrorKind::InvalidArgument, "--r needs one value per converter");
    for (std::size_t k = 0; k < opt.r.size(); ++k) droop.r[static_cast<Index>(k)] = opt.r[k];
    return droop;
}

Eigen::VectorXd budgets_from(const ValidatedGrid& grid, const Options& opt) {
    if (opt.pi.empty()) return nameplate_budgets(grid);
    if (opt.pi.size() == 1) return Eigen::VectorXd::Constant(static_cast<Index>(grid.vsc_count()), opt.pi.front());
    if (opt.pi.size() != grid.vsc_count()) throw Error(ErrorKind::InvalidArgument, "--pi needs one value or one per converter");
    return Eigen::Map<const Eigen::VectorXd>(opt.pi.data(), static_cast<Index>(opt.pi.size()));
}

ChannelMode mode_from(const std::string& mode) {
    if (mode == "nonlinear") return ChannelMode::Nonlinear;
    if (mode == "linearized") return ChannelMode::Linearized;
    throw Error(ErrorKind::InvalidArgument, "--mode must be nonlinear or linearized");
}

std::string cmd_solve(const ValidatedGrid& grid, const Options& opt) {
    const SteadyState s = solve_steady_state(grid, droop_from(grid, opt));
    std::string table = csv_row({"bus", "v_V", "kappa", "r_bus_ohm", "i_A", "p_W"});
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        const auto i = static_cast<Index>(n);
        std::string current, power;
        if (auto k = grid.vsc_index(n)) {
            current = format_number(s.i[static_cast<Index>(*k)]);
            power = format_number(s.p[static_cast<Index>(*k)]);
        }
        table += csv_row({bus_name(grid, n), format_number(s.v[i]), format_number(s.kappa[i]), format_number(s.r_bus[i]), current, power});
    }
    return table;
}

std::string cmd_channel(const ValidatedGrid& grid, const Options& opt) {
    const DroopState droop = droop_from(grid, opt);
    const ChannelModel model = linearize(grid, droop, solve_steady_state(grid, droop));
    std::string table = csv_row({"quantity", "row", "col", "value"});
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        for (std::size_t m = 0; m < grid.bus_count(); ++m) {
            table += csv_row({"H", bus_name(grid, n), bus_name(grid, m), format_number(model.H(static_cast<Index>(n), static_cast<Index>(m)))});
        }
    }
    for (std::size_t n : grid.vsc_buses()) {
        for (std::size_t m = 0; m < grid.bus_count(); ++m) {
            table += csv_row({"Phi", bus_name(grid, n), bus_name(grid, m), format_number(model.Phi(static_cast<Index>(n), static_cast<Index>(m)))});
        }
    }
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        table += csv_row({"kappa", bus_name(grid, n), bus_name(grid, n), format_number(model.kappa[static_cast<Index>(n)])});
    }
    return table;
}

BudgetAllocation allocation_for(const ValidatedGrid& grid, const DroopState& droop, const Eigen::VectorXd& pi, BusId tx) {
    const DroopState nominal = nominal_droop(grid);
    const SteadyState nominal_state = solve_steady_state(grid, nominal);
    const SteadyState state = solve_steady_state(grid, droop);
    const ChannelModel model = linearize(grid, droop, state);
    const Eigen::VectorXd dp_vr = vr_power_investment(grid, nominal_state, state);
    return allocate_input_variance(grid, model.Phi, pi, dp_vr, {tx});
}

std::string cmd_budget(const ValidatedGrid& grid, const Options& opt) {
    const Eigen::VectorXd pi = budgets_from(grid, opt);
    const BusId tx = resolve_bus(grid, opt.tx, 0, "transmitter");
    const BudgetAllocation alloc = allocation_for(grid, droop_from(grid, opt), pi, tx);
    std::string table = csv_row({"bus", "pi_W", "dp_vr_W", "s_V2", "slack_W2"});
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) {
        const std::size_t n = grid.vsc_buses()[k];
        const auto i = static_cast<Index>(k);
        table += csv_row({bus_name(grid, n), format_number(pi[i]), format_number(alloc.dp_vr[i]),
                          format_number(alloc.s[static_cast<Index>(n)]), format_number(alloc.slack[i])});
    }
    return table;
}

GridSearchOptions search_options(const Options& opt) {
    GridSearchOptions search;
    search.step = opt.step;
    search.refine = opt.refine;
    search.threads = opt.threads;
    return search;
}

std::string cmd_optimize(const ValidatedGrid& grid, const GridDocument& doc, const Options& opt) {
    const BusId tx = resolve_bus(grid, opt.tx, 0, "transmitter");
    const BusId rx = resolve_bus(grid, opt.rx, 1, "receiver");
    const double sigma_z = opt.sigma_z.value_or(doc.sim.sigma_z);
    const OptimizationResult res = maximize_snr_grid(grid, nominal_droop(grid), budgets_from(grid, opt), sigma_z, tx, rx, search_options(opt));
    std::string table = csv_row({"key", "value"});
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) {
        table += csv_row({"r_star_ohm[" + bus_name(grid, grid.vsc_buses()[k]) + "]", format_number(res.r_star[static_cast<Index>(k)])});
    }
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) {
        table += csv_row({"g[" + bus_name(grid, grid.vsc_buses()[k]) + "]", format_number(res.g_values[static_cast<Index>(k)])});
    }
    table += csv_row({"snr", format_number(res.snr)});
    table += csv_row({"capacity_bits", format_number(res.capacity)});
    table += csv_row({"snr_nominal", format_number(res.snr_nominal)});
    table += csv_row({"capacity_nominal_bits", format_number(capacity(res.snr_nominal))});
    table += csv_row({"grid_step_ohm", format_number(res.grid_step)});
    table += csv_row({"evaluations", std::to_string(res.evaluations)});
    return table;
}

std::string cmd_sweep(const ValidatedGrid& grid, const GridDocument& doc, const Options& opt) {
    const BusId tx = resolve_bus(grid, opt.tx, 0, "transmitter");
    const BusId rx = resolve_bus(grid, opt.rx, 1, "receiver");
    std::vector<double> range = opt.pi;
    if (range.empty()) {
        for (int w = 1; w <= 20; ++w) range.push_back(w);
    }
    const auto rows = capacity_sweep(grid, nominal_droop(grid), range, opt.sigma_z.value_or(doc.sim.sigma_z), tx, rx, search_options(opt));
    std::string table = csv_row({"pi_W", "capacity_nominal_bits", "capacity_opt_bits", "r_a_star_ohm", "r_b_star_ohm", "snr_nominal", "snr_opt"});
    for (const SweepRow& r : rows) {
        table += csv_row({format_number(r.pi), format_number(r.capacity_nominal), format_number(r.capacity_opt), format_number(r.r_tx_star),
                          format_number(r.r_rx_star), format_number(r.snr_nominal), format_number(r.snr_opt)});
    }
    return table;
}

std::string cmd_simulate(const ValidatedGrid& grid, const GridDocument& doc, const Options& opt) {
    const DroopState droop = droop_from(grid, opt);
    SimConfig cfg;
    cfg.tx = resolve_bus(grid, opt.tx, 0, "transmitter");
    cfg.rx = resolve_bus(grid, opt.rx, 1, "receiver");
    cfg.sigma_z = opt.sigma_z.value_or(doc.sim.sigma_z);
    cfg.rng_seed = opt.seed.value_or(doc.sim.seed);
    cfg.slots = opt.slots.value_or(doc.sim.slots);
    cfg.mode = mode_from(opt.mode);
    cfg.threads = opt.threads;
    cfg.record_trace = !opt.trace_path.empty();
    const Eigen::VectorXd pi = budgets_from(grid, opt);
    if (opt.amplitude) {
        cfg.amplitude = *opt.amplitude;
    } else {
        cfg.amplitude = std::sqrt(allocation_for(grid, droop, pi, cfg.tx).s[static_cast<Index>(cfg.tx.index)]);
    }
    const ChannelModel model = linearize(grid, droop, solve_steady_state(grid, droop));
    const SimReport rep = run_transmission(grid, droop, model, cfg);

    std::string table = csv_row({"key", "value"});
    table += csv_row({"amplitude_V", format_number(cfg.amplitude)});
    table += csv_row({"slots", std::to_string(rep.slots_run)});
    table += csv_row({"bit_errors", std::to_string(rep.bit_errors)});
    table += csv_row({"ber", format_number(rep.ber)});
    table += csv_row({"ber_ci95", format_number(rep.ber_ci95)});
    table += csv_row({"snr_empirical", format_number(rep.snr_empirical)});
    const double h = model.H(static_cast<Index>(cfg.rx.index), static_cast<Index>(cfg.tx.index));
    table += csv_row({"snr_predicted", format_number(h * h * cfg.amplitude * cfg.amplitude / (cfg.sigma_z * cfg.sigma_z))});
    for (std::size_t k = 0; k < grid.vsc_count(); ++k) {
        const std::string name = bus_name(grid, grid.vsc_buses()[k]);
        table += csv_row({"p_dev_mean_sq_W2[" + name + "]", format_number(rep.p_dev_mean_sq[static_cast<Index>(k)])});
        table += csv_row({"budget_W2[" + name + "]", format_number(pi[static_cast<Index>(k)] * pi[static_cast<Index>(k)])});
    }

    if (cfg.record_trace) {
        std::ofstream trace(opt.trace_path);
        if (!trace) throw Error(ErrorKind::InvalidArgument, "cannot write " + opt.trace_path);
        trace << csv_row({"slot", "symbol", "dv_rx_V", "observation_V", "decision"});
        for (const SlotRecord& s : rep.trace) {
            trace << csv_row({std::to_string(s.slot), std::to_string(s.symbol), format_number(s.dv_rx), format_number(s.observation),
                              std::to_string(s.decision)});
        }
    }
    return table;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoRealRoot:
        case ErrorKind::NonConvergence:
        case ErrorKind::SingularSystem:
            return kExitNumeric;
        case ErrorKind::InfeasibleBudget:
            return kExitInfeasible;
        default:
            return kExitConfig;
    }
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    configure_logging_from_env();
    Options opt;
    CLI::App app{"Power talk channel modelling and SNR optimization for droop-controlled DC microgrids", "powertalk"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--grid", opt.grid_path, "Grid description (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out_path, "Write the table to this file instead of stdout");
        sub->add_option("--r", opt.r, "Virtual resistances, one per converter (Ohm)")->delimiter(',');
        sub->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
    };
    auto add_link = [&](CLI::App* sub) {
        sub->add_option("--tx", opt.tx, "Transmitting bus id (default: first converter)");
        sub->add_option("--rx", opt.rx, "Receiving bus id (default: second converter)");
        sub->add_option("--pi", opt.pi, "Power deviation budget(s) in W")->delimiter(',');
        sub->add_option("--sigma-z", opt.sigma_z, "Observation noise standard deviation (V)");
    };

    CLI::App* solve = app.add_subcommand("solve", "Steady-state operating point");
    add_common(solve);
    CLI::App* channel = app.add_subcommand("channel", "Channel matrix H, power coefficients Phi and kappa factors");
    add_common(channel);
    CLI::App* budget = app.add_subcommand("budget", "Input variance allocation for one transmitter");
    add_common(budget);
    add_link(budget);
    CLI::App* optimize = app.add_subcommand("optimize", "Grid search of the one-way SNR over virtual resistances");
    add_common(optimize);
    add_link(optimize);
    optimize->add_option("--step", opt.step, "Grid step (Ohm)");
    optimize->add_flag("--refine", opt.refine, "Extra pass at a tenth of the step around the optimum");
    CLI::App* sweep = app.add_subcommand("sweep", "Capacity before and after optimization versus budget");
    add_common(sweep);
    add_link(sweep);
    sweep->add_option("--step", opt.step, "Grid step (Ohm)");
    CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo transmission");
    add_common(simulate);
    add_link(simulate);
    simulate->add_option("--seed", opt.seed, "RNG seed");
    simulate->add_option("--mode", opt.mode, "nonlinear or linearized")->check(CLI::IsMember({"nonlinear", "linearized"}));
    simulate->add_option("--slots", opt.slots, "Number of slots");
    simulate->add_option("--amplitude", opt.amplitude, "Symbol amplitude in V (default: sqrt of the allocated variance)");
    simulate->add_option("--trace", opt.trace_path, "Per-slot CSV trace");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: UsageError: " << e.what() << "\n" << app.help();
        return kExitConfig;
    }

    try {
        const GridDocument doc = load_config(opt.grid_path);
        const ValidatedGrid grid = validate_grid(doc.grid);
        std::string table;
        if (solve->parsed()) table = cmd_solve(grid, opt);
        else if (channel->parsed()) table = cmd_channel(grid, opt);
        else if (budget->parsed()) table = cmd_budget(grid, opt);
        else if (optimize->parsed()) table = cmd_optimize(grid, doc, opt);
        else if (sweep->parsed()) table = cmd_sweep(grid, doc, opt);
        else table = cmd_simulate(grid, doc, opt);

        if (opt.out_path.empty()) {
            out << table;
        } else {
            std::ofstream file(opt.out_path);
            if (!file) throw Error(ErrorKind::InvalidArgument, "cannot write " + opt.out_path);
            file << table;
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}

}  // namespace powertalk
