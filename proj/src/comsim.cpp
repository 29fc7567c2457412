#include "powertalk/comsim.hpp"

#include "powertalk/error.hpp"
#include "powertalk/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

namespace powertalk {

using Eigen::Index;

namespace {

constexpr std::uint64_t kChunk = 4096;

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct Outcome {
    Eigen::VectorXd dv;  // noise-free output per bus, V
    Eigen::VectorXd p;   // power per converter, W
};

// Partial sums over one chunk of slots.
struct Tally {
    std::uint64_t errors = 0;
    double proj_sum = 0.0;     // sum of symbol * observation
    double proj_sq_sum = 0.0;  // sum of observation^2
    Eigen::VectorXd dev_sq;
};

}  // namespace

SlotRng::SlotRng(std::uint64_t seed, std::uint64_t slot) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix(s);
    state_ = a ^ (slot * 0xD1B54A32D192ED03ULL);
    splitmix(state_);
}

SlotRng::result_type SlotRng::operator()() { return splitmix(state_); }

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

SimReport run_transmission(const ValidatedGrid& grid, const DroopState& droop, const ChannelModel& model, const SimConfig& cfg) {
    if (cfg.slots < 1) throw Error(ErrorKind::InvalidArgument, "simulation needs at least one slot");
    if (!(cfg.amplitude >= 0.0) || !(cfg.sigma_z >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "amplitude and noise level must be non-negative");
    }
    if (cfg.tx.index >= grid.bus_count() || cfg.rx.index >= grid.bus_count()) {
        throw Error(ErrorKind::InvalidArgument, "transmitter or receiver out of range");
    }
    const auto k_tx = grid.vsc_index(cfg.tx.index);
    if (!k_tx) throw Error(ErrorKind::InputOnLoadBus, "transmitter bus hosts no converter");
    check_droop(grid, droop);

    const auto k_count = static_cast<Index>(grid.vsc_count());
    const auto tx = static_cast<Index>(cfg.tx.index);
    const auto rx = static_cast<Index>(cfg.rx.index);
    const double h = model.H(rx, tx);
    const Eigen::VectorXd& v_op = model.operating_point.v;
    const SteadyState nominal_state = solve_steady_state(grid, nominal_droop(grid), cfg.solver);

    // Only two input symbols exist, so each output is computed once.
    auto outcome_for = [&](int symbol) {
        const double dx = symbol * cfg.amplitude;
        Outcome out;
        if (cfg.mode == ChannelMode::Linearized) {
            out.dv = model.H.col(tx) * dx;
            out.p.resize(k_count);
            for (Index k = 0; k < k_count; ++k) {
                const auto n = static_cast<Index>(grid.vsc_buses()[static_cast<std::size_t>(k)]);
                out.p[k] = model.operating_point.p[k] + model.Phi(n, tx) * dx;
            }
        } else {
            DroopState shifted = droop;
            shifted.x[static_cast<Index>(*k_tx)] += dx;
            const SteadyState state = solve_steady_state(grid, shifted, cfg.solver);
            out.dv = state.v - v_op;
            out.p = state.p;
        }
        return out;
    };
    const Outcome plus = outcome_for(+1);
    const Outcome minus = outcome_for(-1);

    const std::uint64_t chunks = (cfg.slots + kChunk - 1) / kChunk;
    std::vector<Tally> tallies(static_cast<std::size_t>(chunks));
    SimReport report;
    if (cfg.record_trace) report.trace.resize(static_cast<std::size_t>(cfg.slots));

    auto run_chunk = [&](std::uint64_t c) {
        Tally t;
        t.dev_sq = Eigen::VectorXd::Zero(k_count);
        const std::uint64_t end = std::min(cfg.slots, (c + 1) * kChunk);
        for (std::uint64_t slot = c * kChunk; slot < end; ++slot) {
            SlotRng rng(cfg.rng_seed, slot);
            const int symbol = (rng() >> 63) != 0 ? +1 : -1;
            double noise = 0.0;
            if (cfg.sigma_z > 0.0) noise = std::normal_distribution<double>(0.0, cfg.sigma_z)(rng);
            const Outcome& out = symbol > 0 ? plus : minus;
            const double observation = out.dv[rx] + noise;
            const int decision = h * observation >= 0.0 ? +1 : -1;
            if (decision != symbol) ++t.errors;
            t.proj_sum += symbol * observation;
            t.proj_sq_sum += observation * observation;
            t.dev_sq += (out.p - nominal_state.p).cwiseAbs2();
            if (cfg.record_trace) report.trace[static_cast<std::size_t>(slot)] = {slot, symbol, out.dv[rx], observation, decision};
        }
        tallies[static_cast<std::size_t>(c)] = std::move(t);
    };

    const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(
        cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency()), chunks));
    if (workers <= 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::uint64_t c = w; c < chunks; c += workers) run_chunk(c);
            });
        }
        for (auto& th : pool) th.join();
    }

    // Reduce in chunk order so the result does not depend on the thread count.
    double proj_sum = 0.0, proj_sq_sum = 0.0;
    report.p_dev_mean_sq = Eigen::VectorXd::Zero(k_count);
    for (const Tally& t : tallies) {
        report.bit_errors += t.errors;
        proj_sum += t.proj_sum;
        proj_sq_sum += t.proj_sq_sum;
        report.p_dev_mean_sq += t.dev_sq;
    }
    const auto n = static_cast<double>(cfg.slots);
    report.slots_run = cfg.slots;
    report.ber = static_cast<double>(report.bit_errors) / n;
    report.ber_ci95 = 1.96 * std::sqrt(report.ber * (1.0 - report.ber) / n);
    report.p_dev_mean_sq /= n;

    // Observation = mean * symbol + noise; estimate both from the projected samples.
    const double mean = proj_sum / n;
    const double variance = std::max(0.0, proj_sq_sum / n - mean * mean);
    report.snr_empirical = variance > 0.0 ? mean * mean / variance : std::numeric_limits<double>::infinity();

    report.budget_exceeded.assign(static_cast<std::size_t>(k_count), false);
    for (Index k = 0; k < k_count; ++k) {
        const double pi = grid.vsc(static_cast<std::size_t>(k)).pi_budget;
        if (report.p_dev_mean_sq[k] > 1.05 * pi * pi) {
            report.budget_exceeded[static_cast<std::size_t>(k)] = true;
            log_warn("converter " + std::to_string(k) + " exceeded its power deviation budget: " +
                     std::to_string(report.p_dev_mean_sq[k]) + " W^2 > 1.05 * " + std::to_string(pi * pi) + " W^2");
        }
    }
    return report;
}

std::vector<ComplianceRow> measure_power_compliance(const ValidatedGrid& grid, const DroopState& droop, const SimConfig& cfg,
                                                    const Eigen::VectorXd& pi, double slack) {
    if (pi.size() != static_cast<Index>(grid.vsc_count())) throw Error(ErrorKind::InvalidArgument, "one budget per converter is required");
    const SteadyState state = solve_steady_state(grid, droop, cfg.solver);
    const ChannelModel model = linearize(grid, droop, state);
    SimConfig quiet = cfg;
    quiet.record_trace = false;
    const SimReport report = run_transmission(grid, droop, model, quiet);
    std::vector<ComplianceRow> rows;
    for (Index k = 0; k < pi.size(); ++k) {
        ComplianceRow row;
        row.empirical = report.p_dev_mean_sq[k];
        row.bound = pi[k] * pi[k];
        row.pass = row.empirical <= (1.0 + slack) * row.bound;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace powertalk
