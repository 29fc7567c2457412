#include <catch2/catch_amalgamated.hpp>

#include "powertalk/budget.hpp"
#include "powertalk/comsim.hpp"
#include "powertalk/error.hpp"
#include "test_support.hpp"

using namespace powertalk;
using namespace powertalk::testing;
using Catch::Approx;

namespace {

struct Setup {
    ValidatedGrid grid = case_study();
    DroopState droop = nominal_droop(grid);
    ChannelModel model = linearize(grid, droop, solve_steady_state(grid, droop));
};

SimConfig config(double amplitude, ChannelMode mode, std::uint64_t slots = 20000) {
    SimConfig c;
    c.slots = slots;
    c.amplitude = amplitude;
    c.mode = mode;
    c.sigma_z = kSigmaZ;
    c.tx = BusId{0};
    c.rx = BusId{1};
    return c;
}

// Amplitude giving the requested SNR over the linearized channel.
double amplitude_for(const ChannelModel& m, double snr) { return std::sqrt(snr) * kSigmaZ / std::abs(m.H(1, 0)); }

}  // namespace

TEST_CASE("Gaussian tail", "[comsim]") {
    CHECK(q_function(0.0) == 0.5);
    CHECK(q_function(1.0) == Approx(0.158655254).epsilon(1e-8));
    CHECK(q_function(3.0) == Approx(0.001349898).epsilon(1e-6));
}

TEST_CASE("slot generator depends only on seed and slot", "[comsim]") {
    SlotRng a(7, 100), b(7, 100), c(7, 101), d(8, 100);
    const auto first = a();
    CHECK(first == b());
    CHECK(first != c());
    CHECK(first != d());
}

TEST_CASE("noise-free transmission is error-free", "[comsim]") {
    Setup s;
    for (ChannelMode mode : {ChannelMode::Linearized, ChannelMode::Nonlinear}) {
        SimConfig c = config(0.05, mode, 5000);
        c.sigma_z = 0.0;
        c.record_trace = true;
        const SimReport r = run_transmission(s.grid, s.droop, s.model, c);
        CHECK(r.bit_errors == 0);
        CHECK(r.ber == 0.0);
        REQUIRE(r.trace.size() == 5000);
        for (const SlotRecord& rec : r.trace) CHECK(rec.decision == rec.symbol);
    }
}

TEST_CASE("linearized BER follows Q(sqrt(SNR))", "[comsim]") {
    Setup s;
    for (double snr : {1.0, 4.0}) {
        const SimConfig c = config(amplitude_for(s.model, snr), ChannelMode::Linearized, 50000);
        const SimReport r = run_transmission(s.grid, s.droop, s.model, c);
        const double p = q_function(std::sqrt(snr));
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(c.slots));
        INFO("snr " << snr << " ber " << r.ber << " expected " << p);
        CHECK(std::abs(r.ber - p) <= 3.0 * se);
        CHECK(r.snr_empirical == Approx(snr).epsilon(0.05));
    }
}

TEST_CASE("BER falls as amplitude grows", "[comsim]") {
    Setup s;
    double previous = 1.0;
    for (double snr : {0.25, 1.0, 4.0, 9.0}) {
        const SimReport r = run_transmission(s.grid, s.droop, s.model, config(amplitude_for(s.model, snr), ChannelMode::Linearized));
        CHECK(r.ber < previous);
        previous = r.ber;
    }
}

TEST_CASE("simulation is independent of the thread count", "[comsim]") {
    Setup s;
    SimConfig one = config(0.04, ChannelMode::Nonlinear, 30000);
    SimConfig three = one;
    three.threads = 3;
    const SimReport a = run_transmission(s.grid, s.droop, s.model, one);
    const SimReport b = run_transmission(s.grid, s.droop, s.model, three);
    CHECK(a.bit_errors == b.bit_errors);
    CHECK(a.snr_empirical == b.snr_empirical);
    CHECK(a.p_dev_mean_sq == b.p_dev_mean_sq);
}

TEST_CASE("power deviation stays within the allocated budget", "[comsim][budget]") {
    Setup s;
    const Eigen::VectorXd pi = nameplate_budgets(s.grid);
    const BudgetAllocation alloc = allocate_input_variance(s.grid, s.model.Phi, pi, Eigen::Vector2d::Zero(), {BusId{0}});
    const double a = std::sqrt(alloc.s[0]);
    for (ChannelMode mode : {ChannelMode::Linearized, ChannelMode::Nonlinear}) {
        const auto rows = measure_power_compliance(s.grid, s.droop, config(a, mode), pi);
        for (const ComplianceRow& row : rows) CHECK(row.pass);
    }
    // Linearized power deviation hits the binding row exactly.
    const SimReport lin = run_transmission(s.grid, s.droop, s.model, config(a, ChannelMode::Linearized));
    CHECK(lin.p_dev_mean_sq[0] == Approx(100.0).epsilon(1e-9));
    CHECK_FALSE(lin.budget_exceeded[0]);

    const SimReport loud = run_transmission(s.grid, s.droop, s.model, config(3.0 * a, ChannelMode::Linearized));
    CHECK(loud.budget_exceeded[0]);
}

TEST_CASE("simulation argument checks", "[comsim][errors]") {
    Setup s;
    SimConfig c = config(0.01, ChannelMode::Linearized);
    c.tx = BusId{2};
    try {
        run_transmission(s.grid, s.droop, s.model, c);
        FAIL("expected InputOnLoadBus");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InputOnLoadBus);
    }
    c = config(0.01, ChannelMode::Linearized, 0);
    CHECK_THROWS_AS(run_transmission(s.grid, s.droop, s.model, c), Error);
    c = config(-1.0, ChannelMode::Linearized);
    CHECK_THROWS_AS(run_transmission(s.grid, s.droop, s.model, c), Error);
}
