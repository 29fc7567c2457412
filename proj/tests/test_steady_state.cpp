#include <catch2/catch_amalgamated.hpp>

#include "powertalk/error.hpp"
#include "powertalk/steady_state.hpp"
#include "test_support.hpp"

using namespace powertalk;
using namespace powertalk::testing;
using Catch::Approx;

namespace {

ValidatedGrid isolated_bus(std::optional<double> r_cr, double d_cp, double x = 400.0, double r = 0.39) {
    GridSpec spec;
    spec.buses.push_back({"bus", LoadSpec{r_cr, 0.0, d_cp}, VscSpec{x, r, std::nullopt, 0}});
    return validate_grid(spec);
}

ErrorKind solve_error(const ValidatedGrid& grid, const DroopState& droop, SolverOptions options = {}) {
    try {
        solve_steady_state(grid, droop, options);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected the solver to fail");
    return ErrorKind::InvalidArgument;
}

// Total absorbed power: loads plus line losses.
double absorbed_power(const ValidatedGrid& grid, const Eigen::VectorXd& v) {
    double total = 0.0;
    for (std::size_t n = 0; n < grid.bus_count(); ++n) {
        const double vn = v[static_cast<Eigen::Index>(n)];
        const LoadSpec& load = grid.load(n);
        total += vn * vn * grid.load_conductance(n) + vn * load.i_cc + load.d_cp;
    }
    for (const LineSpec& line : grid.spec().lines) {
        const double dv = v[static_cast<Eigen::Index>(line.a.index)] - v[static_cast<Eigen::Index>(line.b.index)];
        total += dv * dv / line.r_line;
    }
    return total;
}

}  // namespace

TEST_CASE("unloaded converter sits at its reference voltage", "[steady_state]") {
    const ValidatedGrid grid = isolated_bus(std::nullopt, 0.0);
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    CHECK(s.v[0] == Approx(400.0).epsilon(1e-14));
    CHECK(std::abs(s.i[0]) < 1e-12);
    CHECK(std::abs(s.p[0]) < 1e-9);
}

TEST_CASE("resistive divider on an isolated bus", "[steady_state]") {
    const ValidatedGrid grid = isolated_bus(50.0, 0.0);
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    CHECK(s.v[0] == Approx(400.0 * 50.0 / 50.39).epsilon(1e-13));
    CHECK(s.v[0] == Approx(396.904).margin(1e-3));
    CHECK(s.kappa[0] == 1.0);
}

TEST_CASE("case-study operating point", "[steady_state]") {
    const ValidatedGrid grid = case_study();
    const CaseStudyOracle o = case_study_oracle(kRNom, kRNom);
    for (SolverMethod method : {SolverMethod::GaussSeidel, SolverMethod::Newton}) {
        SolverOptions opts;
        opts.method = method;
        const SteadyState s = solve_steady_state(grid, nominal_droop(grid), opts);
        CHECK(s.residual <= opts.tol);
        CHECK(std::abs(s.v[0] - o.v_a) < 1e-8);
        CHECK(std::abs(s.v[1] - o.v_b) < 1e-8);
        CHECK(std::abs(s.v[2] - o.v_c) < 1e-8);
    }
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    CHECK(s.v[2] == Approx(394.7).margin(0.05));
    CHECK(s.v[0] == Approx(396.4).margin(0.06));
    CHECK(s.v[1] == Approx(398.0).margin(0.05));
    CHECK(s.p[0] == Approx(3600.0).margin(10.0));
    CHECK(s.p[1] == Approx(2040.0).margin(10.0));
    // Supplied power equals load plus line losses.
    CHECK(s.p.sum() == Approx(absorbed_power(grid, s.v)).epsilon(1e-10));
}

TEST_CASE("viability condition", "[steady_state][viability]") {
    SECTION("no constant-power load anywhere") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const ValidatedGrid grid = validate_grid(random_grid_spec(rng, 5, 0.0));
            const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
            CHECK(check_viability(grid, nominal_droop(grid), s.v).empty());
        }
    }
    SECTION("isolated bus boundary x^2/(4r)") {
        const double boundary = 400.0 * 400.0 / (4.0 * 0.39);
        CHECK(boundary == Approx(102564.1).margin(0.1));
        const ValidatedGrid below = isolated_bus(std::nullopt, 0.99 * boundary);
        const ValidatedGrid above = isolated_bus(std::nullopt, 2e5);
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 400.0);
        CHECK(check_viability(below, nominal_droop(below), v).empty());
        const auto violations = check_viability(above, nominal_droop(above), v);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].bus == 0);
        CHECK(violations[0].drive < violations[0].bound);
        CHECK(solve_error(above, nominal_droop(above)) == ErrorKind::NoRealRoot);
    }
    SECTION("case study at nominal droop") {
        const ValidatedGrid grid = case_study();
        const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
        CHECK(check_viability(grid, nominal_droop(grid), s.v).empty());
    }
}

TEST_CASE("converter outputs", "[steady_state]") {
    const ValidatedGrid grid = case_study();
    const DroopState droop = nominal_droop(grid);
    Eigen::VectorXd v(3);
    v << 400.0, 400.0, 395.0;
    const VscOutputs zero = vsc_outputs(grid, droop, v);
    CHECK(zero.i[0] == 0.0);
    CHECK(zero.p[1] == 0.0);

    v << 398.0, 399.0, 395.0;
    const VscOutputs base = vsc_outputs(grid, droop, v);
    DroopState doubled = droop;
    doubled.r *= 2.0;
    const VscOutputs halved = vsc_outputs(grid, doubled, v);
    CHECK(halved.i[0] == Approx(base.i[0] / 2.0));
    CHECK(halved.i[1] == Approx(base.i[1] / 2.0));
}

TEST_CASE("two-source closed form", "[steady_state][oracle]") {
    const ValidatedGrid grid = case_study();
    SECTION("matches the iterative solver") {
        const Eigen::VectorXd v = two_source_closed_form(grid, nominal_droop(grid));
        const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
        CHECK((v - s.v).cwiseAbs().maxCoeff() < 1e-8);
    }
    SECTION("without constant-power load it is the linear divider") {
        const ValidatedGrid linear = case_study(0.0);
        const DroopState droop = nominal_droop(linear);
        const NetworkMatrices m = network_matrices(linear, droop);
        Eigen::Vector3d x_bus(400.0, 400.0, 0.0);
        const Eigen::MatrixXd system = m.psi + Eigen::MatrixXd((m.y + m.y_cr).asDiagonal());
        const Eigen::VectorXd expected = system.lu().solve(m.y.cwiseProduct(x_bus));
        CHECK((two_source_closed_form(linear, droop) - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
    SECTION("symmetric sources give equal voltages") {
        GridSpec spec = case_study_spec();
        spec.lines[1].r_line = spec.lines[0].r_line;
        const ValidatedGrid sym = validate_grid(spec);
        const Eigen::VectorXd v = two_source_closed_form(sym, droop_with(0.5, 0.5));
        CHECK(v[0] == Approx(v[1]).epsilon(1e-15));
    }
    SECTION("other topologies are rejected") {
        std::mt19937_64 rng(1);
        const ValidatedGrid other = validate_grid(random_grid_spec(rng, 5));
        CHECK_THROWS_AS(two_source_closed_form(other, nominal_droop(other)), Error);
        GridSpec loaded = case_study_spec();
        loaded.buses[0].load.r_cr = 100.0;
        const ValidatedGrid g = validate_grid(loaded);
        try {
            two_source_closed_form(g, nominal_droop(g));
            FAIL("expected TopologyMismatch");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::TopologyMismatch);
        }
    }
}

TEST_CASE("solver and closed form agree over a box of virtual resistances", "[steady_state][property]") {
    const ValidatedGrid grid = case_study();
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            const DroopState droop = droop_with(0.39 + i * 0.39 * 3 / 7, 0.39 + j * 0.39 * 3 / 7);
            const SteadyState s = solve_steady_state(grid, droop);
            CHECK((s.v - two_source_closed_form(grid, droop)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("random grids: residual, power balance, Newton agreement", "[steady_state][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const ValidatedGrid grid = validate_grid(random_grid_spec(rng, 2 + trial % 8));
        const DroopState droop = nominal_droop(grid);
        const SteadyState gs = solve_steady_state(grid, droop);
        SolverOptions newton;
        newton.method = SolverMethod::Newton;
        const SteadyState nt = solve_steady_state(grid, droop, newton);
        INFO("trial " << trial);
        CHECK(current_balance_residual(grid, droop, gs.v) <= 1e-10);
        CHECK((gs.v - nt.v).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((gs.kappa.array() >= 1.0).all());
        CHECK((gs.v.array() > 0.0).all());
        CHECK(gs.p.sum() == Approx(absorbed_power(grid, gs.v)).epsilon(1e-9));
    }
}

TEST_CASE("more constant-power load never raises a voltage", "[steady_state][property]") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, 5);
    for (int trial = 0; trial < 30; ++trial) {
        GridSpec spec = random_grid_spec(rng, 6);
        const ValidatedGrid before = validate_grid(spec);
        spec.buses[pick(rng)].load.d_cp += 300.0;
        const ValidatedGrid after = validate_grid(spec);
        const SteadyState s0 = solve_steady_state(before, nominal_droop(before));
        const SteadyState s1 = solve_steady_state(after, nominal_droop(after));
        CHECK(((s1.v - s0.v).array() <= 1e-9).all());
    }
}

TEST_CASE("solver failure modes", "[steady_state][errors]") {
    const ValidatedGrid grid = case_study(2e5);
    CHECK(solve_error(grid, nominal_droop(grid)) == ErrorKind::NoRealRoot);

    const ValidatedGrid ok = case_study();
    SolverOptions one_sweep;
    one_sweep.max_iter = 1;
    CHECK(solve_error(ok, nominal_droop(ok), one_sweep) == ErrorKind::NonConvergence);
}
