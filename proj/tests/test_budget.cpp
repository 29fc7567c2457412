#include <catch2/catch_amalgamated.hpp>

#include "powertalk/budget.hpp"
#include "powertalk/channel.hpp"
#include "powertalk/error.hpp"
#include "test_support.hpp"

#include <functional>

using namespace powertalk;
using namespace powertalk::testing;
using Catch::Approx;

namespace {

ErrorKind error_kind(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("static power investment follows the oracle", "[budget]") {
    const ValidatedGrid grid = case_study();
    const CaseStudyOracle nom = case_study_oracle(kRNom, kRNom);
    const CaseStudyOracle moved = case_study_oracle(0.59, kRNom);
    const Eigen::VectorXd dp = vr_power_investment(grid, nominal_droop(grid), droop_with(0.59, kRNom));
    CHECK(dp[0] == Approx(moved.p_a - nom.p_a).epsilon(1e-8));
    CHECK(dp[1] == Approx(moved.p_b - nom.p_b).epsilon(1e-8));
    // Raising A's virtual resistance shifts load from A to B.
    CHECK(dp[0] < 0.0);
    CHECK(dp[1] > 0.0);

    const Eigen::VectorXd none = vr_power_investment(grid, nominal_droop(grid), nominal_droop(grid));
    CHECK(none.isZero(0.0));
}

TEST_CASE("investment needs unchanged references", "[budget][errors]") {
    const ValidatedGrid grid = case_study();
    CHECK(error_kind([&] { vr_power_investment(grid, nominal_droop(grid), droop_with(0.5, 0.5, 401.0)); }) ==
          ErrorKind::InvalidArgument);
}

TEST_CASE("single transmitter allocation", "[budget]") {
    const ValidatedGrid grid = case_study();
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    const ChannelModel m = linearize(grid, nominal_droop(grid), s);
    const Eigen::VectorXd pi = Eigen::Vector2d(10.0, 10.0);
    const Eigen::VectorXd dp = Eigen::Vector2d::Zero();
    const BudgetAllocation a = allocate_input_variance(grid, m.Phi, pi, dp, {BusId{0}});
    const CaseStudyOracle o = case_study_oracle(kRNom, kRNom);
    const double expected = std::min(100.0 / (o.phi_aa * o.phi_aa), 100.0 / (o.phi_ba * o.phi_ba));
    CHECK(a.feasible);
    CHECK(a.s[0] == Approx(expected).epsilon(1e-9));
    CHECK(a.s[0] == Approx(0.0015589651).epsilon(1e-6));
    CHECK(a.s[1] == 0.0);
    CHECK(a.s[2] == 0.0);
    // A's own row is the binding one.
    CHECK(a.slack[0] == Approx(0.0).margin(1e-9));
    CHECK(a.slack[1] > 0.0);
}

TEST_CASE("budget edge cases", "[budget]") {
    const ValidatedGrid grid = case_study();
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    const ChannelModel m = linearize(grid, nominal_droop(grid), s);
    const Eigen::VectorXd pi = Eigen::Vector2d(10.0, 10.0);

    SECTION("spent budget leaves zero variance") {
        const BudgetAllocation a = allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d(10.0, 3.0), {BusId{0}});
        CHECK(a.s[0] == 0.0);
        CHECK(a.feasible);
    }
    SECTION("overspent budget is infeasible") {
        CHECK(error_kind([&] { allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d(10.5, 0.0), {BusId{0}}); }) ==
              ErrorKind::InfeasibleBudget);
    }
    SECTION("scaling every budget by c scales variance by c^2") {
        const BudgetAllocation a = allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d::Zero(), {BusId{0}});
        const BudgetAllocation b = allocate_input_variance(grid, m.Phi, 3.0 * pi, Eigen::Vector2d::Zero(), {BusId{0}});
        CHECK(b.s[0] == Approx(9.0 * a.s[0]).epsilon(1e-12));
    }
    SECTION("load-only transmitter") {
        CHECK(error_kind([&] { allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d::Zero(), {BusId{2}}); }) ==
              ErrorKind::InputOnLoadBus);
    }
    SECTION("two transmitters") {
        const BudgetAllocation eq = allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d::Zero(), {BusId{0}, BusId{1}});
        CHECK(eq.s[0] == eq.s[1]);
        CHECK(eq.feasible);
        CHECK(eq.slack.minCoeff() == Approx(0.0).margin(1e-9));

        AllocationOptions lp;
        lp.mode = AllocationMode::WeightedLp;
        const BudgetAllocation best = allocate_input_variance(grid, m.Phi, pi, Eigen::Vector2d::Zero(), {BusId{0}, BusId{1}}, lp);
        CHECK(best.feasible);
        CHECK(best.s[0] + best.s[1] >= eq.s[0] + eq.s[1] - 1e-15);
    }
}

TEST_CASE("dense simplex", "[budget][lp]") {
    // max 3a + 2b  s.t.  a + b <= 4,  a + 3b <= 6,  a <= 3  ->  (3, 1)
    Eigen::MatrixXd a(3, 2);
    a << 1, 1, 1, 3, 1, 0;
    const Eigen::VectorXd s = maximize_linear_program(a, Eigen::Vector3d(4, 6, 3), Eigen::Vector2d(3, 2));
    CHECK(s[0] == Approx(3.0));
    CHECK(s[1] == Approx(1.0));

    // Degenerate vertex at the origin still terminates.
    const Eigen::VectorXd z = maximize_linear_program(a, Eigen::Vector3d(0, 0, 0), Eigen::Vector2d(1, 1));
    CHECK(z.isZero(0.0));

    Eigen::MatrixXd open(1, 2);
    open << 1, -1;
    CHECK(error_kind([&] { maximize_linear_program(open, Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(0, 1)); }) ==
          ErrorKind::InvalidArgument);
}

TEST_CASE("identical units on a shared bus split the budget evenly", "[budget]") {
    GridSpec spec;
    spec.buses.push_back({"A", {}, VscSpec{400, 0.5, std::nullopt, 10}});
    spec.buses.push_back({"B", {}, VscSpec{400, 0.5, std::nullopt, 10}});
    spec.buses.push_back({"L", LoadSpec{40.0, 0.0, 1000.0}, std::nullopt});
    spec.lines.push_back({BusId{0}, BusId{2}, 0.2});
    spec.lines.push_back({BusId{1}, BusId{2}, 0.2});
    const ValidatedGrid grid = validate_grid(spec);
    const SteadyState s = solve_steady_state(grid, nominal_droop(grid));
    const ChannelModel m = linearize(grid, nominal_droop(grid), s);
    CHECK(m.Phi(0, 0) == Approx(m.Phi(1, 1)).epsilon(1e-12));
    CHECK(m.Phi(1, 0) == Approx(m.Phi(0, 1)).epsilon(1e-12));
    const BudgetAllocation a = allocate_input_variance(grid, m.Phi, nameplate_budgets(grid), Eigen::Vector2d::Zero(),
                                                       {BusId{0}, BusId{1}});
    CHECK(a.s[0] == a.s[1]);
    CHECK(a.slack[0] == Approx(a.slack[1]).margin(1e-9));
}
