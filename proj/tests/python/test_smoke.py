import math
import os
from pathlib import Path

import numpy as np
import pytest

import powertalk as pt

DATA = Path(os.environ.get("POWERTALK_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def grid():
    return pt.Grid.from_file(str(DATA / "case_study.json"))


def test_grid_metadata(grid):
    assert grid.bus_count == 3
    assert grid.bus_names == ["A", "B", "C"]
    assert grid.vsc_buses == [0, 1]
    np.testing.assert_allclose(grid.budgets(), [10.0, 10.0])


def test_steady_state(grid):
    s = pt.solve_steady_state(grid)
    np.testing.assert_allclose(s.v, [396.453905, 397.997196, 394.705408], atol=1e-5)
    newton = pt.solve_steady_state(grid, method="newton")
    np.testing.assert_allclose(newton.v, s.v, atol=1e-9)
    # Supplied power covers the loads and the line losses.
    r_ac, r_bc = 0.641 * 0.3, 0.641 * 1.0
    v_a, v_b, v_c = s.v
    absorbed = v_c**2 / 50.0 + 2500.0 + (v_a - v_c) ** 2 / r_ac + (v_b - v_c) ** 2 / r_bc
    assert math.isclose(s.p.sum(), absorbed, rel_tol=1e-9)


def test_channel(grid):
    model = pt.linearize(grid)
    assert model.H.shape == (3, 3)
    assert model.H[1, 0] == pytest.approx(0.24138545, abs=1e-7)
    assert model.kappa[2] == pytest.approx(1.0024, abs=1e-3)
    assert np.all(model.H[:, 2] == 0.0)


def test_budget_and_snr(grid):
    alloc = pt.allocate_input_variance(grid, "A")
    assert alloc.feasible
    assert alloc.s[0] == pytest.approx(0.0015589651, rel=1e-6)
    assert pt.one_way_snr(grid, "A", "B") == pytest.approx(0.908, abs=1e-3)
    assert pt.capacity(3.0) == pytest.approx(1.0)


def test_optimizer_small_box(grid):
    res = pt.maximize_snr(grid, "A", "B", r_max_tx=0.6, r_max_rx=0.6, threads=1)
    np.testing.assert_allclose(res.r_star, [0.44, 0.48], atol=1e-9)
    assert res.snr > res.snr_nominal
    rows = pt.capacity_sweep(grid, 0, 1, [5.0, 10.0], r_max_tx=0.6, r_max_rx=0.6, threads=1)
    assert [r.pi for r in rows] == [5.0, 10.0]
    assert all(r.capacity_opt >= r.capacity_nominal for r in rows)


def test_simulation(grid):
    h = pt.linearize(grid).H[1, 0]
    amplitude = 2.0 * 0.01 / h  # SNR 4
    rep = pt.simulate(grid, "A", "B", amplitude, slots=40000, mode="linearized", seed=3)
    p = pt.q_function(2.0)
    assert abs(rep.ber - p) <= 3.0 * math.sqrt(p * (1 - p) / 40000)
    again = pt.simulate(grid, "A", "B", amplitude, slots=40000, mode="linearized", seed=3)
    assert again.bit_errors == rep.bit_errors


def test_errors(grid):
    with pytest.raises(pt.PowertalkError, match="InfeasibleBudget"):
        pt.allocate_input_variance(grid, "A", droop=pt.droop_with(grid, np.array([1.5, 0.39])), pi=np.array([1.0, 1.0]))
    with pytest.raises(pt.PowertalkError, match="SchemaError"):
        pt.Grid.from_json('{"buses": []}')
    with pytest.raises(pt.PowertalkError):
        pt.one_way_snr(grid, "C", "B")
