"""Power-talk channel modelling and SNR optimization for droop-controlled DC microgrids."""

from ._powertalk import (
    BudgetAllocation,
    ChannelModel,
    DroopState,
    Grid,
    OptimizationResult,
    PowertalkError,
    SimReport,
    SteadyState,
    SweepRow,
    allocate_input_variance,
    capacity,
    capacity_sweep,
    droop_with,
    linearize,
    maximize_snr,
    one_way_snr,
    q_function,
    simulate,
    solve_steady_state,
)

__all__ = [
    "BudgetAllocation",
    "ChannelModel",
    "DroopState",
    "Grid",
    "OptimizationResult",
    "PowertalkError",
    "SimReport",
    "SteadyState",
    "SweepRow",
    "allocate_input_variance",
    "capacity",
    "capacity_sweep",
    "droop_with",
    "linearize",
    "maximize_snr",
    "one_way_snr",
    "q_function",
    "simulate",
    "solve_steady_state",
]
