"""Exhaustive per-slot reference scheduler.

Scans every scheduling bitmask and returns the feasible one with the largest
weighted value, assuming clean links (no jamming, negligible error rate).
Slot-coupling through the SLA windows is deliberately ignored: the result is
an upper reference for per-slot scheduler value, not a window-feasible plan.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import CellConfig, SlicingEnv

MAX_EXHAUSTIVE_SLICES = 20


@dataclass(frozen=True)
class OracleResult:
    best_mask: tuple[int, ...]
    best_value: float
    demand: int


def optimal_subset(
    activity: Sequence[int], weights: Sequence[float], cell: CellConfig
) -> OracleResult:
    """Best feasible subset of active slices by total weight.

    Ties resolve to the lowest bitmask, so the returned mask never selects
    an inactive slice (dropping one preserves value and lowers the mask).
    """
    k_count = cell.num_slices
    if k_count > MAX_EXHAUSTIVE_SLICES:
        raise ValueError(f"exhaustive scan limited to {MAX_EXHAUSTIVE_SLICES} slices")
    demands = [s.rb_demand for s in cell.slices]
    best_mask = 0
    best_value = 0.0
    best_demand = 0
    for m in range(1, 1 << k_count):
        value = 0.0
        demand = 0
        for k in range(k_count):
            if (m >> k) & 1 and activity[k]:
                value += weights[k]
                demand += demands[k]
        if demand <= cell.total_rbs and value > best_value:
            best_mask = m
            best_value = value
            best_demand = demand
    return OracleResult(
        best_mask=tuple((best_mask >> k) & 1 for k in range(k_count)),
        best_value=best_value,
        demand=best_demand,
    )


def oracle_policy_return(
    cell: CellConfig, horizon: int, rng: np.random.Generator
) -> float:
    """Mean realised value per slot when scheduling with optimal_subset.

    Runs `horizon` unjammed slots; the realised value counts the weights of
    slices actually served successfully, so a low-SNR configuration can fall
    short of the oracle's assumed-clean value.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    env = SlicingEnv(cell, rng, rng)
    no_jam = (0,) * cell.num_slices
    state = env.reset()
    total = 0.0
    for _ in range(horizon):
        choice = optimal_subset(state.activity, state.weights, cell)
        state, outcome = env.step(state, choice.best_mask, no_jam)
        for k in range(cell.num_slices):
            if outcome.success[k]:
                total += outcome.weights[k]
    return total / horizon
