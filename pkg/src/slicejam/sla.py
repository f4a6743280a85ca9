"""Sliding-window service level metrics and the scheduler's reward.

Each slice is judged over the last `window_len` slots on two guarantees: the
fraction of its requests that were served successfully, and its average
achieved rate over the slots it was active. A window with no requests is
vacuously satisfied (an idle tenant has no violated guarantee).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .env import CellConfig, SlotOutcome

RewardMode = Literal["sla_aware", "sla_unaware"]


@dataclass(frozen=True)
class SlaStatus:
    """Per-slice window metrics for one slot: ratios, rates, pass flags."""

    served_ratio: tuple[float, ...]
    avg_rate: tuple[float, ...]
    sla_ok: tuple[bool, ...]


class SlaWindow:
    """Ring buffers of the last `window_len` slots of per-slice service.

    Running sums over the active entries make the per-slot metric queries
    O(1); the deques exist to evict exactly in FIFO order.
    """

    def __init__(self, window_len: int, cell: CellConfig) -> None:
        if window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {window_len}")
        self.window_len = window_len
        self.cell = cell
        k = cell.num_slices
        self._entries: list[deque[tuple[int, int, float]]] = [deque() for _ in range(k)]
        self._n_active = [0] * k
        self._n_success = [0] * k
        self._rate_sum = [0.0] * k
        self.slots_seen = 0

    def push_slot(self, outcome: SlotOutcome) -> "SlaWindow":
        """Append one slot, evicting the oldest once the window is full."""
        k_count = self.cell.num_slices
        if len(outcome.activity) != k_count:
            raise ValueError(
                f"outcome has {len(outcome.activity)} slices, window expects {k_count}"
            )
        for k in range(k_count):
            q = self._entries[k]
            if len(q) == self.window_len:
                old_active, old_success, old_rate = q.popleft()
                if old_active:
                    self._n_active[k] -= 1
                    self._n_success[k] -= old_success
                    self._rate_sum[k] -= old_rate
            entry = (outcome.activity[k], outcome.success[k], outcome.rates[k])
            q.append(entry)
            if entry[0]:
                self._n_active[k] += 1
                self._n_success[k] += entry[1]
                self._rate_sum[k] += entry[2]
        self.slots_seen += 1
        return self

    def served_ratio(self, k: int) -> float:
        """Fraction of slice k's windowed requests served successfully.

        Returns 1.0 when the window holds no requests for the slice.
        """
        n = self._n_active[k]
        if n == 0:
            return 1.0
        return self._n_success[k] / n

    def avg_rate(self, k: int) -> float:
        """Mean achieved rate of slice k over its active windowed slots.

        Returns the slice's minimum rate (vacuously passing) when the window
        holds no requests.
        """
        n = self._n_active[k]
        if n == 0:
            return self.cell.slices[k].min_rate
        return self._rate_sum[k] / n

    def sla_indicator(self, k: int) -> bool:
        """True iff slice k currently meets both guarantees (inclusive)."""
        s = self.cell.slices[k]
        return self.avg_rate(k) >= s.min_rate and self.served_ratio(k) >= s.min_served_ratio

    def sla_flags(self) -> tuple[bool, ...]:
        return tuple(self.sla_indicator(k) for k in range(self.cell.num_slices))

    def status(self) -> SlaStatus:
        k_count = self.cell.num_slices
        return SlaStatus(
            served_ratio=tuple(self.served_ratio(k) for k in range(k_count)),
            avg_rate=tuple(self.avg_rate(k) for k in range(k_count)),
            sla_ok=self.sla_flags(),
        )


def victim_reward(
    outcome: SlotOutcome,
    sla_flags: Sequence[bool],
    penalty: float,
    mode: RewardMode = "sla_aware",
) -> float:
    """Scheduler reward for one slot.

    The base term is the weighted sum of successfully served slices. In
    sla_aware mode each slice currently violating its SLA subtracts
    `penalty`; sla_unaware mode keeps only the base term.
    """
    r = 0.0
    for k in range(len(outcome.activity)):
        if outcome.activity[k] and outcome.success[k]:
            r += outcome.weights[k]
    if mode == "sla_aware":
        r -= penalty * sum(1 for ok in sla_flags if not ok)
    return r


def violation_rate(
    trace: Sequence[SlaStatus] | np.ndarray,
    k: int,
    start: int,
    stop: int,
    warmup: int = 0,
) -> float:
    """Fraction of slots in [start, stop) where slice k violated its SLA.

    Slots below `warmup` (the window length, typically) are excluded because
    the guarantees only bind once a full window exists. `trace` is either a
    sequence of SlaStatus or a (slots, slices) boolean array of pass flags.
    """
    lo = max(start, warmup)
    if lo >= stop:
        raise ValueError(f"empty slot range [{start}, {stop}) after warmup {warmup}")
    if isinstance(trace, np.ndarray):
        flags = trace[lo:stop, k]
        return float(np.mean(~flags.astype(bool)))
    span = range(lo, stop)
    return sum(1 for t in span if not trace[t].sla_ok[k]) / len(span)
