"""Single-cell downlink slicing environment with slice-selective jamming.

Time is slotted. Each slot, every slice independently raises a transmission
request; active slices carry a priority weight. The scheduler answers with a
bitmask of slices to serve, constrained by the cell's resource-block budget,
and a jammer may simultaneously target a subset of slices. A scheduled,
unjammed transmission succeeds when its link rate meets the slice's minimum
rate; a jammed one fails outright and raises a NACK.

All state transitions are pure functions of (state, actions, generators), so
identical seeds reproduce identical slot sequences bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class FixedWeight:
    """Priority weight that is the same constant every slot."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 < self.value <= 1.0:
            raise ValueError(f"fixed weight must lie in (0, 1], got {self.value}")

    def sample(self, rng: np.random.Generator) -> float:
        return self.value

    @property
    def upper(self) -> float:
        return self.value


@dataclass(frozen=True)
class UniformWeight:
    """Priority weight drawn uniformly from [low, high] each slot.

    One draw is consumed per slot regardless of slice activity, so stream
    consumption does not depend on the traffic realisation.
    """

    low: float
    high: float

    def __post_init__(self) -> None:
        if not 0.0 < self.low <= self.high <= 1.0:
            raise ValueError(
                f"uniform weight bounds must satisfy 0 < low <= high <= 1, "
                f"got ({self.low}, {self.high})"
            )

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    @property
    def upper(self) -> float:
        return self.high


WeightLaw = FixedWeight | UniformWeight


@dataclass(frozen=True)
class SliceConfig:
    """Static per-slice parameters.

    min_rate is in bits/s; rb_demand is the fixed number of resource blocks
    the slice needs in a slot it is served; snr_linear is the receive SNR of
    the slice's users on a linear scale (10.0 corresponds to 10 dB).
    """

    name: str
    arrival_prob: float
    rb_demand: int
    min_rate: float
    min_served_ratio: float
    weight_law: WeightLaw
    snr_linear: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ValueError(f"arrival_prob must lie in [0, 1], got {self.arrival_prob}")
        if self.rb_demand < 1:
            raise ValueError(f"rb_demand must be >= 1, got {self.rb_demand}")
        if self.min_rate <= 0.0:
            raise ValueError(f"min_rate must be > 0, got {self.min_rate}")
        if not 0.0 <= self.min_served_ratio <= 1.0:
            raise ValueError(
                f"min_served_ratio must lie in [0, 1], got {self.min_served_ratio}"
            )
        if self.snr_linear < 0.0:
            raise ValueError(f"snr_linear must be >= 0, got {self.snr_linear}")


@dataclass(frozen=True)
class CellConfig:
    """Cell-level capacity and the ordered set of slices it hosts."""

    total_rbs: int
    rate_constant: float
    slices: tuple[SliceConfig, ...]

    def __post_init__(self) -> None:
        if len(self.slices) < 1:
            raise ValueError("a cell needs at least one slice")
        if self.rate_constant <= 0.0:
            raise ValueError(f"rate_constant must be > 0, got {self.rate_constant}")
        worst = max(s.rb_demand for s in self.slices)
        if self.total_rbs < worst:
            raise ValueError(
                f"total_rbs={self.total_rbs} is below the largest slice demand "
                f"({worst}); no slice could ever be served"
            )

    @property
    def num_slices(self) -> int:
        return len(self.slices)


@dataclass(frozen=True)
class EnvState:
    """Observable cell state at the start of a slot.

    available_rbs equals total_rbs every slot; it is kept in the state so the
    observation layout carries the capacity explicitly.
    """

    slot: int
    available_rbs: int
    activity: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class SlotOutcome:
    """Everything that happened in one slot.

    scheduled[k] is 1 only for active slices picked by a feasible action;
    jammed[k] is 1 only for scheduled slices the jammer targeted; rates[k]
    is 0 for any slice that was not served cleanly. nack_count counts
    scheduled transmissions destroyed by jamming.
    """

    activity: tuple[int, ...]
    weights: tuple[float, ...]
    scheduled: tuple[int, ...]
    jammed: tuple[int, ...]
    success: tuple[int, ...]
    rates: tuple[float, ...]
    nack_count: int
    feasible_action: bool


def ber_awgn(snr_linear: float) -> float:
    """Bit error rate of a coherent QPSK link over AWGN at linear SNR.

    Equals the Gaussian tail probability Q(sqrt(2 * snr)), which simplifies
    to erfc(sqrt(snr)) / 2. Monotonically decreasing, 0.5 at zero SNR.
    """
    if snr_linear < 0.0:
        raise ValueError(f"snr_linear must be >= 0, got {snr_linear}")
    return 0.5 * math.erfc(math.sqrt(snr_linear))


def achieved_rate(cell: CellConfig, k: int, ber: float) -> float:
    """Downlink rate (bits/s) of slice k when served at the given BER."""
    return cell.rate_constant * cell.slices[k].rb_demand * (1.0 - ber)


def sample_arrivals(rng: np.random.Generator, cell: CellConfig) -> tuple[int, ...]:
    """Draw one Bernoulli activity indicator per slice."""
    u = rng.random(cell.num_slices)
    return tuple(int(u[k] < s.arrival_prob) for k, s in enumerate(cell.slices))


def sample_weights(
    rng: np.random.Generator, cell: CellConfig, activity: Sequence[int]
) -> tuple[float, ...]:
    """Draw per-slice priority weights; inactive slices carry weight 0.

    Uniform-law slices consume one draw per slot whether or not they are
    active, keeping stream consumption independent of traffic.
    """
    out = []
    for k, s in enumerate(cell.slices):
        law = s.weight_law
        w = law.sample(rng) if isinstance(law, UniformWeight) else law.value
        out.append(w if activity[k] else 0.0)
    return tuple(out)


def is_feasible(
    action_mask: Sequence[int], activity: Sequence[int], cell: CellConfig
) -> bool:
    """True iff the active slices picked by the mask fit in the RB budget.

    Selecting an inactive slice costs nothing: only active selections count
    toward the demand sum.
    """
    demand = 0
    for k, s in enumerate(cell.slices):
        if action_mask[k] and activity[k]:
            demand += s.rb_demand
    return demand <= cell.total_rbs


def observe_victim(state: EnvState, cell: CellConfig) -> np.ndarray:
    """Scheduler observation: [capacity fraction, a_1, w_1, ..., a_K, w_K]."""
    k = cell.num_slices
    obs = np.empty(1 + 2 * k, dtype=np.float64)
    obs[0] = state.available_rbs / cell.total_rbs
    obs[1::2] = state.activity
    obs[2::2] = state.weights
    return obs


class SlicingEnv:
    """Steps the slotted cell under scheduler and jammer actions.

    Owns two generators (arrivals, weights) so that traffic randomness is
    isolated from every other consumer in a run. Per-slice clean rates are
    precomputed from the configured SNRs; the channel itself is static.
    """

    def __init__(
        self,
        cell: CellConfig,
        arrivals_rng: np.random.Generator,
        weights_rng: np.random.Generator,
    ) -> None:
        self.cell = cell
        self._arrivals = arrivals_rng
        self._weights = weights_rng
        self._clean_rate = tuple(
            achieved_rate(cell, k, ber_awgn(s.snr_linear))
            for k, s in enumerate(cell.slices)
        )
        self._rate_ok = tuple(
            self._clean_rate[k] >= s.min_rate for k, s in enumerate(cell.slices)
        )

    @property
    def clean_rates(self) -> tuple[float, ...]:
        return self._clean_rate

    def idle_state(self) -> EnvState:
        """A no-traffic state; used as the jammer's observation before slot 0."""
        k = self.cell.num_slices
        return EnvState(0, self.cell.total_rbs, (0,) * k, (0.0,) * k)

    def reset(self) -> EnvState:
        """Draw the first slot's arrivals and weights."""
        activity = sample_arrivals(self._arrivals, self.cell)
        weights = sample_weights(self._weights, self.cell, activity)
        return EnvState(0, self.cell.total_rbs, activity, weights)

    def step(
        self,
        state: EnvState,
        victim_mask: Sequence[int],
        jam_mask: Sequence[int],
    ) -> tuple[EnvState, SlotOutcome]:
        """Resolve one slot and draw the next state's traffic.

        An RB-infeasible scheduling mask yields zero service for the whole
        slot (nothing scheduled, nothing jammed); the slot still advances.
        Jam budget enforcement is the caller's job: any jam mask is applied
        as given.
        """
        cell = self.cell
        feasible = is_feasible(victim_mask, state.activity, cell)
        k_count = cell.num_slices
        scheduled = [0] * k_count
        jammed = [0] * k_count
        success = [0] * k_count
        rates = [0.0] * k_count
        nacks = 0
        if feasible:
            for k in range(k_count):
                if victim_mask[k] and state.activity[k]:
                    scheduled[k] = 1
                    if jam_mask[k]:
                        jammed[k] = 1
                        nacks += 1
                    else:
                        rates[k] = self._clean_rate[k]
                        if self._rate_ok[k]:
                            success[k] = 1
        outcome = SlotOutcome(
            activity=state.activity,
            weights=state.weights,
            scheduled=tuple(scheduled),
            jammed=tuple(jammed),
            success=tuple(success),
            rates=tuple(rates),
            nack_count=nacks,
            feasible_action=feasible,
        )
        activity = sample_arrivals(self._arrivals, cell)
        weights = sample_weights(self._weights, cell, activity)
        next_state = EnvState(state.slot + 1, cell.total_rbs, activity, weights)
        return next_state, outcome


def action_masks(num_slices: int) -> tuple[tuple[int, ...], ...]:
    """All 2^K scheduling bitmasks in ascending integer order.

    Bit k of mask index m selects slice k, so the action index doubles as
    the mask's integer value.
    """
    return tuple(
        tuple((m >> k) & 1 for k in range(num_slices)) for m in range(1 << num_slices)
    )
