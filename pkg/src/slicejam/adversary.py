"""Budget-constrained learning jammer.

The jammer never sees the scheduler's internals. It watches the radio
interface, so at decision time it knows the capacity and which slices were
active in the previous slot (transmissions for the current slot have not
happened yet), and its only feedback is the count of NACKs its jamming
caused. Its action set enumerates every slice subset whose combined RB
demand fits the jamming budget, so budget feasibility holds by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dqn import (
    AgentHyperparams,
    QNetwork,
    ReplayBuffer,
    Transition,
    epsilon_at,
    greedy_action,
    qnetwork_digest,
    select_action,
    sync_target,
    train_step_arrays,
)
from .env import (
    CellConfig,
    EnvState,
    SlicingEnv,
    SlotOutcome,
    action_masks,
    observe_victim,
)


@dataclass(frozen=True)
class AttackerConfig:
    """Jamming budget, the phases the jammer acts in, and its learning knobs."""

    jam_budget: int
    enabled_phases: frozenset[str]
    hyperparams: AgentHyperparams

    def __post_init__(self) -> None:
        if self.jam_budget < 0:
            raise ValueError(f"jam_budget must be >= 0, got {self.jam_budget}")

    def validate_against(self, cell: CellConfig) -> None:
        cheapest = min(s.rb_demand for s in cell.slices)
        if self.jam_budget < cheapest:
            warnings.warn(
                f"jam_budget={self.jam_budget} is below every slice demand "
                f"(min {cheapest}); the jammer can never disrupt anything",
                stacklevel=2,
            )


def enumerate_jam_actions(cell: CellConfig, budget: int) -> tuple[tuple[int, ...], ...]:
    """All slice bitmasks whose combined RB demand fits the budget.

    Ascending bitmask order; the empty mask is always present. Demand counts
    every selected slice, active or not, because the jammer commits energy to
    the slice's blocks regardless of traffic.
    """
    k_count = cell.num_slices
    demands = [s.rb_demand for s in cell.slices]
    out = []
    for m in range(1 << k_count):
        demand = sum(demands[k] for k in range(k_count) if (m >> k) & 1)
        if demand <= budget:
            out.append(tuple((m >> k) & 1 for k in range(k_count)))
    return tuple(out)


def attacker_observe(state: EnvState, cell: CellConfig) -> np.ndarray:
    """Jammer observation: [capacity fraction, a_1, ..., a_K].

    Deliberately excludes priority weights and anything about the scheduler's
    choice; those never cross the air interface.
    """
    k = cell.num_slices
    obs = np.empty(1 + k, dtype=np.float64)
    obs[0] = state.available_rbs / cell.total_rbs
    obs[1:] = state.activity
    return obs


def attacker_reward(outcome: SlotOutcome) -> int:
    """NACKs caused this slot: scheduled transmissions killed by jamming."""
    return outcome.nack_count


# Fraction of training over which the returned parameters are averaged.
# The jammer's action-value gaps are small (fractions of one NACK), so the
# final SGD iterate is too noisy to rank actions reliably; the tail average
# of the iterates removes that noise without touching the learning rate.
TAIL_AVERAGE_FRACTION = 0.25


def train_surrogate_attacker(
    frozen_victim: QNetwork,
    cell: CellConfig,
    jam_budget: int,
    slots: int,
    hp: AgentHyperparams,
    *,
    arrivals_rng: np.random.Generator,
    weights_rng: np.random.Generator,
    init_rng: np.random.Generator,
    explore_rng: np.random.Generator,
    replay_rng: np.random.Generator,
    tail_average_fraction: float = TAIL_AVERAGE_FRACTION,
) -> QNetwork:
    """Train a jammer against a frozen scheduler policy.

    The scheduler acts greedily from the given network, which is asserted
    unchanged afterwards. The jammer learns over the budget-feasible action
    set from NACK rewards alone; the returned network carries the tail
    average of the parameter iterates (Polyak averaging over the final
    stretch of training).
    """
    if slots < 1:
        raise ValueError(f"slots must be >= 1, got {slots}")
    if not 0.0 < tail_average_fraction <= 1.0:
        raise ValueError("tail_average_fraction must lie in (0, 1]")
    victim_digest = qnetwork_digest(frozen_victim)

    jam_masks = enumerate_jam_actions(cell, jam_budget)
    jam_indices = tuple(range(len(jam_masks)))
    victim_masks = action_masks(cell.num_slices)
    victim_indices = tuple(range(len(victim_masks)))

    env = SlicingEnv(cell, arrivals_rng, weights_rng)
    net = QNetwork.initialize(
        [1 + cell.num_slices, *hp.hidden_sizes, len(jam_masks)], init_rng
    )
    target = net.copy()
    buffer = ReplayBuffer(hp.buffer_capacity)

    prev_state = env.idle_state()
    state = env.reset()
    train_count = 0
    avg_start = int(slots * (1.0 - tail_average_fraction))
    param_sum: np.ndarray | None = None
    param_count = 0
    for t in range(slots):
        obs = attacker_observe(prev_state, cell)
        eps = epsilon_at(hp, t)
        jam_idx = select_action(net, obs, eps, jam_indices, explore_rng)

        victim_obs = observe_victim(state, cell)
        victim_idx = greedy_action(frozen_victim, victim_obs, victim_indices)

        next_state, outcome = env.step(state, victim_masks[victim_idx], jam_masks[jam_idx])
        next_obs = attacker_observe(state, cell)
        buffer.push(
            Transition(obs, jam_idx, float(outcome.nack_count), next_obs, jam_indices)
        )
        if len(buffer) >= hp.batch_size:
            bx, ba, br, bx2, _ = buffer.sample_arrays(
                hp.batch_size, replay_rng, gather_feasible=False
            )
            train_step_arrays(
                net, target, bx, ba, br, bx2, None,
                hp.learning_rate, hp.discount, hp.grad_clip,
            )
            train_count += 1
            if train_count % hp.target_sync_period == 0:
                sync_target(net, target)
        if t >= avg_start:
            flat = net.params_flat()
            param_sum = flat if param_sum is None else param_sum + flat
            param_count += 1
        prev_state = state
        state = next_state

    if qnetwork_digest(frozen_victim) != victim_digest:
        raise AssertionError("frozen scheduler parameters changed during jammer training")
    if param_count:
        net.set_params_flat(param_sum / param_count)
    return net
