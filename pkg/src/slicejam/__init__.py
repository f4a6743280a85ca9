"""Deterministic simulator of jamming attacks on a learning slice scheduler.

A DDQN scheduler allocates resource blocks across network slices under
sliding-window SLA constraints while a budget-limited DDQN jammer, trained
as a black-box surrogate, disrupts slice transmissions to corrupt the
scheduler's reward. The harness runs the clean / attack / recovery protocol
and quantifies SLA violations and post-attack recovery.
"""

from .adversary import (
    AttackerConfig,
    attacker_observe,
    attacker_reward,
    enumerate_jam_actions,
    train_surrogate_attacker,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    PhaseConfig,
    SlaSettings,
    config_hash,
    default_config,
    load_config,
    render_config,
)
from .dqn import (
    AgentHyperparams,
    DivergenceError,
    QNetwork,
    ReplayBuffer,
    Transition,
    double_q_target,
    epsilon_at,
    greedy_action,
    load_qnetwork,
    qnetwork_digest,
    sample_batch,
    save_qnetwork,
    select_action,
    sync_target,
    train_step,
)
from .env import (
    CellConfig,
    EnvState,
    FixedWeight,
    SliceConfig,
    SlicingEnv,
    SlotOutcome,
    UniformWeight,
    achieved_rate,
    action_masks,
    ber_awgn,
    is_feasible,
    observe_victim,
    sample_arrivals,
    sample_weights,
)
from .harness import RunResult, emit_outputs, moving_average, run_experiment
from .oracle import OracleResult, optimal_subset, oracle_policy_return
from .sla import SlaStatus, SlaWindow, victim_reward, violation_rate

__version__ = "0.1.0"

__all__ = [
    "AgentHyperparams",
    "AttackerConfig",
    "CellConfig",
    "ConfigError",
    "DivergenceError",
    "EnvState",
    "ExperimentConfig",
    "FixedWeight",
    "OracleResult",
    "PhaseConfig",
    "QNetwork",
    "ReplayBuffer",
    "RunResult",
    "SlaSettings",
    "SlaStatus",
    "SlaWindow",
    "SliceConfig",
    "SlicingEnv",
    "SlotOutcome",
    "Transition",
    "UniformWeight",
    "achieved_rate",
    "action_masks",
    "attacker_observe",
    "attacker_reward",
    "ber_awgn",
    "config_hash",
    "default_config",
    "double_q_target",
    "emit_outputs",
    "enumerate_jam_actions",
    "epsilon_at",
    "greedy_action",
    "is_feasible",
    "load_config",
    "load_qnetwork",
    "moving_average",
    "observe_victim",
    "optimal_subset",
    "oracle_policy_return",
    "qnetwork_digest",
    "render_config",
    "run_experiment",
    "sample_arrivals",
    "sample_batch",
    "sample_weights",
    "save_qnetwork",
    "select_action",
    "sync_target",
    "train_step",
    "train_surrogate_attacker",
    "victim_reward",
    "violation_rate",
]
