"""Experiment orchestration: phased runs, metric traces, and output files.

A run executes the configured phases in order. Logged phases (everything
except "attacker-prep") advance one shared environment, one SLA window, and
the scheduler's learner; the prep phase trains the jammer against a frozen
copy of the scheduler inside a sandboxed environment with its own random
substreams, so it leaves no trace in the logged timeline.

Given (config, seed), every output byte is reproducible: all randomness is
drawn from named substreams of the master seed, and file rendering uses
fixed formats.

trace.csv columns, in order: slot, phase, reward, then per slice
<name>_active, _weight, _scheduled, _jam_selected, _jammed, _success,
_rate, _served_ratio, _avg_rate, _sla_ok.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng as streams
from .adversary import attacker_observe, enumerate_jam_actions, train_surrogate_attacker
from .config import PREP_PHASE_NAME, ExperimentConfig, config_hash
from .dqn import (
    DivergenceError,
    QNetwork,
    ReplayBuffer,
    Transition,
    epsilon_at,
    save_qnetwork,
    select_action,
    sync_target,
    train_step_arrays,
)
from .env import SlicingEnv, action_masks, observe_victim
from .sla import SlaWindow, victim_reward, violation_rate

CODE_VERSION = "slicejam-0.1.0"
SUMMARY_SCHEMA = "slicejam-summary/1"
TAIL_SPAN = 2000  # slots averaged for per-phase tail rewards in the summary


@dataclass
class PhaseSpan:
    name: str
    start: int
    end: int  # exclusive, logged-slot indexing
    attacker_active: bool
    victim_learning: bool


@dataclass
class RunResult:
    """Everything a finished run produces, before any files are written."""

    config: ExperimentConfig
    seed: int
    slice_names: tuple[str, ...]
    phase_spans: list[PhaseSpan]
    trace: dict[str, np.ndarray]
    summary: dict
    victim: QNetwork
    victim_frozen: QNetwork | None
    attacker: QNetwork | None
    wall_time: float


def moving_average(x: np.ndarray, span: int) -> np.ndarray:
    """Trailing mean over up to `span` entries, defined from the first slot."""
    n = len(x)
    c = np.concatenate(([0.0], np.cumsum(x, dtype=np.float64)))
    idx = np.arange(1, n + 1)
    start = np.maximum(0, idx - span)
    return (c[idx] - c[start]) / (idx - start)


def run_experiment(
    cfg: ExperimentConfig,
    seed: int | None = None,
    progress: Callable[[str], None] | None = None,
) -> RunResult:
    """Execute all configured phases and compute the run summary."""
    t0 = time.perf_counter()
    if seed is None:
        seed = cfg.seed
    cell = cfg.cell
    k_count = cell.num_slices
    names = tuple(s.name for s in cell.slices)

    victim_masks = action_masks(k_count)
    victim_actions = tuple(range(len(victim_masks)))
    jam_masks = enumerate_jam_actions(cell, cfg.attacker.jam_budget)
    jam_actions = tuple(range(len(jam_masks)))
    no_jam = (0,) * k_count

    victim = QNetwork.initialize(
        [1 + 2 * k_count, *cfg.victim.hidden_sizes, len(victim_masks)],
        streams.substream(seed, streams.VICTIM_INIT),
    )
    victim_target = victim.copy()
    buffer = ReplayBuffer(cfg.victim.buffer_capacity)
    explore_rng = streams.substream(seed, streams.VICTIM_EXPLORE)
    replay_rng = streams.substream(seed, streams.REPLAY_SAMPLING)
    attacker_explore_rng = streams.substream(seed, streams.ATTACKER_EXPLORE)

    env = SlicingEnv(
        cell,
        streams.substream(seed, streams.ARRIVALS),
        streams.substream(seed, streams.WEIGHTS),
    )
    window = SlaWindow(cfg.sla.window_len, cell)

    n_logged = cfg.logged_slots
    tr_reward = np.empty(n_logged)
    tr_phase = np.empty(n_logged, dtype=np.int16)
    tr_active = np.zeros((n_logged, k_count), dtype=np.int8)
    tr_weight = np.zeros((n_logged, k_count))
    tr_scheduled = np.zeros((n_logged, k_count), dtype=np.int8)
    tr_jam_selected = np.zeros((n_logged, k_count), dtype=np.int8)
    tr_jammed = np.zeros((n_logged, k_count), dtype=np.int8)
    tr_success = np.zeros((n_logged, k_count), dtype=np.int8)
    tr_rate = np.zeros((n_logged, k_count))
    tr_served = np.zeros((n_logged, k_count))
    tr_avg_rate = np.zeros((n_logged, k_count))
    tr_sla_ok = np.zeros((n_logged, k_count), dtype=bool)

    state = env.reset()
    prev_state = env.idle_state()
    victim_frozen: QNetwork | None = None
    attacker: QNetwork | None = None
    phase_spans: list[PhaseSpan] = []
    t_logged = 0
    t_learn = 0
    train_count = 0

    for phase in cfg.phases:
        if phase.name == PREP_PHASE_NAME:
            victim_frozen = victim.copy()
            attacker = train_surrogate_attacker(
                victim_frozen,
                cell,
                cfg.attacker.jam_budget,
                phase.slots,
                cfg.attacker.hyperparams,
                arrivals_rng=streams.substream(seed, streams.PREP_ARRIVALS),
                weights_rng=streams.substream(seed, streams.PREP_WEIGHTS),
                init_rng=streams.substream(seed, streams.ATTACKER_INIT),
                explore_rng=streams.substream(seed, streams.PREP_ATTACKER_EXPLORE),
                replay_rng=streams.substream(seed, streams.ATTACKER_REPLAY),
            )
            if progress:
                progress(f"phase {phase.name}: jammer trained over {phase.slots} slots")
            continue

        span = PhaseSpan(
            phase.name,
            t_logged,
            t_logged + phase.slots,
            phase.attacker_active,
            phase.victim_learning,
        )
        phase_spans.append(span)
        logged_phase_idx = len(phase_spans) - 1
        jamming = phase.attacker_active and attacker is not None

        for _ in range(phase.slots):
            obs = observe_victim(state, cell)
            eps = epsilon_at(cfg.victim, t_learn) if phase.victim_learning else 0.0
            a_idx = select_action(victim, obs, eps, victim_actions, explore_rng)

            if jamming:
                jam_obs = attacker_observe(prev_state, cell)
                j_idx = select_action(
                    attacker, jam_obs, 0.0, jam_actions, attacker_explore_rng
                )
                jam_mask = jam_masks[j_idx]
            else:
                jam_mask = no_jam

            next_state, outcome = env.step(state, victim_masks[a_idx], jam_mask)
            window.push_slot(outcome)
            flags = window.sla_flags()
            r = victim_reward(outcome, flags, cfg.sla.penalty, cfg.sla.reward_mode)

            if phase.victim_learning:
                next_obs = observe_victim(next_state, cell)
                buffer.push(Transition(obs, a_idx, r, next_obs, victim_actions))
                if len(buffer) >= cfg.victim.batch_size:
                    # Every stored transition allows the full action set, so
                    # the feasibility mask is skipped on this path.
                    bx, ba, br, bx2, _ = buffer.sample_arrays(
                        cfg.victim.batch_size, replay_rng, gather_feasible=False
                    )
                    try:
                        train_step_arrays(
                            victim,
                            victim_target,
                            bx,
                            ba,
                            br,
                            bx2,
                            None,
                            cfg.victim.learning_rate,
                            cfg.victim.discount,
                            cfg.victim.grad_clip,
                        )
                    except DivergenceError as e:
                        raise DivergenceError(
                            f"training diverged in phase {phase.name!r} "
                            f"at logged slot {t_logged}: {e}"
                        ) from e
                    train_count += 1
                    if train_count % cfg.victim.target_sync_period == 0:
                        sync_target(victim, victim_target)
                t_learn += 1

            tr_reward[t_logged] = r
            tr_phase[t_logged] = logged_phase_idx
            tr_active[t_logged] = outcome.activity
            tr_weight[t_logged] = outcome.weights
            tr_scheduled[t_logged] = outcome.scheduled
            tr_jam_selected[t_logged] = jam_mask
            tr_jammed[t_logged] = outcome.jammed
            tr_success[t_logged] = outcome.success
            tr_rate[t_logged] = outcome.rates
            for k in range(k_count):
                tr_served[t_logged, k] = window.served_ratio(k)
                tr_avg_rate[t_logged, k] = window.avg_rate(k)
                tr_sla_ok[t_logged, k] = flags[k]

            prev_state = state
            state = next_state
            t_logged += 1
        if progress:
            progress(f"phase {phase.name}: {phase.slots} slots logged")

    trace = {
        "reward": tr_reward,
        "phase": tr_phase,
        "active": tr_active,
        "weight": tr_weight,
        "scheduled": tr_scheduled,
        "jam_selected": tr_jam_selected,
        "jammed": tr_jammed,
        "success": tr_success,
        "rate": tr_rate,
        "served_ratio": tr_served,
        "avg_rate": tr_avg_rate,
        "sla_ok": tr_sla_ok,
    }
    summary = _build_summary(cfg, seed, names, phase_spans, trace)
    return RunResult(
        config=cfg,
        seed=seed,
        slice_names=names,
        phase_spans=phase_spans,
        trace=trace,
        summary=summary,
        victim=victim,
        victim_frozen=victim_frozen,
        attacker=attacker,
        wall_time=time.perf_counter() - t0,
    )


def _attack_span(phase_spans: list[PhaseSpan]) -> tuple[int, int] | None:
    starts = [p for p in phase_spans if p.attacker_active]
    if not starts:
        return None
    return starts[0].start, starts[-1].end


def steady_state_rates(
    cfg: ExperimentConfig, span: PhaseSpan, sla_ok: np.ndarray
) -> list[float]:
    """Per-slice violation rate over the tail of a phase (steady state)."""
    tail = max(1, int(round(cfg.steady_state_fraction * (span.end - span.start))))
    start = span.end - tail
    return [
        violation_rate(sla_ok, k, start, span.end, warmup=cfg.sla.window_len)
        for k in range(sla_ok.shape[1])
    ]


def _build_summary(
    cfg: ExperimentConfig,
    seed: int,
    names: tuple[str, ...],
    phase_spans: list[PhaseSpan],
    trace: dict[str, np.ndarray],
) -> dict:
    k_count = len(names)
    sla_ok = trace["sla_ok"]
    reward = trace["reward"]
    span_ma = cfg.reward_ma_span

    steady: dict[str, dict[str, float]] = {}
    for span in phase_spans:
        rates = steady_state_rates(cfg, span, sla_ok)
        steady[span.name] = {names[k]: rates[k] for k in range(k_count)}

    baseline_span = phase_spans[0]
    clean_level = steady[baseline_span.name]

    violation_ma = np.empty_like(sla_ok, dtype=np.float64)
    for k in range(k_count):
        violation_ma[:, k] = moving_average(1.0 - sla_ok[:, k], span_ma)

    attack = _attack_span(phase_spans)
    recovery: dict = {
        "tolerance": cfg.recovery_tolerance,
        "ma_span": span_ma,
        "no_attack_span": attack is None,
        "per_slice": {},
    }
    n = sla_ok.shape[0]
    if attack is not None and attack[1] < n:
        _, attack_end = attack
        for k in range(k_count):
            thr = clean_level[names[k]] + cfg.recovery_tolerance
            post = violation_ma[attack_end:, k]
            bad = np.nonzero(post > thr)[0]
            if len(bad) == 0:
                recovered, slots_after = True, 0
            elif bad[-1] == len(post) - 1:
                recovered, slots_after = False, None
            else:
                recovered, slots_after = True, int(bad[-1] + 1)
            recovery["per_slice"][names[k]] = {
                "recovered": recovered,
                "slots_after_attack": slots_after,
            }
    else:
        for k in range(k_count):
            recovery["per_slice"][names[k]] = {
                "recovered": True,
                "slots_after_attack": 0 if attack is None else None,
            }

    reward_ma = moving_average(reward, span_ma)
    reward_summary: dict = {
        "ma_span": span_ma,
        "tail_span": TAIL_SPAN,
        "by_phase": {},
        "ma_series": [float(v) for v in reward_ma],
    }
    for span in phase_spans:
        tail = min(TAIL_SPAN, span.end - span.start)
        reward_summary["by_phase"][span.name] = {
            "mean": float(np.mean(reward[span.start : span.end])),
            "final_ma": float(reward_ma[span.end - 1]),
            "tail_mean": float(np.mean(reward[span.end - tail : span.end])),
        }

    jam_fraction: dict[str, float] = {}
    if attack is not None:
        a0, a1 = attack
        sel = trace["jam_selected"][a0:a1]
        for k in range(k_count):
            jam_fraction[names[k]] = float(np.mean(sel[:, k]))

    return {
        "schema": SUMMARY_SCHEMA,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "code_version": CODE_VERSION,
        "slice_names": list(names),
        "phases": [
            {
                "name": s.name,
                "start": s.start,
                "end": s.end,
                "slots": s.end - s.start,
                "attacker_active": s.attacker_active,
                "victim_learning": s.victim_learning,
            }
            for s in phase_spans
        ],
        "steady_state_violation_rate": steady,
        "clean_violation_level": clean_level,
        "recovery": recovery,
        "reward": reward_summary,
        "attack_jam_fraction": jam_fraction,
    }


# ---------------------------------------------------------------------------
# File outputs


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def trace_column_names(slice_names: tuple[str, ...]) -> list[str]:
    cols = ["slot", "phase", "reward"]
    for n in slice_names:
        cols += [
            f"{n}_active",
            f"{n}_weight",
            f"{n}_scheduled",
            f"{n}_jam_selected",
            f"{n}_jammed",
            f"{n}_success",
            f"{n}_rate",
            f"{n}_served_ratio",
            f"{n}_avg_rate",
            f"{n}_sla_ok",
        ]
    return cols


def emit_outputs(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write trace.csv, summary.json, figure-data CSVs, and agent snapshots.

    The same result written twice produces byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = result.slice_names
    trace = result.trace
    n = len(trace["reward"])
    phase_names = [s.name for s in result.phase_spans]

    paths: dict[str, Path] = {}

    trace_path = out / "trace.csv"
    with trace_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_column_names(names))
        for t in range(n):
            row: list[str] = [
                str(t),
                phase_names[trace["phase"][t]],
                _fmt(trace["reward"][t]),
            ]
            for k in range(len(names)):
                row += [
                    str(int(trace["active"][t, k])),
                    _fmt(trace["weight"][t, k]),
                    str(int(trace["scheduled"][t, k])),
                    str(int(trace["jam_selected"][t, k])),
                    str(int(trace["jammed"][t, k])),
                    str(int(trace["success"][t, k])),
                    _fmt(trace["rate"][t, k]),
                    _fmt(trace["served_ratio"][t, k]),
                    _fmt(trace["avg_rate"][t, k]),
                    str(int(trace["sla_ok"][t, k])),
                ]
            writer.writerow(row)
    paths["trace"] = trace_path

    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(result.summary, indent=2) + "\n", encoding="utf-8"
    )
    paths["summary"] = summary_path

    # Figure data: steady-state violation bars, recovery curves, reward curve.
    fig1 = out / "fig1_violations.csv"
    steady = result.summary["steady_state_violation_rate"]
    with fig1.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slice"] + [f"{p}_violation_rate" for p in phase_names])
        for name in names:
            writer.writerow([name] + [_fmt(steady[p][name]) for p in phase_names])
    paths["fig1"] = fig1

    span_ma = result.config.reward_ma_span
    fig2 = out / "fig2_recovery.csv"
    with fig2.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot", "phase"] + [f"{n_}_violation_ma" for n_ in names])
        vma = np.column_stack(
            [moving_average(1.0 - trace["sla_ok"][:, k], span_ma) for k in range(len(names))]
        )
        for t in range(n):
            writer.writerow(
                [str(t), phase_names[trace["phase"][t]]]
                + [_fmt(vma[t, k]) for k in range(len(names))]
            )
    paths["fig2"] = fig2

    fig3 = out / "fig3_reward.csv"
    reward_ma = moving_average(trace["reward"], span_ma)
    with fig3.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot", "phase", "reward", "reward_ma"])
        for t in range(n):
            writer.writerow(
                [
                    str(t),
                    phase_names[trace["phase"][t]],
                    _fmt(trace["reward"][t]),
                    _fmt(reward_ma[t]),
                ]
            )
    paths["fig3"] = fig3

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    save_qnetwork(result.victim, snap_dir / "victim_final.json")
    paths["victim_final"] = snap_dir / "victim_final.json"
    if result.victim_frozen is not None:
        save_qnetwork(result.victim_frozen, snap_dir / "victim_frozen_for_attacker.json")
        paths["victim_frozen"] = snap_dir / "victim_frozen_for_attacker.json"
    if result.attacker is not None:
        save_qnetwork(result.attacker, snap_dir / "attacker_final.json")
        paths["attacker_final"] = snap_dir / "attacker_final.json"
    return paths
