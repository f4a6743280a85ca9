"""Experiment configuration: defaults, flat key-value parsing, validation.

The config file format is plain text, one `section.key = value` pair per
line, `#` comments allowed. Every key has a default, so an empty file is the
standard experiment; unknown keys are rejected. Slices and phases are
indexed (`slice.0.arrival_prob`, `phase.2.slots`); `slices.count` and
`phases.count` grow or truncate the lists, and any slice or phase beyond the
defaults must spell out all of its fields.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .adversary import AttackerConfig
from .dqn import AgentHyperparams
from .env import CellConfig, FixedWeight, SliceConfig, UniformWeight
from .sla import RewardMode

PREP_PHASE_NAME = "attacker-prep"


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


@dataclass(frozen=True)
class PhaseConfig:
    """One experiment phase.

    The phase named "attacker-prep" is special: the scheduler is frozen, the
    jammer trains in a sandboxed copy of the environment, and nothing is
    logged. All other phases run and log the main environment.
    """

    name: str
    slots: int
    attacker_active: bool
    victim_learning: bool

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ConfigError(f"phase {self.name!r}: slots must be >= 1, got {self.slots}")


@dataclass(frozen=True)
class SlaSettings:
    window_len: int
    penalty: float
    reward_mode: RewardMode

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise ConfigError(f"sla.window must be >= 1, got {self.window_len}")
        if self.penalty < 0.0:
            raise ConfigError(f"sla.lambda must be >= 0, got {self.penalty}")
        if self.reward_mode not in ("sla_aware", "sla_unaware"):
            raise ConfigError(
                f"sla.reward_mode must be sla_aware or sla_unaware, got {self.reward_mode!r}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    cell: CellConfig
    sla: SlaSettings
    victim: AgentHyperparams
    attacker: AttackerConfig
    phases: tuple[PhaseConfig, ...]
    seed: int = 0
    output_dir: str = "out"
    steady_state_fraction: float = 0.2
    reward_ma_span: int = 500
    recovery_tolerance: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.steady_state_fraction <= 1.0:
            raise ConfigError(
                f"run.steady_state_fraction must lie in (0, 1], got {self.steady_state_fraction}"
            )
        if self.reward_ma_span < 1:
            raise ConfigError(f"run.reward_ma_span must be >= 1, got {self.reward_ma_span}")
        if self.recovery_tolerance < 0.0:
            raise ConfigError(
                f"run.recovery_tolerance must be >= 0, got {self.recovery_tolerance}"
            )
        # The attacker may only act in logged phases after its training phase.
        prep_seen = False
        attack_names: list[str] = []
        for p in self.phases:
            if p.name == PREP_PHASE_NAME:
                prep_seen = True
            elif p.attacker_active:
                attack_names.append(p.name)
                if not prep_seen:
                    raise ConfigError(
                        f"phase {p.name!r} activates the attacker before any "
                        f"{PREP_PHASE_NAME!r} phase has trained one"
                    )
        # Attack phases must form one contiguous span among logged phases.
        logged = [p for p in self.phases if p.name != PREP_PHASE_NAME]
        flags = [p.attacker_active for p in logged]
        spans = 0
        prev = False
        for f in flags:
            if f and not prev:
                spans += 1
            prev = f
        if spans > 1:
            raise ConfigError("attacker-active phases must form one contiguous span")
        names = [p.name for p in self.phases]
        if len(set(names)) != len(names):
            raise ConfigError(f"phase names must be unique, got {names}")

    @property
    def logged_phases(self) -> tuple[PhaseConfig, ...]:
        return tuple(p for p in self.phases if p.name != PREP_PHASE_NAME)

    @property
    def logged_slots(self) -> int:
        return sum(p.slots for p in self.logged_phases)


RATE_CONSTANT = 12.59e6

_DEFAULT_SLICE_FIELDS = (
    # name, arrival_prob, rb_demand, min_served_ratio, weight
    ("eMBB", 0.6, 5, 0.85, 0.6),
    ("URLLC", 0.4, 3, 0.95, 0.4),
    ("mMTC", 0.3, 1, 0.80, 0.3),
)

_DEFAULT_PHASES = (
    ("clean", 30000, False, True),
    (PREP_PHASE_NAME, 20000, True, False),
    ("attack", 30000, True, True),
    ("recovery", 30000, False, True),
)


def default_config() -> ExperimentConfig:
    """The standard three-slice experiment with the full phase protocol."""
    slices = tuple(
        SliceConfig(
            name=name,
            arrival_prob=p,
            rb_demand=f,
            min_rate=0.8 * RATE_CONSTANT * f,
            min_served_ratio=rho,
            weight_law=FixedWeight(w),
            snr_linear=10.0,
        )
        for name, p, f, rho, w in _DEFAULT_SLICE_FIELDS
    )
    cell = CellConfig(total_rbs=11, rate_constant=RATE_CONSTANT, slices=slices)
    phases = tuple(PhaseConfig(*p) for p in _DEFAULT_PHASES)
    victim = AgentHyperparams(grad_clip=2.0)
    # The jammer keeps exploring at its floor (its training phase never needs
    # a near-greedy policy) and remembers its whole training history, which
    # its small action-value gaps require.
    attacker_hp = AgentHyperparams(
        epsilon_end=0.2, epsilon_decay_slots=10000, buffer_capacity=20000
    )
    attacker = AttackerConfig(
        jam_budget=5,
        enabled_phases=frozenset(p.name for p in phases if p.attacker_active),
        hyperparams=attacker_hp,
    )
    return ExperimentConfig(
        cell=cell,
        sla=SlaSettings(window_len=20, penalty=2.0, reward_mode="sla_aware"),
        victim=victim,
        attacker=attacker,
        phases=phases,
    )


# ---------------------------------------------------------------------------
# Flat key-value parsing


def _parse_scalar(key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return raw
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(f"unknown kind {kind}")


# key pattern -> value kind
_SCHEMA: dict[str, str] = {
    "cell.total_rbs": "int",
    "cell.rate_constant": "float",
    "slices.count": "int",
    "slice.*.name": "str",
    "slice.*.arrival_prob": "float",
    "slice.*.rb_demand": "int",
    "slice.*.min_rate": "float",
    "slice.*.min_served_ratio": "float",
    "slice.*.weight": "float",
    "slice.*.weight_min": "float",
    "slice.*.weight_max": "float",
    "slice.*.snr_linear": "float",
    "sla.window": "int",
    "sla.lambda": "float",
    "sla.reward_mode": "str",
    "victim.learning_rate": "float",
    "victim.discount": "float",
    "victim.epsilon_start": "float",
    "victim.epsilon_end": "float",
    "victim.epsilon_decay_slots": "int",
    "victim.batch_size": "int",
    "victim.buffer_capacity": "int",
    "victim.target_sync_period": "int",
    "victim.hidden_sizes": "ints",
    "victim.grad_clip": "float",
    "attacker.jam_budget": "int",
    "attacker.learning_rate": "float",
    "attacker.discount": "float",
    "attacker.epsilon_start": "float",
    "attacker.epsilon_end": "float",
    "attacker.epsilon_decay_slots": "int",
    "attacker.batch_size": "int",
    "attacker.buffer_capacity": "int",
    "attacker.target_sync_period": "int",
    "attacker.hidden_sizes": "ints",
    "attacker.grad_clip": "float",
    "phases.count": "int",
    "phase.*.name": "str",
    "phase.*.slots": "int",
    "phase.*.attacker_active": "bool",
    "phase.*.victim_learning": "bool",
    "run.seed": "int",
    "run.output_dir": "str",
    "run.steady_state_fraction": "float",
    "run.reward_ma_span": "int",
    "run.recovery_tolerance": "float",
}

_INDEXED = re.compile(r"^(slice|phase)\.(\d+)\.(\w+)$")


def _schema_kind(key: str) -> str:
    if key in _SCHEMA:
        return _SCHEMA[key]
    m = _INDEXED.match(key)
    if m:
        pattern = f"{m.group(1)}.*.{m.group(3)}"
        if pattern in _SCHEMA:
            return _SCHEMA[pattern]
    raise ConfigError(f"unknown config key: {key}")


def parse_config_text(text: str) -> dict[str, object]:
    """Parse flat key=value text into a typed dict; rejects unknown keys."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        kind = _schema_kind(key)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        values[key] = _parse_scalar(key, raw, kind)
    return values


def _hp_from(values: dict[str, object], prefix: str, base: AgentHyperparams) -> AgentHyperparams:
    kwargs = {}
    for fname in (
        "learning_rate",
        "discount",
        "epsilon_start",
        "epsilon_end",
        "epsilon_decay_slots",
        "batch_size",
        "buffer_capacity",
        "target_sync_period",
        "hidden_sizes",
        "grad_clip",
    ):
        key = f"{prefix}.{fname}"
        if key in values:
            kwargs[fname] = values[key]
    try:
        return replace(base, **kwargs) if kwargs else base
    except ValueError as e:
        raise ConfigError(f"{prefix}: {e}") from None


def _slices_from(values: dict[str, object], defaults: tuple[SliceConfig, ...], rate_constant: float):
    indices = [
        int(m.group(2))
        for m in (_INDEXED.match(k) for k in values)
        if m and m.group(1) == "slice"
    ]
    count = values.get("slices.count", max([len(defaults)] + [i + 1 for i in indices]))
    if not isinstance(count, int) or count < 1:
        raise ConfigError(f"slices.count must be >= 1, got {count}")
    for i in indices:
        if i >= count:
            raise ConfigError(f"slice.{i}.* given but slices.count = {count}")

    slices = []
    for i in range(count):
        base = defaults[i] if i < len(defaults) else None
        get = lambda f, d=None: values.get(f"slice.{i}.{f}", d)
        required = ("name", "arrival_prob", "rb_demand", "min_served_ratio")
        if base is None:
            for f in required:
                if get(f) is None:
                    raise ConfigError(f"slice.{i}.{f} is required for added slices")
            if get("weight") is None and get("weight_min") is None:
                raise ConfigError(f"slice.{i} needs weight or weight_min/weight_max")

        w_fixed = get("weight")
        w_min, w_max = get("weight_min"), get("weight_max")
        if w_fixed is not None and (w_min is not None or w_max is not None):
            raise ConfigError(f"slice.{i}: give weight or weight_min/weight_max, not both")
        if (w_min is None) != (w_max is None):
            raise ConfigError(f"slice.{i}: weight_min and weight_max must come together")
        if w_fixed is not None:
            law: FixedWeight | UniformWeight = FixedWeight(w_fixed)
        elif w_min is not None:
            law = UniformWeight(w_min, w_max)
        else:
            law = base.weight_law

        rb_demand = get("rb_demand", base.rb_demand if base else None)
        min_rate = get("min_rate")
        if min_rate is None:
            # Default rule: 80% of the slice's nominal clean capacity.
            min_rate = 0.8 * rate_constant * rb_demand
        try:
            slices.append(
                SliceConfig(
                    name=get("name", base.name if base else None),
                    arrival_prob=get("arrival_prob", base.arrival_prob if base else None),
                    rb_demand=rb_demand,
                    min_rate=min_rate,
                    min_served_ratio=get(
                        "min_served_ratio", base.min_served_ratio if base else None
                    ),
                    weight_law=law,
                    snr_linear=get("snr_linear", base.snr_linear if base else 10.0),
                )
            )
        except ValueError as e:
            raise ConfigError(f"slice.{i}: {e}") from None
    return tuple(slices)


def _phases_from(values: dict[str, object], defaults: tuple[PhaseConfig, ...]):
    indices = [
        int(m.group(2))
        for m in (_INDEXED.match(k) for k in values)
        if m and m.group(1) == "phase"
    ]
    count = values.get("phases.count", max([len(defaults)] + [i + 1 for i in indices]))
    if not isinstance(count, int) or count < 1:
        raise ConfigError(f"phases.count must be >= 1, got {count}")
    for i in indices:
        if i >= count:
            raise ConfigError(f"phase.{i}.* given but phases.count = {count}")
    phases = []
    for i in range(count):
        base = defaults[i] if i < len(defaults) else None
        get = lambda f, d=None: values.get(f"phase.{i}.{f}", d)
        if base is None:
            for f in ("name", "slots", "attacker_active", "victim_learning"):
                if get(f) is None:
                    raise ConfigError(f"phase.{i}.{f} is required for added phases")
        phases.append(
            PhaseConfig(
                name=get("name", base.name if base else None),
                slots=get("slots", base.slots if base else None),
                attacker_active=get(
                    "attacker_active", base.attacker_active if base else None
                ),
                victim_learning=get(
                    "victim_learning", base.victim_learning if base else None
                ),
            )
        )
    return tuple(phases)


def config_from_values(values: dict[str, object]) -> ExperimentConfig:
    """Build the effective config: defaults overridden by parsed values."""
    base = default_config()
    rate_constant = values.get("cell.rate_constant", base.cell.rate_constant)
    slices = _slices_from(values, base.cell.slices, rate_constant)
    try:
        cell = CellConfig(
            total_rbs=values.get("cell.total_rbs", base.cell.total_rbs),
            rate_constant=rate_constant,
            slices=slices,
        )
    except ValueError as e:
        raise ConfigError(f"cell: {e}") from None
    sla = SlaSettings(
        window_len=values.get("sla.window", base.sla.window_len),
        penalty=values.get("sla.lambda", base.sla.penalty),
        reward_mode=values.get("sla.reward_mode", base.sla.reward_mode),
    )
    victim = _hp_from(values, "victim", base.victim)
    attacker_hp = _hp_from(values, "attacker", base.attacker.hyperparams)
    phases = _phases_from(values, base.phases)
    attacker = AttackerConfig(
        jam_budget=values.get("attacker.jam_budget", base.attacker.jam_budget),
        enabled_phases=frozenset(p.name for p in phases if p.attacker_active),
        hyperparams=attacker_hp,
    )
    cfg = ExperimentConfig(
        cell=cell,
        sla=sla,
        victim=victim,
        attacker=attacker,
        phases=phases,
        seed=values.get("run.seed", base.seed),
        output_dir=values.get("run.output_dir", base.output_dir),
        steady_state_fraction=values.get(
            "run.steady_state_fraction", base.steady_state_fraction
        ),
        reward_ma_span=values.get("run.reward_ma_span", base.reward_ma_span),
        recovery_tolerance=values.get("run.recovery_tolerance", base.recovery_tolerance),
    )
    attacker.validate_against(cell)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read, parse, and validate a config file. Empty file means defaults."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return config_from_values(parse_config_text(p.read_text(encoding="utf-8")))


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical flat-text rendering of an effective config.

    Re-parsing the output reproduces the config, and the text doubles as the
    input to the run's config hash.
    """
    lines = [
        "# slicejam experiment configuration (flat key = value, # comments)",
        f"cell.total_rbs = {cfg.cell.total_rbs}",
        f"cell.rate_constant = {cfg.cell.rate_constant!r}",
        f"slices.count = {cfg.cell.num_slices}",
    ]
    for i, s in enumerate(cfg.cell.slices):
        lines.append(f"slice.{i}.name = {s.name}")
        lines.append(f"slice.{i}.arrival_prob = {s.arrival_prob!r}")
        lines.append(f"slice.{i}.rb_demand = {s.rb_demand}")
        lines.append(f"slice.{i}.min_rate = {s.min_rate!r}")
        lines.append(f"slice.{i}.min_served_ratio = {s.min_served_ratio!r}")
        if isinstance(s.weight_law, FixedWeight):
            lines.append(f"slice.{i}.weight = {s.weight_law.value!r}")
        else:
            lines.append(f"slice.{i}.weight_min = {s.weight_law.low!r}")
            lines.append(f"slice.{i}.weight_max = {s.weight_law.high!r}")
        lines.append(f"slice.{i}.snr_linear = {s.snr_linear!r}")
    lines.append(f"sla.window = {cfg.sla.window_len}")
    lines.append(f"sla.lambda = {cfg.sla.penalty!r}")
    lines.append(f"sla.reward_mode = {cfg.sla.reward_mode}")
    for prefix, hp in (("victim", cfg.victim), ("attacker", cfg.attacker.hyperparams)):
        lines.append(f"{prefix}.learning_rate = {hp.learning_rate!r}")
        lines.append(f"{prefix}.discount = {hp.discount!r}")
        lines.append(f"{prefix}.epsilon_start = {hp.epsilon_start!r}")
        lines.append(f"{prefix}.epsilon_end = {hp.epsilon_end!r}")
        lines.append(f"{prefix}.epsilon_decay_slots = {hp.epsilon_decay_slots}")
        lines.append(f"{prefix}.batch_size = {hp.batch_size}")
        lines.append(f"{prefix}.buffer_capacity = {hp.buffer_capacity}")
        lines.append(f"{prefix}.target_sync_period = {hp.target_sync_period}")
        lines.append(f"{prefix}.hidden_sizes = {','.join(str(h) for h in hp.hidden_sizes)}")
        lines.append(f"{prefix}.grad_clip = {hp.grad_clip!r}")
    lines.append(f"attacker.jam_budget = {cfg.attacker.jam_budget}")
    lines.append(f"phases.count = {len(cfg.phases)}")
    for i, p in enumerate(cfg.phases):
        lines.append(f"phase.{i}.name = {p.name}")
        lines.append(f"phase.{i}.slots = {p.slots}")
        lines.append(f"phase.{i}.attacker_active = {str(p.attacker_active).lower()}")
        lines.append(f"phase.{i}.victim_learning = {str(p.victim_learning).lower()}")
    lines.append(f"run.seed = {cfg.seed}")
    lines.append(f"run.output_dir = {cfg.output_dir}")
    lines.append(f"run.steady_state_fraction = {cfg.steady_state_fraction!r}")
    lines.append(f"run.reward_ma_span = {cfg.reward_ma_span}")
    lines.append(f"run.recovery_tolerance = {cfg.recovery_tolerance!r}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the canonical rendering, excluding seed and output location.

    Two runs share a hash iff their behaviour-relevant settings agree, so the
    seed and output_dir lines are dropped before hashing.
    """
    lines = [
        ln
        for ln in render_config(cfg).splitlines()
        if not ln.startswith(("run.seed", "run.output_dir"))
    ]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
