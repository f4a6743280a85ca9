"""Double-DQN machinery shared by the scheduler and the jammer.

A small fully connected network maps an observation to one action value per
discrete action. Learning follows the double-Q rule: the online network picks
the next action, the target network prices it. Training is plain SGD on the
mean squared error between the predicted value of the taken action and that
bootstrapped target; backpropagation is written out explicitly so gradients
can be checked against finite differences.

The replay buffer mirrors its transitions into column arrays so the training
hot path can gather batches without restacking Python objects; both the
object view and the array view expose the same FIFO contents.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

SNAPSHOT_FORMAT = "qnetwork/1"


class DivergenceError(RuntimeError):
    """Raised when training produces a non-finite loss or gradient."""


@dataclass(frozen=True)
class Transition:
    """One interaction step stored for replay."""

    obs: np.ndarray
    action_index: int
    reward: float
    next_obs: np.ndarray
    next_feasible: tuple[int, ...]


@dataclass(frozen=True)
class AgentHyperparams:
    """Learning knobs for one DDQN agent.

    epsilon decays linearly from epsilon_start to epsilon_end over
    epsilon_decay_slots learning slots, then stays at the floor. grad_clip
    bounds the global gradient norm per update; 0 disables clipping.
    """

    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.005
    epsilon_decay_slots: int = 15000
    batch_size: int = 128
    buffer_capacity: int = 2000
    target_sync_period: int = 500
    hidden_sizes: tuple[int, ...] = (64,)
    grad_clip: float = 10.0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        for name in ("epsilon_start", "epsilon_end"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.epsilon_decay_slots < 1:
            raise ValueError("epsilon_decay_slots must be >= 1")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        if self.target_sync_period < 1:
            raise ValueError("target_sync_period must be >= 1")
        if self.grad_clip < 0.0:
            raise ValueError(f"grad_clip must be >= 0, got {self.grad_clip}")


def epsilon_at(hp: AgentHyperparams, t: int) -> float:
    """Exploration rate after t learning slots (linear decay, then floor)."""
    if t >= hp.epsilon_decay_slots:
        return hp.epsilon_end
    frac = t / hp.epsilon_decay_slots
    return hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac


class QNetwork:
    """Feed-forward action-value network: ReLU hidden layers, linear output."""

    __slots__ = ("dims", "weights", "biases")

    def __init__(
        self,
        dims: Sequence[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
    ) -> None:
        self.dims = tuple(int(d) for d in dims)
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(cls, dims: Sequence[int], rng: np.random.Generator) -> "QNetwork":
        """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer."""
        if len(dims) < 2:
            raise ValueError("need at least an input and an output dimension")
        weights: list[np.ndarray] = []
        biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(dims, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Action values for a single observation vector."""
        if obs.shape != (self.input_dim,):
            raise ValueError(f"expected obs of shape ({self.input_dim},), got {obs.shape}")
        h = obs
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                np.maximum(h, 0.0, out=h)
        return h

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Action values for a (batch, input_dim) matrix of observations."""
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected (n, {self.input_dim}) batch, got {x.shape}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                np.maximum(h, 0.0, out=h)
        return h

    def copy(self) -> "QNetwork":
        return QNetwork(
            self.dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def params_flat(self) -> np.ndarray:
        """All parameters as one row-major vector (layer by layer, W then b)."""
        parts: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_params_flat(self, flat: np.ndarray) -> None:
        expected = sum(w.size for w in self.weights) + sum(b.size for b in self.biases)
        if flat.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {flat.shape}")
        i = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = flat[i : i + w.size].reshape(w.shape)
            i += w.size
            b[...] = flat[i : i + b.size]
            i += b.size


def forward(net: QNetwork, obs: np.ndarray) -> np.ndarray:
    """Functional alias for a single-observation forward pass."""
    return net.forward(obs)


def greedy_action(net: QNetwork, obs: np.ndarray, feasible: Sequence[int]) -> int:
    """Argmax of the action values restricted to the feasible indices.

    Ties resolve to the lowest action index.
    """
    if len(feasible) == 0:
        raise ValueError("feasible action set is empty")
    feas = sorted(feasible)
    q = net.forward(obs)
    return feas[int(np.argmax(q[feas]))]


def select_action(
    net: QNetwork,
    obs: np.ndarray,
    epsilon: float,
    feasible: Sequence[int],
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy choice over the feasible action indices.

    Exactly one uniform draw is consumed per call (plus one integer draw on
    exploration slots), so stream consumption is predictable.
    """
    if len(feasible) == 0:
        raise ValueError("feasible action set is empty")
    if rng.random() < epsilon:
        feas = sorted(feasible)
        return feas[int(rng.integers(len(feas)))]
    return greedy_action(net, obs, feasible)


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform resampling.

    Transitions are kept both as objects and as parallel column arrays; the
    array view lets training gather batches with fancy indexing instead of
    restacking objects.
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0
        self._obs: np.ndarray | None = None
        self._next_obs: np.ndarray | None = None
        self._actions = np.empty(capacity, dtype=np.intp)
        self._rewards = np.empty(capacity, dtype=np.float64)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        """Append; once full, overwrite the oldest entry."""
        if self._obs is None:
            self._obs = np.empty((self.capacity, len(t.obs)))
            self._next_obs = np.empty((self.capacity, len(t.next_obs)))
        if len(self._items) < self.capacity:
            slot = len(self._items)
            self._items.append(t)
        else:
            slot = self._next
            self._items[slot] = t
            self._next = (self._next + 1) % self.capacity
        self._obs[slot] = t.obs
        self._next_obs[slot] = t.next_obs
        self._actions[slot] = t.action_index
        self._rewards[slot] = t.reward

    def snapshot(self) -> list[Transition]:
        """Stored transitions in insertion order (oldest first)."""
        return self._items[self._next :] + self._items[: self._next]

    def _draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if len(self._items) < n:
            raise ValueError(f"buffer holds {len(self._items)} transitions, need {n}")
        return rng.integers(0, len(self._items), size=n)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sample of n transitions, with replacement."""
        return [self._items[i] for i in self._draw(n, rng)]

    def sample_arrays(
        self, n: int, rng: np.random.Generator, gather_feasible: bool = True
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[tuple[int, ...]] | None]:
        """Array view of a uniform sample: (obs, actions, rewards, next_obs,
        per-row feasible sets). Consumes the generator exactly like sample().
        Callers that push a constant full feasible set can skip the gather.
        """
        idx = self._draw(n, rng)
        feas = [self._items[i].next_feasible for i in idx] if gather_feasible else None
        return (
            self._obs[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_obs[idx],
            feas,
        )


def push_transition(buffer: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buffer.push(t)
    return buffer


def sample_batch(buffer: ReplayBuffer, n: int, rng: np.random.Generator) -> list[Transition]:
    return buffer.sample(n, rng)


def double_q_target(
    online: QNetwork, target: QNetwork, t: Transition, gamma: float
) -> float:
    """Bootstrapped value r + gamma * Q_target(s', argmax_a Q_online(s', a)).

    The argmax runs over the transition's feasible next actions only. The
    task is continuing, so every transition bootstraps.
    """
    a_star = greedy_action(online, t.next_obs, t.next_feasible)
    return t.reward + gamma * float(target.forward(t.next_obs)[a_star])


def _feasible_mask(feasible: Sequence[tuple[int, ...]], n_actions: int) -> np.ndarray | None:
    """Boolean mask of feasible next actions, or None when all rows allow all."""
    full = tuple(range(n_actions))
    if all(f == full for f in feasible):
        return None
    mask = np.zeros((len(feasible), n_actions), dtype=bool)
    for i, f in enumerate(feasible):
        mask[i, list(f)] = True
    return mask


def td_targets_arrays(
    online: QNetwork,
    target: QNetwork,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    mask: np.ndarray | None,
    gamma: float,
) -> np.ndarray:
    """Vectorised double-Q targets; mask=None means every action is feasible."""
    q_online = online.forward_batch(next_obs)
    if mask is not None:
        q_online = np.where(mask, q_online, -np.inf)
    a_star = np.argmax(q_online, axis=1)
    q_target = target.forward_batch(next_obs)
    return rewards + gamma * q_target[np.arange(len(rewards)), a_star]


def td_targets(
    online: QNetwork,
    target: QNetwork,
    batch: Sequence[Transition],
    gamma: float,
) -> np.ndarray:
    """Double-Q targets for a batch of transitions (treated as constants)."""
    if len(batch) == 0:
        raise ValueError("batch is empty")
    rewards = np.fromiter((t.reward for t in batch), dtype=np.float64, count=len(batch))
    next_obs = np.stack([t.next_obs for t in batch])
    mask = _feasible_mask([t.next_feasible for t in batch], online.output_dim)
    return td_targets_arrays(online, target, rewards, next_obs, mask, gamma)


def loss_given_targets(
    net: QNetwork, batch: Sequence[Transition], targets: np.ndarray
) -> float:
    """Mean squared error of the taken actions' values against fixed targets."""
    x = np.stack([t.obs for t in batch])
    actions = [t.action_index for t in batch]
    pred = net.forward_batch(x)[np.arange(len(batch)), actions]
    err = pred - targets
    return float(np.mean(err * err))


def loss_and_grads_arrays(
    net: QNetwork, x: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Loss plus analytic gradients for every weight matrix and bias vector.

    Only the taken action of each sample receives an error signal; all other
    outputs have zero gradient.
    """
    n = x.shape[0]
    acts = [x]
    pres: list[np.ndarray] = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if i < last:
            pres.append(z)
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            out = z

    rows = np.arange(n)
    err = out[rows, actions] - targets
    loss = float(np.mean(err * err))

    d_out = np.zeros_like(out)
    d_out[rows, actions] = 2.0 * err / n

    grad_w: list[np.ndarray] = [np.empty(0)] * len(net.weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(net.biases)
    d = d_out
    for i in range(last, -1, -1):
        grad_w[i] = acts[i].T @ d
        grad_b[i] = d.sum(axis=0)
        if i > 0:
            d = (d @ net.weights[i].T) * (pres[i - 1] > 0.0)
    return loss, grad_w, grad_b


def loss_and_grads(
    net: QNetwork, batch: Sequence[Transition], targets: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    x = np.stack([t.obs for t in batch])
    actions = np.fromiter((t.action_index for t in batch), dtype=np.intp, count=len(batch))
    return loss_and_grads_arrays(net, x, actions, targets)


def apply_gradients(
    net: QNetwork,
    grad_w: list[np.ndarray],
    grad_b: list[np.ndarray],
    alpha: float,
    grad_clip: float,
) -> None:
    """One SGD step, optionally clipping the global gradient norm first."""
    sq = 0.0
    for g in grad_w:
        sq += float(np.dot(g.ravel(), g.ravel()))
    for g in grad_b:
        sq += float(np.dot(g, g))
    norm = math.sqrt(sq)
    if not math.isfinite(norm):
        raise DivergenceError("non-finite gradient")
    scale = alpha
    if grad_clip > 0.0 and norm > grad_clip:
        scale = alpha * grad_clip / norm
    for w, g in zip(net.weights, grad_w):
        w -= scale * g
    for b, g in zip(net.biases, grad_b):
        b -= scale * g


def train_step_arrays(
    online: QNetwork,
    target: QNetwork,
    x: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    mask: np.ndarray | None,
    alpha: float,
    gamma: float,
    grad_clip: float = 0.0,
) -> float:
    """Array fast path of train_step; mask=None means all actions feasible."""
    targets = td_targets_arrays(online, target, rewards, next_obs, mask, gamma)
    loss, grad_w, grad_b = loss_and_grads_arrays(online, x, actions, targets)
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite training loss: {loss}")
    apply_gradients(online, grad_w, grad_b, alpha, grad_clip)
    return loss


def train_step(
    online: QNetwork,
    target: QNetwork,
    batch: Sequence[Transition],
    alpha: float,
    gamma: float,
    grad_clip: float = 0.0,
) -> float:
    """One SGD step of the online network toward its double-Q targets.

    Returns the pre-step loss. Raises DivergenceError on a non-finite loss
    or gradient, which callers treat as a training failure.
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    x = np.stack([t.obs for t in batch])
    actions = np.fromiter((t.action_index for t in batch), dtype=np.intp, count=len(batch))
    rewards = np.fromiter((t.reward for t in batch), dtype=np.float64, count=len(batch))
    next_obs = np.stack([t.next_obs for t in batch])
    mask = _feasible_mask([t.next_feasible for t in batch], online.output_dim)
    return train_step_arrays(
        online, target, x, actions, rewards, next_obs, mask, alpha, gamma, grad_clip
    )


def sync_target(online: QNetwork, target: QNetwork) -> QNetwork:
    """Hard-copy the online parameters into the target network."""
    if online.dims != target.dims:
        raise ValueError(f"architecture mismatch: {online.dims} vs {target.dims}")
    for tw, ow in zip(target.weights, online.weights):
        tw[...] = ow
    for tb, ob in zip(target.biases, online.biases):
        tb[...] = ob
    return target


def save_qnetwork(net: QNetwork, path: str | Path) -> None:
    """Write a versioned snapshot: layer dims plus flat row-major parameters."""
    payload = {
        "format": SNAPSHOT_FORMAT,
        "dims": list(net.dims),
        "params": [float(v) for v in net.params_flat()],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_qnetwork(path: str | Path) -> QNetwork:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"unsupported snapshot format: {payload.get('format')!r}")
    dims = [int(d) for d in payload["dims"]]
    net = QNetwork.initialize(dims, np.random.default_rng(0))
    net.set_params_flat(np.asarray(payload["params"], dtype=np.float64))
    return net


def qnetwork_digest(net: QNetwork) -> str:
    """Stable content hash of the architecture and parameters."""
    h = hashlib.sha256()
    h.update(repr(net.dims).encode())
    h.update(net.params_flat().tobytes())
    return h.hexdigest()
