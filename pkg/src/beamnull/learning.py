"""Per-beam reinforcement learning: power-signature user clustering,
the phase-configuration state/action space, the two-sided binary
reward, and the training loop for a single codebook beam.

Each beam has its own agent.  An agent never sees channels or other
base stations; its environment hands it scalar received powers only.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .beams import Codebook, PhaseSet, QuantizedBeam, beam_training_select
from .kernels import net_forward, net_td_step


# ---------------------------------------------------------------------------
# user clustering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UserCluster:
    cluster_id: int
    member_indices: tuple[int, ...]
    channels: np.ndarray          # (members, M)

    def __post_init__(self):
        if len(self.member_indices) < 1:
            raise ValueError("clusters must be nonempty")

    @property
    def centroid_channel(self) -> np.ndarray:
        return self.channels.mean(axis=0)


def _power_signatures(channels: np.ndarray, sensing: Codebook) -> np.ndarray:
    feats = np.abs(channels.conj() @ sensing.matrix.T) ** 2
    totals = feats.sum(axis=1, keepdims=True)
    totals[totals == 0.0] = 1.0
    return feats / totals


def _kmeans(features: np.ndarray, k: int, rng: np.random.Generator,
            iters: int = 100) -> np.ndarray:
    n = features.shape[0]
    # k-means++ seeding
    centers = np.empty((k, features.shape[1]))
    centers[0] = features[rng.integers(n)]
    d2 = np.sum((features - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = features[rng.integers(n)]
        else:
            centers[j] = features[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((features - centers[j]) ** 2, axis=1))

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        dists = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(dists, axis=1)
        # repair empties by pulling the farthest member out of the largest cluster
        for j in range(k):
            if not np.any(new_assign == j):
                counts = np.bincount(new_assign, minlength=k)
                big = int(np.argmax(counts))
                members = np.flatnonzero(new_assign == big)
                far = members[np.argmax(dists[members, big])]
                new_assign[far] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centers[j] = features[assign == j].mean(axis=0)
    return assign


def cluster_users(channels: np.ndarray, n: int, sensing_codebook: Codebook,
                  rng: np.random.Generator) -> list[UserCluster]:
    """Partition users into N groups by k-means over their normalized
    power signatures across the sensing codebook."""
    channels = np.asarray(channels)
    if channels.shape[0] < n:
        raise ValueError(
            f"cannot form {n} clusters from {channels.shape[0]} users")
    if n == 1:
        return [UserCluster(0, tuple(range(channels.shape[0])), channels.copy())]
    feats = _power_signatures(channels, sensing_codebook)
    assign = _kmeans(feats, n, rng)
    clusters = []
    for j in range(n):
        members = tuple(int(i) for i in np.flatnonzero(assign == j))
        clusters.append(UserCluster(j, members, channels[list(members)].copy()))
    return clusters


# ---------------------------------------------------------------------------
# state / action space
# ---------------------------------------------------------------------------

def num_actions(m: int) -> int:
    return 2 * m


def apply_action(state: np.ndarray, action: int, levels: int) -> np.ndarray:
    """Single-antenna phase step: action 2k increments antenna k's phase
    index, action 2k+1 decrements it, both modulo the level count."""
    m = state.size
    if not 0 <= action < 2 * m:
        raise ValueError(f"action must be in [0, {2 * m}), got {action}")
    antenna, direction = divmod(action, 2)
    new = state.copy()
    step = 1 if direction == 0 else -1
    new[antenna] = (new[antenna] + step) % levels
    return new


# ---------------------------------------------------------------------------
# reward
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RewardRecord:
    reward: int                    # +1 or -1
    gain: float
    interference: float
    ratio: float                   # gain / interference, logged only

    def __post_init__(self):
        if self.reward not in (+1, -1):
            raise ValueError(f"reward must be +1 or -1, got {self.reward}")


def compute_reward(current: tuple[float, float], previous: tuple[float, float],
                   mode: str = "joint") -> RewardRecord:
    """Binary reward for a beam update.

    joint: +1 only when the interference estimate strictly decreased
    AND the cluster gain strictly increased; otherwise -1.
    ratio: +1 when gain/interference strictly increased (less stable;
    off by default).
    """
    gain, interference = current
    prev_gain, prev_interference = previous
    ratio = gain / interference if interference > 0 else math.inf
    if mode == "joint":
        good = interference < prev_interference and gain > prev_gain
    elif mode == "ratio":
        prev_ratio = prev_gain / prev_interference if prev_interference > 0 \
            else math.inf
        good = ratio > prev_ratio
    else:
        raise ValueError(f"unknown reward mode {mode!r}")
    return RewardRecord(reward=+1 if good else -1, gain=gain,
                        interference=interference, ratio=ratio)


# ---------------------------------------------------------------------------
# value estimators
# ---------------------------------------------------------------------------

class MlpValueNet:
    """Two-hidden-layer ReLU action-value network over one-hot-by-antenna
    phase encodings, trained by stochastic one-step TD."""

    def __init__(self, m: int, bits: int, rng: np.random.Generator,
                 hidden: int | None = None, lr: float = 0.01):
        levels = 2 ** bits
        hidden = hidden if hidden is not None else 2 * m
        actions = num_actions(m)
        in_rows = m * levels
        self.m = m
        self.levels = levels
        self.lr = lr
        self.offsets = (np.arange(m) * levels).astype(np.int64)
        s1 = math.sqrt(2.0 / m)          # m active rows feed each unit
        s2 = math.sqrt(2.0 / hidden)
        self.w1 = rng.normal(0.0, s1, size=(in_rows, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.normal(0.0, s2, size=(hidden, hidden))
        self.b2 = np.zeros(hidden)
        self.w3 = rng.normal(0.0, s2, size=(hidden, actions))
        self.b3 = np.zeros(actions)

    def q_values(self, state: np.ndarray) -> np.ndarray:
        batch = state.reshape(1, -1).astype(np.int64)
        return net_forward(batch, self.w1, self.b1, self.w2, self.b2,
                           self.w3, self.b3, self.offsets)[0]

    def q_batch(self, states: np.ndarray) -> np.ndarray:
        return net_forward(states.astype(np.int64), self.w1, self.b1,
                           self.w2, self.b2, self.w3, self.b3, self.offsets)

    def td_update(self, states, actions, rewards, next_states,
                  discount: float) -> float:
        targets = rewards + discount * self.q_batch(next_states).max(axis=1)
        return net_td_step(states.astype(np.int64),
                           actions.astype(np.int64), targets,
                           self.w1, self.b1, self.w2, self.b2,
                           self.w3, self.b3, self.offsets, self.lr)


class TabularValueNet:
    """Exact Q-table for small instances (state count (2^r)^M)."""

    MAX_STATES = 1 << 16

    def __init__(self, m: int, bits: int, rng: np.random.Generator | None = None,
                 lr: float = 0.1):
        levels = 2 ** bits
        states = levels ** m
        if states > self.MAX_STATES:
            raise ValueError(
                f"state space {states} too large for a table; use the MLP")
        self.m = m
        self.levels = levels
        self.lr = lr
        self.table = np.zeros((states, num_actions(m)))
        self._radix = (levels ** np.arange(m)).astype(np.int64)

    def encode(self, state: np.ndarray) -> int:
        return int(state @ self._radix)

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.table[self.encode(state)]

    def q_batch(self, states: np.ndarray) -> np.ndarray:
        return self.table[states @ self._radix]

    def td_update(self, states, actions, rewards, next_states,
                  discount: float) -> float:
        s = states @ self._radix
        ns = next_states @ self._radix
        targets = rewards + discount * self.table[ns].max(axis=1)
        err = self.table[s, actions] - targets
        np.subtract.at(self.table, (s, actions), self.lr * err)
        return float(np.mean(err**2))


def make_value_estimator(kind: str, m: int, bits: int,
                         rng: np.random.Generator, lr: float,
                         hidden: int | None = None):
    if kind == "auto":
        kind = "tabular" if (m <= 6 and bits <= 2) else "mlp"
    if kind == "tabular":
        return TabularValueNet(m, bits, rng, lr=max(lr, 0.1))
    if kind == "mlp":
        return MlpValueNet(m, bits, rng, hidden=hidden, lr=lr)
    raise ValueError(f"unknown value estimator {kind!r}")


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------

class ReplayBuffer:
    def __init__(self, capacity: int, m: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, m), dtype=np.int64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, m), dtype=np.int64)
        self.size = 0
        self._head = 0

    def push(self, s, a, r, s_next):
        i = self._head
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        pick = rng.integers(0, self.size, size=batch)
        return (self.states[pick], self.actions[pick], self.rewards[pick],
                self.next_states[pick])


# ---------------------------------------------------------------------------
# the per-beam agent
# ---------------------------------------------------------------------------

@dataclass
class BestRecord:
    phase_indices: np.ndarray
    gain: float
    interference: float


@dataclass
class StepRecord:
    step: int
    action: int
    reward: int
    gain: float
    interference: float
    epsilon: float
    best_gain: float
    best_interference: float
    raw_gain: float


@dataclass
class AgentConfig:
    budget: int
    p_measurements: int = 10
    q_measurements: int = 10
    gain_subsample: int = 4
    discount: float = 0.5
    learning_rate: float = 0.01
    eps_start: float = 1.0
    eps_end: float = 0.05
    replay_capacity: int = 2048
    batch_size: int = 32
    reward_mode: str = "joint"
    value_estimator: str = "auto"
    hidden: int | None = None
    noise_power: float = 0.0


class BeamAgent:
    """Learns one codebook beam from scalar power feedback.

    The environment is injected as two callables, so the agent is
    structurally unable to read anything but received powers:

    * ``interference_sampler(w_vec, n, rng) -> n powers``
    * ``cache`` (optional) with ``lookup(key)`` / ``append(key, samples)``
    """

    def __init__(self, cluster: UserCluster, phase_set: PhaseSet,
                 initial_state: np.ndarray, cfg: AgentConfig,
                 interference_sampler, rng: np.random.Generator,
                 cache=None, cache_mode: str = "off",
                 measurement_log: list | None = None):
        self.cluster = cluster
        self.phase_set = phase_set
        self.cfg = cfg
        self.sampler = interference_sampler
        self.rng = rng
        self.cache = cache
        self.cache_mode = cache_mode if cache is not None else "off"
        self.measurement_log = measurement_log

        self.state = np.asarray(initial_state, dtype=np.int64).copy()
        self.initial_state = self.state.copy()
        self.m = self.state.size
        self.value_net = make_value_estimator(
            cfg.value_estimator, self.m, phase_set.bits, rng,
            cfg.learning_rate, cfg.hidden)
        self.replay = ReplayBuffer(cfg.replay_capacity, self.m)
        self.step_count = 0
        # seeded by the first positive-reward step; falls back to the
        # initial beam if no step ever earns one
        self.best: BestRecord | None = None
        self._prev: tuple[float, float] | None = None
        self.log: list[StepRecord] = []

        # the initial beam is measured once and becomes the comparison
        # baseline; no reward is emitted for it
        gain, interference, raw = self._measure(self.state)
        self._prev = (gain, interference)
        self.log.append(StepRecord(
            step=0, action=-1, reward=0, gain=gain, interference=interference,
            epsilon=self.epsilon(), best_gain=gain, best_interference=interference,
            raw_gain=raw))
        self.step_count = 1

    def epsilon(self) -> float:
        cfg = self.cfg
        half = max(1, cfg.budget // 2)
        frac = min(1.0, self.step_count / half)
        return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac

    def _beam_vector(self, state: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.phase_set.values[state]) / math.sqrt(self.m)

    def _log_measurement(self, key: bytes, kind: str, samples: np.ndarray):
        if self.measurement_log is not None:
            self.measurement_log.append(
                (self.step_count, key.hex(), kind, samples))

    def _measure(self, state: np.ndarray) -> tuple[float, float, float]:
        """Measurement bursts for a beam: interference-only first, then
        per-user signal+interference; returns (clamped cluster gain,
        interference estimate, raw cluster gain)."""
        cfg = self.cfg
        w = self._beam_vector(state)
        key = state.tobytes()

        fresh_needed = cfg.p_measurements
        cached = np.empty(0)
        if self.cache is not None and self.cache_mode != "off":
            cached = self.cache.lookup(key)
            if self.cache_mode == "top-up":
                fresh_needed = max(0, cfg.p_measurements - cached.size)
            elif cached.size >= cfg.p_measurements:
                fresh_needed = 0
        fresh = (self.sampler(w, fresh_needed, self.rng)
                 if fresh_needed > 0 else np.empty(0))
        if cfg.noise_power > 0.0 and fresh.size:
            fresh = fresh + self.rng.exponential(cfg.noise_power, fresh.size)
        if self.cache is not None and fresh.size:
            self.cache.append(key, fresh)
        interference_samples = np.concatenate([cached, fresh]) \
            if cached.size else fresh
        self._log_measurement(key, "I", fresh)
        mean_i = float(np.mean(interference_samples))

        n_users = len(self.cluster.member_indices)
        n_sub = min(cfg.gain_subsample, n_users)
        if n_sub < n_users:
            pick = self.rng.choice(n_users, size=n_sub, replace=False)
        else:
            pick = np.arange(n_users)

        q = cfg.q_measurements
        signals = np.abs(self.cluster.channels[pick].conj() @ w) ** 2
        interf_block = self.sampler(w, n_sub * q, self.rng).reshape(n_sub, q)
        if cfg.noise_power > 0.0:
            interf_block = interf_block + self.rng.exponential(
                cfg.noise_power, interf_block.shape)
        si_block = signals[:, None] + interf_block
        if self.measurement_log is not None:
            for row in si_block:
                self._log_measurement(key, "SI", row)
        mean_sis = si_block.mean(axis=1)
        raw_gains = mean_sis - mean_i

        raw_gain = float(np.mean(raw_gains))
        gain = float(np.mean(np.maximum(raw_gains, 0.0)))

        p_eff = interference_samples.size
        total = p_eff * mean_i + q * float(np.sum(mean_sis - raw_gains))
        interference = total / (p_eff + q * n_sub)
        return gain, interference, raw_gain

    def select_action(self, epsilon: float) -> int:
        if self.rng.random() < epsilon:
            return int(self.rng.integers(0, num_actions(self.m)))
        return int(np.argmax(self.value_net.q_values(self.state)))

    def step(self) -> StepRecord:
        cfg = self.cfg
        eps = self.epsilon()
        action = self.select_action(eps)
        next_state = apply_action(self.state, action, self.phase_set.size)

        gain, interference, raw = self._measure(next_state)
        rec = compute_reward((gain, interference), self._prev, cfg.reward_mode)

        self.replay.push(self.state, action, rec.reward, next_state)
        if self.replay.size >= cfg.batch_size:
            batch = self.replay.sample(cfg.batch_size, self.rng)
            self.value_net.td_update(*batch, discount=cfg.discount)

        if rec.reward == +1 and (
                self.best is None
                or (gain > self.best.gain
                    and interference < self.best.interference)):
            self.best = BestRecord(next_state.copy(), gain, interference)

        self.state = next_state
        self._prev = (gain, interference)
        best_g, best_i = ((self.best.gain, self.best.interference)
                          if self.best is not None else (math.nan, math.nan))
        out = StepRecord(
            step=self.step_count, action=action, reward=rec.reward,
            gain=gain, interference=interference, epsilon=eps,
            best_gain=best_g, best_interference=best_i,
            raw_gain=raw)
        self.log.append(out)
        self.step_count += 1
        return out

    def best_beam(self) -> QuantizedBeam:
        indices = (self.best.phase_indices if self.best is not None
                   else self.initial_state)
        return QuantizedBeam(indices.copy(), self.phase_set)


def initial_beam_for_cluster(cluster: UserCluster, steering: Codebook) -> np.ndarray:
    """Warm start: the steering-grid beam with the highest average gain
    over the cluster members.

    The members' mean channel is useless as a selection proxy here
    because independent path phases cancel in the average, so the
    average of per-user gains is maximized instead.
    """
    gains = np.abs(cluster.channels.conj() @ steering.matrix.T) ** 2
    return steering[int(np.argmax(gains.mean(axis=0)))].phase_indices.copy()


def train_beam(cluster: UserCluster, phase_set: PhaseSet,
               interference_sampler, budget: int, cfg: AgentConfig,
               rng: np.random.Generator, steering: Codebook | None = None,
               initial_state: np.ndarray | None = None, cache=None,
               cache_mode: str = "off",
               measurement_log: list | None = None
               ) -> tuple[QuantizedBeam, list[StepRecord]]:
    """Run one beam agent for ``budget`` steps (the first step measures
    the warm-start beam) and return its best-so-far beam plus the log."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    cfg = dataclasses.replace(cfg, budget=budget)
    if initial_state is None:
        if steering is None:
            raise ValueError("need either a steering codebook or an initial state")
        initial_state = initial_beam_for_cluster(cluster, steering)
    agent = BeamAgent(cluster, phase_set, initial_state, cfg,
                      interference_sampler, rng, cache=cache,
                      cache_mode=cache_mode, measurement_log=measurement_log)
    for _ in range(budget - 1):
        agent.step()
    return agent.best_beam(), agent.log
