"""Multi-BS orchestration: interferer beam policies, the shared
per-BS measurement cache, and fully decentralized concurrent learning.

The only cross-BS coupling is physical: an agent's measurement call
goes through an environment-owned sampler closure that turns the other
base stations' live beams into scalar received powers.  BS-scoped
objects hold no references to any other BS's state, and an audit
counter plus an object-graph check make that verifiable.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beams import Codebook, PhaseSet, QuantizedBeam, beamsteering_codebook
from .channels import Scenario
from .config import ScenarioConfig
from .kernels import power_samples
from .learning import (AgentConfig, BeamAgent, UserCluster, cluster_users,
                       initial_beam_for_cluster)


# ---------------------------------------------------------------------------
# interferer policies
# ---------------------------------------------------------------------------

class RandomBeamPolicy:
    """Every element phase drawn i.i.d. uniform from the phase set per
    sample, which makes random transmit beams zero-mean with second
    moment I/M."""

    kind = "random"

    def __init__(self, phase_set: PhaseSet, m: int):
        self.phase_set = phase_set
        self.m = m

    def draw_phases(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.phase_set.size, size=(n, self.m))
        return self.phase_set.values[idx]


class FixedCodebookSweepPolicy:
    """Uniformly random pick from a fixed codebook (every beam has an
    even chance per sample)."""

    kind = "dft"

    def __init__(self, codebook: Codebook):
        self.codebook = codebook
        self._phase_rows = np.stack([b.phases for b in codebook.beams])

    def draw_phases(self, n: int, rng: np.random.Generator) -> np.ndarray:
        pick = rng.integers(0, len(self.codebook), size=n)
        return self._phase_rows[pick]


class CoLearningPolicy:
    """Exposes another BS's live in-training beams.

    ``live_phases`` is an environment-owned callable returning the
    other BS's current per-agent beam phases, one row per beam.  The
    other BS keeps serving its users while this one measures, so each
    slot draws one of those rows uniformly; the rows themselves move as
    the other BS learns, which is the non-stationarity under test.
    """

    kind = "colearn"

    def __init__(self, live_phases):
        self.live_phases = live_phases

    def draw_phases(self, n: int, rng: np.random.Generator) -> np.ndarray:
        rows = np.atleast_2d(self.live_phases())
        return rows[rng.integers(0, rows.shape[0], size=n)]


def draw_interferer_beam(policy, phase_set: PhaseSet,
                         rng: np.random.Generator) -> QuantizedBeam:
    """Materialize one policy draw as a quantized beam."""
    phases = policy.draw_phases(1, rng)[0]
    return QuantizedBeam(phase_set.quantize(phases), phase_set)


# ---------------------------------------------------------------------------
# shared measurement cache (per BS)
# ---------------------------------------------------------------------------

class MeasurementCache:
    """Append-only interference-sample store keyed by the exact phase
    configuration.  Safe for concurrent append/lookup."""

    def __init__(self):
        self._store: dict[bytes, list[float]] = {}
        self._lock = threading.Lock()

    def append(self, key: bytes, samples) -> None:
        samples = np.atleast_1d(np.asarray(samples, dtype=float))
        with self._lock:
            bucket = self._store.setdefault(key, [])
            bucket.extend(samples.tolist())

    def lookup(self, key: bytes) -> np.ndarray:
        with self._lock:
            bucket = self._store.get(key)
            return np.asarray(bucket, dtype=float) if bucket else np.empty(0)

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)


def cache_append(cache: MeasurementCache, beam, samples) -> None:
    key = beam.key() if isinstance(beam, QuantizedBeam) else bytes(beam)
    cache.append(key, samples)


def cache_lookup(cache: MeasurementCache, beam) -> np.ndarray:
    key = beam.key() if isinstance(beam, QuantizedBeam) else bytes(beam)
    return cache.lookup(key)


# ---------------------------------------------------------------------------
# information-flow audit
# ---------------------------------------------------------------------------

class InfoFlowAudit:
    """Counts accesses mediated by the environment versus direct
    cross-BS reads (which no code path performs; the counter exists so
    tests can assert it stays zero)."""

    def __init__(self):
        self.env_accesses = 0
        self.cross_bs_accesses = 0
        self._lock = threading.Lock()

    def record_env_access(self):
        with self._lock:
            self.env_accesses += 1

    def record_cross_bs_access(self):
        with self._lock:
            self.cross_bs_accesses += 1


@dataclass
class BSContext:
    """Everything one base station's learners may touch.

    Holds only BS-local state plus opaque power samplers; never any
    other BS's channels, beams, caches, or estimates.
    """

    bs_id: int
    clusters: list[UserCluster]
    cache: MeasurementCache
    samplers: list         # one sampler per beam agent
    agents: list[BeamAgent] = field(default_factory=list)


def verify_isolation(contexts: list[BSContext], scenario: Scenario) -> list[str]:
    """Structural audit: walk each context's object graph and flag any
    reachable array that is another BS's channel data."""
    violations = []
    own_users = {c.bs_id: scenario.bs(c.bs_id).users for c in contexts}
    for ctx in contexts:
        foreign = [u.channel for other_id, users in own_users.items()
                   if other_id != ctx.bs_id for u in users]
        reach = []
        for cluster in ctx.clusters:
            reach.append(cluster.channels)
        for agent in ctx.agents:
            reach.append(agent.cluster.channels)
        for arr in reach:
            for f in foreign:
                if arr is f or any(row is f for row in arr):
                    violations.append(
                        f"BS {ctx.bs_id} holds another BS's channel array")
    return violations


# ---------------------------------------------------------------------------
# decentralized learning runs
# ---------------------------------------------------------------------------

@dataclass
class LearningResult:
    codebooks: dict               # bs_id -> Codebook
    initial_codebooks: dict       # bs_id -> Codebook (warm starts)
    logs: dict                    # (bs_id, beam_index) -> list[StepRecord]
    clusters: dict                # bs_id -> list[UserCluster]
    audit: InfoFlowAudit
    contexts: list[BSContext]
    measurement_logs: dict | None = None


def _agent_config(cfg: ScenarioConfig) -> AgentConfig:
    return AgentConfig(
        budget=cfg.budget,
        p_measurements=cfg.p_measurements,
        q_measurements=cfg.q_measurements,
        gain_subsample=cfg.gain_subsample,
        discount=cfg.discount,
        learning_rate=cfg.learning_rate,
        eps_start=cfg.eps_start,
        eps_end=cfg.eps_end,
        replay_capacity=cfg.replay_capacity,
        batch_size=cfg.batch_size,
        reward_mode=cfg.reward_mode,
        value_estimator=cfg.value_estimator,
        noise_power=cfg.noise_power,
    )


def make_interference_sampler(h_list: list[np.ndarray], policies: list,
                              audit: InfoFlowAudit):
    """Environment-side physics: received interference power is the sum
    over transmitting BSs of |w^H H f|^2 with f drawn from each BS's
    policy.  Only scalar powers leave this closure."""
    h_conj = [h.conj().T.copy() for h in h_list]

    def sampler(w_vec: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        audit.record_env_access()
        total = np.zeros(n)
        for hc, policy in zip(h_conj, policies):
            g = hc @ w_vec
            total += power_samples(g, policy.draw_phases(n, rng))
        return total

    return sampler


def _spawn_rngs(seed: int, k: int, n: int) -> list[list[np.random.Generator]]:
    """One independent stream per (BS, beam agent), stable layout."""
    root = np.random.SeedSequence(seed)
    per_bs = root.spawn(k)
    return [[np.random.default_rng(s) for s in ss.spawn(n)] for ss in per_bs]


def run_decentralized_learning(scenario: Scenario, cfg: ScenarioConfig,
                               base_seed: int | None = None) -> LearningResult:
    """Learn codebooks at every BS with zero information exchange.

    * ``random`` / ``dft``: each BS trains its beams against the other
      BSs transmitting random beams or sweeping a fixed steering grid;
      beams of one BS may train in parallel worker threads.
    * ``colearn``: all BSs learn live, advanced one agent step at a
      time in round-robin order; each BS transmits with the beam its
      most recently stepped agent currently holds.

    Deterministic given (scenario, config, seed).
    """
    seed = cfg.seed if base_seed is None else base_seed
    phase_set = PhaseSet(cfg.phase_bits)
    ids = [b.bs_id for b in scenario.base_stations]
    k = len(ids)
    n = cfg.n_beams
    audit = InfoFlowAudit()
    agent_cfg = _agent_config(cfg)
    steering = beamsteering_codebook(scenario.m, n, phase_set)
    # clustering features need finer angular resolution than the codebook
    sensing = beamsteering_codebook(scenario.m, max(2 * scenario.m, 2 * n),
                                    phase_set)
    rngs = _spawn_rngs(seed, k, n + 1)   # last stream per BS: clustering

    measurement_logs = {} if cfg.log_measurements else None

    # cluster every BS's users with its own stream
    clusters_by_bs = {}
    for i, bs_id in enumerate(ids):
        users = scenario.bs(bs_id).users
        if len(users) < n:
            raise ValueError(
                f"BS {bs_id} has {len(users)} users, fewer than {n} beams")
        channels = np.stack([u.channel for u in users])
        clusters_by_bs[bs_id] = cluster_users(channels, n, sensing, rngs[i][n])

    live_phases: dict[int, np.ndarray] = {
        bs_id: np.stack([steering[j % n].phases for j in range(n)])
        for bs_id in ids}

    def make_policies(rx_id: int):
        tx_ids = [q for q in ids if q != rx_id]
        h_list = [scenario.interference_matrix(q, rx_id) for q in tx_ids]
        policies = []
        for q in tx_ids:
            if cfg.policy == "random":
                policies.append(RandomBeamPolicy(phase_set, scenario.m))
            elif cfg.policy == "dft":
                policies.append(FixedCodebookSweepPolicy(steering))
            else:
                policies.append(CoLearningPolicy(
                    lambda q=q: live_phases[q]))
        return h_list, policies

    contexts = []
    for i, bs_id in enumerate(ids):
        h_list, policies = make_policies(bs_id)
        samplers = [make_interference_sampler(h_list, policies, audit)
                    for _ in range(n)]
        contexts.append(BSContext(bs_id=bs_id, clusters=clusters_by_bs[bs_id],
                                  cache=MeasurementCache(), samplers=samplers))

    # build agents (the constructor takes the warm-start baseline
    # measurement, so colearn interleaving applies from step 1 on)
    initial_codebooks = {}
    for i, ctx in enumerate(contexts):
        initial_beams = []
        for beam_idx, cluster in enumerate(ctx.clusters):
            mlog = [] if cfg.log_measurements else None
            if measurement_logs is not None:
                measurement_logs[(ctx.bs_id, beam_idx)] = mlog
            init = initial_beam_for_cluster(cluster, steering)
            initial_beams.append(QuantizedBeam(init.copy(), phase_set))
            agent = BeamAgent(
                cluster, phase_set, init, agent_cfg,
                ctx.samplers[beam_idx], rngs[i][beam_idx],
                cache=ctx.cache, cache_mode=cfg.cache_mode,
                measurement_log=mlog)
            ctx.agents.append(agent)
            live_phases[ctx.bs_id][beam_idx] = phase_set.values[agent.state]
        initial_codebooks[ctx.bs_id] = Codebook(tuple(initial_beams))

    if cfg.policy == "colearn":
        # strict round-robin, one agent step at a time
        for _ in range(cfg.budget - 1):
            for ctx in contexts:
                for beam_idx, agent in enumerate(ctx.agents):
                    agent.step()
                    live_phases[ctx.bs_id][beam_idx] = \
                        phase_set.values[agent.state]
    else:
        workers = cfg.effective_workers()

        def run_agent(agent: BeamAgent):
            for _ in range(cfg.budget - 1):
                agent.step()

        all_agents = [a for ctx in contexts for a in ctx.agents]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run_agent, all_agents))
        else:
            for agent in all_agents:
                run_agent(agent)

    codebooks = {}
    logs = {}
    for ctx in contexts:
        beams = [agent.best_beam() for agent in ctx.agents]
        codebooks[ctx.bs_id] = Codebook(tuple(beams))
        for beam_idx, agent in enumerate(ctx.agents):
            logs[(ctx.bs_id, beam_idx)] = agent.log

    return LearningResult(codebooks=codebooks,
                          initial_codebooks=initial_codebooks,
                          logs=logs, clusters=clusters_by_bs, audit=audit,
                          contexts=contexts,
                          measurement_logs=measurement_logs)
