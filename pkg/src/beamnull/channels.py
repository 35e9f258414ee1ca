"""Geometric channels: array responses, multipath user channels, the
BS-to-BS interference matrix, synthetic two-BS scenarios, and the JSON
dataset format for externally generated (e.g. ray-traced) channels."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig


class DatasetFormatError(ValueError):
    """Malformed or dimensionally inconsistent channel dataset file."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along one axis."""

    num_antennas: int
    spacing: float = 0.5       # wavelengths
    axis: str = "y"

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError(f"num_antennas must be >= 1, got {self.num_antennas}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")


def array_response(geom: ArrayGeometry, azimuth: float,
                   elevation: float = math.pi / 2) -> np.ndarray:
    """Plane-wave phase signature of the array.

    Element k (0-based) is exp(j*2*pi*spacing*k*cos(azimuth)*sin(elevation)),
    so every element has unit modulus and the broadside direction
    (azimuth pi/2) gives the all-ones vector.
    """
    k = np.arange(geom.num_antennas)
    phase = 2.0 * math.pi * geom.spacing * math.cos(azimuth) * math.sin(elevation)
    return np.exp(1j * phase * k)


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: complex gain plus arrival angles (radians)."""

    gain: complex
    azimuth: float
    elevation: float = math.pi / 2

    def __post_init__(self):
        if not (np.isfinite(self.gain) and np.isfinite(self.azimuth)
                and np.isfinite(self.elevation)):
            raise ValueError("path gain and angles must be finite")


@dataclass(frozen=True)
class PathSet:
    """Ordered multipath description of one user channel."""

    paths: tuple[PathComponent, ...]

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ValueError("a PathSet needs at least one path")
        object.__setattr__(self, "paths", tuple(self.paths))

    def __len__(self) -> int:
        return len(self.paths)


def synth_channel(paths: PathSet, geom: ArrayGeometry) -> np.ndarray:
    """Channel vector: gain-weighted sum of array responses over paths."""
    h = np.zeros(geom.num_antennas, dtype=np.complex128)
    for p in paths.paths:
        h += p.gain * array_response(geom, p.azimuth, p.elevation)
    return h


@dataclass(frozen=True)
class InterferencePath:
    """One path of a BS-to-BS link: gain plus arrival and departure angles."""

    gain: complex
    rx_azimuth: float
    tx_azimuth: float
    rx_elevation: float = math.pi / 2
    tx_elevation: float = math.pi / 2


@dataclass(frozen=True)
class InterferenceChannel:
    """Multipath BS-to-BS link realizing an M x M matrix of rank <= L."""

    paths: tuple[InterferencePath, ...]
    rx_geometry: ArrayGeometry
    tx_geometry: ArrayGeometry

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ValueError("an InterferenceChannel needs at least one path")
        object.__setattr__(self, "paths", tuple(self.paths))

    def __len__(self) -> int:
        return len(self.paths)

    def reversed(self) -> "InterferenceChannel":
        """The same physical link seen in the opposite direction.

        Realizes the Hermitian transpose of this channel's matrix.
        """
        swapped = tuple(
            InterferencePath(
                gain=np.conj(p.gain),
                rx_azimuth=p.tx_azimuth, tx_azimuth=p.rx_azimuth,
                rx_elevation=p.tx_elevation, tx_elevation=p.rx_elevation,
            ) for p in self.paths)
        return InterferenceChannel(swapped, self.tx_geometry, self.rx_geometry)


def synth_interference_matrix(ch: InterferenceChannel) -> np.ndarray:
    """Sum of per-path outer products a_r a_t^H, weighted by path gains."""
    m_r = ch.rx_geometry.num_antennas
    m_t = ch.tx_geometry.num_antennas
    h = np.zeros((m_r, m_t), dtype=np.complex128)
    for p in ch.paths:
        a_r = array_response(ch.rx_geometry, p.rx_azimuth, p.rx_elevation)
        a_t = array_response(ch.tx_geometry, p.tx_azimuth, p.tx_elevation)
        h += p.gain * np.outer(a_r, np.conj(a_t))
    return h


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    position: tuple[float, float, float]
    channel: np.ndarray            # serving-BS channel, length M


@dataclass(frozen=True)
class BaseStation:
    bs_id: int
    position: tuple[float, float, float]
    users: tuple[UserRecord, ...]


@dataclass(frozen=True)
class Scenario:
    """A full deployment snapshot.

    ``interference_matrices`` maps (transmitting BS id, receiving BS id)
    to the realized matrix.  For synthetic scenarios the underlying
    multipath descriptions are kept in ``interference_channels`` (needed
    by the closed-form quality oracles); ingested datasets carry only
    the matrices.
    """

    m: int
    base_stations: tuple[BaseStation, ...]
    interference_matrices: dict
    interference_channels: dict = field(default_factory=dict)
    geometry: ArrayGeometry | None = None
    seed: int | None = None

    def __post_init__(self):
        if len(self.base_stations) < 2:
            raise ValueError("a Scenario needs at least two base stations")

    @property
    def bs_count(self) -> int:
        return len(self.base_stations)

    def bs(self, bs_id: int) -> BaseStation:
        for b in self.base_stations:
            if b.bs_id == bs_id:
                return b
        raise KeyError(f"no base station with id {bs_id}")

    def interference_matrix(self, tx_id: int, rx_id: int) -> np.ndarray:
        """Matrix of the link tx -> rx, deriving the reverse direction
        by Hermitian transpose when only one direction is stored."""
        key = (tx_id, rx_id)
        if key in self.interference_matrices:
            return self.interference_matrices[key]
        rev = (rx_id, tx_id)
        if rev in self.interference_matrices:
            return self.interference_matrices[rev].conj().T
        raise KeyError(f"no interference channel between BS {tx_id} and {rx_id}")

    def interference_channel(self, tx_id: int, rx_id: int) -> InterferenceChannel:
        key = (tx_id, rx_id)
        if key in self.interference_channels:
            return self.interference_channels[key]
        rev = (rx_id, tx_id)
        if rev in self.interference_channels:
            return self.interference_channels[rev].reversed()
        raise KeyError(f"no multipath description for link {tx_id} -> {rx_id}; "
                       "ingested datasets carry matrices only")

    def interferer_ids(self, rx_id: int) -> list[int]:
        return [b.bs_id for b in self.base_stations if b.bs_id != rx_id]


def associate_users(channel_map: np.ndarray) -> np.ndarray:
    """Assign each user to the BS with the strongest channel.

    ``channel_map`` is (users, K, M): user u's channel to every BS.
    Returns the winning BS index per user (0-based); exact norm ties go
    to the lowest index.
    """
    norms = np.linalg.norm(channel_map, axis=2)
    return np.argmax(norms, axis=1)


def _direction_cosine(src: np.ndarray, dst: np.ndarray, axis: str) -> float:
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    n = np.linalg.norm(d)
    if n == 0:
        raise ValueError("coincident positions have no direction")
    unit = d / n
    return float(unit[{"x": 0, "y": 1, "z": 2}[axis]])


def generate_two_bs_scenario(cfg: ScenarioConfig) -> Scenario:
    """Synthesize the core deployment: K BSs with a LOS inter-BS link
    and a rectangular user grid in between.

    Path amplitudes fall off as reference-distance/distance so user
    association is meaningful; the inter-BS LOS amplitude is set to
    ``interbs_gain_factor`` times the strongest user amplitude, keeping
    interference dominant.  Deterministic given ``cfg.seed``.
    """
    if cfg.bs_distance <= 0 or cfg.grid_x < 1 or cfg.grid_y < 1:
        raise ValueError("invalid geometry parameters")
    rng = np.random.default_rng(cfg.seed)
    geom = ArrayGeometry(cfg.m, 0.5, "y")
    k = cfg.k_bs
    d = cfg.bs_distance

    bs_pos = [np.array([0.0, 0.0, 0.0])]
    for q in range(1, k):
        # extra BSs fan out along x with alternating lateral offsets
        bs_pos.append(np.array([d * q, cfg.bs_lateral_offset * (1 if q % 2 else -1), 0.0]))

    # the grid runs alongside the segment joining the BSs, so user
    # directions crowd the inter-BS azimuth without sitting exactly on it
    xs = np.linspace(0.3 * d, 0.7 * d, cfg.grid_x)
    ys = np.linspace(-0.225 * d, -0.025 * d, cfg.grid_y)
    positions = [np.array([x, y, 0.0]) for y in ys for x in xs]

    d_ref = 0.25 * d
    n_users = len(positions)

    # per-user multipath sets toward every BS, then associate by norm
    path_sets: list[list[PathSet]] = []
    channels = np.zeros((n_users, k, cfg.m), dtype=np.complex128)
    for u, pos in enumerate(positions):
        per_bs = []
        for q in range(k):
            dist = float(np.linalg.norm(pos - bs_pos[q]))
            los_mag = d_ref / max(dist, 1e-9)
            los = PathComponent(
                gain=los_mag * np.exp(1j * rng.uniform(-math.pi, math.pi)),
                azimuth=math.acos(_direction_cosine(bs_pos[q], pos, geom.axis)),
            )
            extra = []
            for _ in range(cfg.l_user - 1):
                mag = los_mag * 10.0 ** (cfg.nlos_offset_db / 20.0)
                extra.append(PathComponent(
                    gain=mag * np.exp(1j * rng.uniform(-math.pi, math.pi)),
                    azimuth=math.acos(rng.uniform(-1.0, 1.0)),
                ))
            ps = PathSet((los, *extra))
            per_bs.append(ps)
            channels[u, q] = synth_channel(ps, geom)
        path_sets.append(per_bs)

    owner = associate_users(channels)
    max_user_amp = max(
        abs(path_sets[u][owner[u]].paths[0].gain) for u in range(n_users))

    base_stations = []
    for q in range(k):
        users = tuple(
            UserRecord(user_id=u, position=tuple(positions[u]),
                       channel=channels[u, q])
            for u in range(n_users) if owner[u] == q)
        base_stations.append(BaseStation(
            bs_id=q + 1, position=tuple(bs_pos[q]), users=users))

    interference_channels = {}
    interference_matrices = {}
    for q in range(k):
        for r in range(q + 1, k):
            los_mag = cfg.interbs_gain_factor * max_user_amp
            paths = [InterferencePath(
                gain=los_mag * np.exp(1j * rng.uniform(-math.pi, math.pi)),
                rx_azimuth=math.acos(_direction_cosine(bs_pos[q], bs_pos[r], geom.axis)),
                tx_azimuth=math.acos(_direction_cosine(bs_pos[r], bs_pos[q], geom.axis)),
            )]
            for _ in range(cfg.l_interbs - 1):
                mag = los_mag * 10.0 ** (cfg.nlos_offset_db / 20.0)
                paths.append(InterferencePath(
                    gain=mag * np.exp(1j * rng.uniform(-math.pi, math.pi)),
                    rx_azimuth=math.acos(rng.uniform(-1.0, 1.0)),
                    tx_azimuth=math.acos(rng.uniform(-1.0, 1.0)),
                ))
            # (tx_id, rx_id) with BS ids 1-based; r transmits toward q
            ch = InterferenceChannel(tuple(paths), geom, geom)
            interference_channels[(r + 1, q + 1)] = ch
            interference_channels[(q + 1, r + 1)] = ch.reversed()
            interference_matrices[(r + 1, q + 1)] = synth_interference_matrix(ch)
            interference_matrices[(q + 1, r + 1)] = \
                interference_matrices[(r + 1, q + 1)].conj().T

    return Scenario(
        m=cfg.m,
        base_stations=tuple(base_stations),
        interference_matrices=interference_matrices,
        interference_channels=interference_channels,
        geometry=geom,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# dataset persistence
#
# Top-level schema:
#   {"m": int,
#    "bs": [{"id": int, "users": [{"id": int, "pos": [x, y, z],
#            "h_re": [M floats], "h_im": [M floats]}]}],
#    "interference": [{"from": int, "to": int,
#                      "H_re": [M*M row-major], "H_im": [...]}]}
# ---------------------------------------------------------------------------

def save_channel_dataset(scenario: Scenario, path: str | Path) -> None:
    doc = {
        "m": scenario.m,
        "bs": [
            {
                "id": b.bs_id,
                "users": [
                    {
                        "id": u.user_id,
                        "pos": [float(v) for v in u.position],
                        "h_re": [float(v) for v in u.channel.real],
                        "h_im": [float(v) for v in u.channel.imag],
                    }
                    for u in b.users
                ],
            }
            for b in scenario.base_stations
        ],
        "interference": [
            {
                "from": tx, "to": rx,
                "H_re": [float(v) for v in mat.real.ravel()],
                "H_im": [float(v) for v in mat.imag.ravel()],
            }
            for (tx, rx), mat in sorted(scenario.interference_matrices.items())
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_channel_dataset(path: str | Path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"not valid JSON: {exc}") from exc

    try:
        m = int(doc["m"])
        bs_docs = doc["bs"]
        interference = doc["interference"]
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"missing top-level key: {exc}") from exc

    base_stations = []
    for b in bs_docs:
        users = []
        for u in b["users"]:
            h_re = np.asarray(u["h_re"], dtype=float)
            h_im = np.asarray(u["h_im"], dtype=float)
            if h_re.shape != (m,) or h_im.shape != (m,):
                raise DatasetFormatError(
                    f"user {u.get('id')}: channel length {h_re.size} != m={m}")
            pos = u["pos"]
            if len(pos) != 3:
                raise DatasetFormatError(f"user {u.get('id')}: pos must be [x, y, z]")
            users.append(UserRecord(
                user_id=int(u["id"]),
                position=tuple(float(v) for v in pos),
                channel=h_re + 1j * h_im))
        base_stations.append(BaseStation(
            bs_id=int(b["id"]), position=(0.0, 0.0, 0.0), users=tuple(users)))

    matrices = {}
    for entry in interference:
        h_re = np.asarray(entry["H_re"], dtype=float)
        h_im = np.asarray(entry["H_im"], dtype=float)
        if h_re.size != m * m or h_im.size != m * m:
            raise DatasetFormatError(
                f"interference block {entry.get('from')}->{entry.get('to')}: "
                f"expected {m * m} entries, got {h_re.size}")
        matrices[(int(entry["from"]), int(entry["to"]))] = \
            (h_re + 1j * h_im).reshape(m, m)

    return Scenario(
        m=m,
        base_stations=tuple(base_stations),
        interference_matrices=matrices,
        geometry=ArrayGeometry(m),
    )
