"""Run configuration: typed defaults, the flat key-value file format,
and the resolved-run manifest."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration file or out-of-range value."""


_POLICIES = ("random", "dft", "colearn")
_CACHE_MODES = ("off", "top-up", "replace")
_REWARD_MODES = ("joint", "ratio")
_ESTIMATORS = ("auto", "mlp", "tabular")
_TX_CODEBOOKS = ("learned", "steering")


@dataclass
class ScenarioConfig:
    """All knobs for one experiment run.

    Every field has a default, so an empty (or missing) config file is a
    valid run description.  ``parse_config`` rejects unknown keys.
    """

    # array / codebook
    m: int = 16                      # antennas per BS
    n_beams: int = 16                # beams per codebook
    k_bs: int = 2                    # number of base stations
    phase_bits: int = 4              # phase-shifter resolution r

    # measurement protocol
    p_measurements: int = 10         # interference-only burst length
    q_measurements: int = 10         # signal+interference burst length
    gain_subsample: int = 4          # users sampled per gain estimate
    noise_power: float = 0.0         # receiver noise power (0 = off)

    # synthetic layout
    grid_x: int = 20                 # user grid columns
    grid_y: int = 10                 # user grid rows
    l_user: int = 2                  # paths per user channel
    l_interbs: int = 1               # paths in the inter-BS channel
    nlos_offset_db: float = -15.0    # NLOS gain relative to LOS
    bs_distance: float = 200.0       # BS separation (m)
    bs_lateral_offset: float = 30.0  # BS 2 sideways displacement (m)
    interbs_gain_factor: float = 10.0  # inter-BS LOS gain vs strongest user
    scenario_file: str = ""          # load instead of synthesizing

    # learning
    policy: str = "random"           # random | dft | colearn
    budget: int = 10000              # steps per beam agent
    discount: float = 0.5
    learning_rate: float = 0.01
    eps_start: float = 1.0
    eps_end: float = 0.05
    replay_capacity: int = 2048
    batch_size: int = 32
    value_estimator: str = "auto"    # auto | mlp | tabular
    reward_mode: str = "joint"       # joint | ratio
    cache_mode: str = "off"          # off | top-up | replace
    log_measurements: bool = False

    # evaluation
    tx_snr_db: float = 30.0          # P_x / sigma^2 for rate curves
    sir_cap_db: float = 120.0
    other_tx_codebook: str = "learned"  # learned | steering
    codebook1_file: str = ""
    codebook2_file: str = ""
    codebook_file: str = ""          # for the pattern command
    pattern_points: int = 721

    # decision-rule evaluation
    roc_trials: int = 2000
    roc_p_values: str = "10"         # comma-separated burst lengths
    roc_gamma_points: int = 61

    # theory audit sizes
    audit_instances: int = 50
    audit_pairs: int = 10000
    audit_mc_draws: int = 100000
    audit_trials: int = 200

    # run control
    seed: int = 1
    workers: int = 0                 # 0 = all available cores

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = [
            "m", "n_beams", "k_bs", "p_measurements", "q_measurements",
            "gain_subsample", "grid_x", "grid_y", "l_user", "l_interbs",
            "budget", "replay_capacity", "batch_size", "pattern_points",
            "roc_trials", "roc_gamma_points", "audit_instances",
            "audit_pairs", "audit_mc_draws", "audit_trials",
        ]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 1 <= self.phase_bits <= 8:
            raise ConfigError(f"phase_bits must be in [1, 8], got {self.phase_bits}")
        if self.k_bs < 2:
            raise ConfigError(f"k_bs must be >= 2, got {self.k_bs}")
        if self.policy not in _POLICIES:
            raise ConfigError(f"policy must be one of {_POLICIES}, got {self.policy!r}")
        if self.cache_mode not in _CACHE_MODES:
            raise ConfigError(f"cache_mode must be one of {_CACHE_MODES}")
        if self.reward_mode not in _REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {_REWARD_MODES}")
        if self.value_estimator not in _ESTIMATORS:
            raise ConfigError(f"value_estimator must be one of {_ESTIMATORS}")
        if self.other_tx_codebook not in _TX_CODEBOOKS:
            raise ConfigError(f"other_tx_codebook must be one of {_TX_CODEBOOKS}")
        if self.bs_distance <= 0:
            raise ConfigError("bs_distance must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError(f"discount must be in [0, 1), got {self.discount}")
        if self.noise_power < 0:
            raise ConfigError("noise_power must be >= 0")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        for p in self.roc_p_list():
            if p < 1:
                raise ConfigError(f"roc_p_values entries must be >= 1, got {p}")

    def roc_p_list(self) -> list[int]:
        try:
            return [int(tok) for tok in self.roc_p_values.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"roc_p_values not a comma list of ints: "
                              f"{self.roc_p_values!r}") from exc

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _coerce(name: str, raw: str, lineno: int):
    ftype = _FIELDS[name].type
    raw = raw.strip()
    try:
        if ftype == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {name}: {exc}") from exc


def parse_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a flat ``key = value`` config file.

    Grammar: one assignment per line, ``#`` starts a comment, blank
    lines ignored.  Unknown or duplicated keys are errors (with line
    numbers), as are out-of-range values.
    """
    values: dict = {}
    seen: dict[str, int] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        values[key] = _coerce(key, raw, lineno)
    if overrides:
        values.update(overrides)
    return ScenarioConfig(**values)


def default_config(overrides: dict | None = None) -> ScenarioConfig:
    return ScenarioConfig(**(overrides or {}))


def write_manifest(path: str | Path, command: str, cfg: ScenarioConfig,
                   extra: dict | None = None) -> dict:
    """Emit the run manifest: resolved config plus run metadata.

    The manifest alone is enough to re-run the command bit-exactly.
    """
    from . import __version__
    from .kernels import NUMBA_ENABLED

    manifest = {
        "command": command,
        "seed": cfg.seed,
        "policy": cfg.policy,
        "burst_sizes": {"p": cfg.p_measurements, "q": cfg.q_measurements},
        "budget": cfg.budget,
        "schedule": ("round-robin" if cfg.policy == "colearn"
                     else "per-bs-sequential"),
        "config": cfg.as_dict(),
        "version": __version__,
        "numba": NUMBA_ENABLED,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
