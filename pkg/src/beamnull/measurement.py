"""The power-measurement protocol and the averaging estimators feeding
the beam-quality decision rule.

A measurement burst points the combining beam w at the array and
records received powers while the interferer keeps switching beams:
interference-only slots (serving users muted) and signal-plus-
interference slots (one user transmitting reference symbols).  All
estimators below work on those scalar powers alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .beams import QuantizedBeam
from .kernels import power_samples


class Hypothesis(enum.Enum):
    """H0: the candidate beam suppresses interference better than the
    reference; H1: it does not."""

    H0 = 0
    H1 = 1


@dataclass(frozen=True)
class DecisionThreshold:
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class MeasurementSet:
    """One burst's worth of power samples for a single beam."""

    interference_samples: np.ndarray          # P values, >= 0
    signal_plus_interference_samples: np.ndarray  # Q values, >= 0
    beam: QuantizedBeam | None = None

    def __post_init__(self):
        i = np.atleast_1d(np.asarray(self.interference_samples, dtype=float))
        si = np.atleast_1d(np.asarray(self.signal_plus_interference_samples,
                                      dtype=float))
        if np.any(i < 0) or np.any(si < 0):
            raise ValueError("power samples must be nonnegative")
        object.__setattr__(self, "interference_samples", i)
        object.__setattr__(self, "signal_plus_interference_samples", si)

    @property
    def p(self) -> int:
        return self.interference_samples.size

    @property
    def q(self) -> int:
        return self.signal_plus_interference_samples.size


def _beam_vector(w) -> np.ndarray:
    return w.vector if isinstance(w, QuantizedBeam) else np.asarray(w)


def measure_interference(w, h_matrix: np.ndarray, interferer_policy,
                         p: int, noise_power: float = 0.0,
                         rng: np.random.Generator | None = None) -> np.ndarray:
    """P interference power samples |w^H H f|^2 with f drawn fresh from
    the interferer policy per slot.  Optional additive |w^H n|^2 term."""
    if p < 1:
        raise ValueError(f"need p >= 1 samples, got {p}")
    rng = rng if rng is not None else np.random.default_rng()
    vec = _beam_vector(w)
    g = h_matrix.conj().T @ vec
    phases = interferer_policy.draw_phases(p, rng)
    samples = power_samples(g, phases)
    if noise_power > 0.0:
        samples = samples + rng.exponential(noise_power, p)
    return samples


def measure_signal_plus_interference(w, h_user: np.ndarray, h_matrix: np.ndarray,
                                     interferer_policy, q: int,
                                     noise_power: float = 0.0,
                                     rng: np.random.Generator | None = None
                                     ) -> np.ndarray:
    """Q samples |w^H h|^2 + |w^H H f'|^2 with fresh interferer draws."""
    if q < 1:
        raise ValueError(f"need q >= 1 samples, got {q}")
    rng = rng if rng is not None else np.random.default_rng()
    vec = _beam_vector(w)
    signal = float(np.abs(np.vdot(vec, h_user)) ** 2)
    interference = measure_interference(vec, h_matrix, interferer_policy,
                                        q, noise_power, rng)
    return signal + interference


def estimate_gain(ms: MeasurementSet) -> float:
    """Beamforming-gain estimate mean(SI) - mean(I).

    Can come out negative on finite samples; callers clamp for reward
    purposes and keep the raw value for logs.
    """
    if ms.p < 1 or ms.q < 1:
        raise ValueError("gain estimation needs both sample sets nonempty")
    return float(np.mean(ms.signal_plus_interference_samples)
                 - np.mean(ms.interference_samples))


def estimate_expected_interference(ms: MeasurementSet, gain_estimate: float) -> float:
    """Average interference power pooled over both slot types:

        (P*mean(I) + Q*mean(SI) - Q*gain) / (P + Q)

    With Q = 0 this degenerates to mean(I).
    """
    p, q = ms.p, ms.q
    if p + q == 0:
        raise ValueError("no samples to estimate from")
    total = 0.0
    if p:
        total += p * float(np.mean(ms.interference_samples))
    if q:
        total += q * float(np.mean(ms.signal_plus_interference_samples))
        total -= q * gain_estimate
    return total / (p + q)


def cluster_average_gain(w, cluster_channels, sample_size: int | None = None,
                         rng: np.random.Generator | None = None) -> float:
    """Mean |w^H h|^2 over a user cluster or a random subsample of it."""
    channels = list(cluster_channels)
    if not channels:
        raise ValueError("empty cluster")
    if sample_size is not None and sample_size < len(channels):
        rng = rng if rng is not None else np.random.default_rng()
        pick = rng.choice(len(channels), size=sample_size, replace=False)
        channels = [channels[i] for i in pick]
    vec = _beam_vector(w)
    mat = np.stack(channels)
    return float(np.mean(np.abs(mat.conj() @ vec) ** 2))


def decide_better(est_w: float, est_w_prime: float,
                  threshold: DecisionThreshold | float = 1.0) -> Hypothesis:
    """Threshold test on the interference-estimate ratio.

    H0 (w better) when est_w / est_w_prime < gamma; the boundary ratio
    counts as H1.
    """
    gamma = threshold.gamma if isinstance(threshold, DecisionThreshold) \
        else float(threshold)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if est_w_prime <= 0:
        raise ValueError(f"reference estimate must be positive, got {est_w_prime}")
    return Hypothesis.H0 if est_w / est_w_prime < gamma else Hypothesis.H1
