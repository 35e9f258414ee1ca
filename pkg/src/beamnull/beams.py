"""Quantized analog beams and codebooks: constant-modulus phase-shifter
vectors, beam training, steering-grid reference codebooks, and beam
patterns."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .channels import ArrayGeometry, array_response


@dataclass(frozen=True)
class PhaseSet:
    """The 2^r admissible phase-shifter values, uniformly spaced in
    (-pi, pi].

    Index i maps to -pi + 2*pi*(i+1)/2^r, so the values sum to zero for
    every r >= 1 (which makes i.i.d.-uniform random beams zero-mean).
    """

    bits: int

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError(f"bits must be in [1, 16], got {self.bits}")

    @property
    def size(self) -> int:
        return 2 ** self.bits

    @cached_property
    def values(self) -> np.ndarray:
        n = self.size
        vals = -math.pi + 2.0 * math.pi * (np.arange(n) + 1) / n
        vals.flags.writeable = False
        return vals

    def quantize(self, phase: float | np.ndarray) -> np.ndarray:
        """Nearest-value indices for arbitrary phases (circular distance)."""
        n = self.size
        step = 2.0 * math.pi / n
        k = np.rint((np.asarray(phase) + math.pi) / step).astype(np.int64)
        return (k - 1) % n


@dataclass(frozen=True)
class QuantizedBeam:
    """A unit-norm constant-modulus beam defined by M phase indices."""

    phase_indices: np.ndarray
    phase_set: PhaseSet

    def __post_init__(self):
        idx = np.array(self.phase_indices, dtype=np.int64, copy=True)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("phase_indices must be a nonempty 1-D index array")
        if np.any(idx < 0) or np.any(idx >= self.phase_set.size):
            raise ValueError(
                f"phase index out of range [0, {self.phase_set.size})")
        idx.flags.writeable = False
        object.__setattr__(self, "phase_indices", idx)

    @property
    def m(self) -> int:
        return self.phase_indices.size

    @cached_property
    def phases(self) -> np.ndarray:
        return self.phase_set.values[self.phase_indices]

    @cached_property
    def vector(self) -> np.ndarray:
        v = np.exp(1j * self.phases) / math.sqrt(self.m)
        v.flags.writeable = False
        return v

    def key(self) -> bytes:
        """Stable exact-configuration key (for measurement caches)."""
        return self.phase_indices.tobytes()


def beam_from_indices(indices, m: int, phase_set: PhaseSet) -> QuantizedBeam:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape != (m,):
        raise ValueError(f"expected {m} indices, got shape {idx.shape}")
    return QuantizedBeam(idx, phase_set)


@dataclass(frozen=True)
class Codebook:
    beams: tuple[QuantizedBeam, ...]

    def __post_init__(self):
        if len(self.beams) < 1:
            raise ValueError("a codebook needs at least one beam")
        m = self.beams[0].m
        bits = self.beams[0].phase_set.bits
        for b in self.beams:
            if b.m != m or b.phase_set.bits != bits:
                raise ValueError("all beams must share M and phase resolution")
        object.__setattr__(self, "beams", tuple(self.beams))

    def __len__(self) -> int:
        return len(self.beams)

    def __iter__(self):
        return iter(self.beams)

    def __getitem__(self, n: int) -> QuantizedBeam:
        return self.beams[n]

    @property
    def m(self) -> int:
        return self.beams[0].m

    @property
    def phase_set(self) -> PhaseSet:
        return self.beams[0].phase_set

    @cached_property
    def matrix(self) -> np.ndarray:
        """Beam vectors stacked as rows, shape (N, M)."""
        mat = np.stack([b.vector for b in self.beams])
        mat.flags.writeable = False
        return mat


def beamforming_gain(w: QuantizedBeam | np.ndarray, h: np.ndarray) -> float:
    """Received power |w^H h|^2."""
    vec = w.vector if isinstance(w, QuantizedBeam) else np.asarray(w)
    h = np.asarray(h)
    if vec.shape != h.shape:
        raise ValueError(f"dimension mismatch: beam {vec.shape} vs channel {h.shape}")
    return float(np.abs(np.vdot(vec, h)) ** 2)


def beam_training_select(codebook: Codebook, h: np.ndarray) -> tuple[int, float]:
    """Exhaustive beam training: index and gain of the best beam.

    Ties resolve to the lowest index.
    """
    gains = np.abs(codebook.matrix.conj() @ np.asarray(h)) ** 2
    best = int(np.argmax(gains))
    return best, float(gains[best])


def beamsteering_codebook(m: int, n: int, phase_set: PhaseSet) -> Codebook:
    """N beams steering at direction cosines -1 + (2k+1)/N, k = 0..N-1.

    The midpoint grid covers [-1, 1) uniformly and makes N=1 the
    broadside beam.  Element phases are quantized to the phase set.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 beams, got {n}")
    beams = []
    for k in range(n):
        c = -1.0 + (2 * k + 1) / n
        desired = math.pi * np.arange(m) * c
        beams.append(QuantizedBeam(phase_set.quantize(desired), phase_set))
    return Codebook(tuple(beams))


def beam_pattern(w: QuantizedBeam | np.ndarray, geom: ArrayGeometry,
                 angles: np.ndarray) -> np.ndarray:
    """Gain |w^H a(angle)|^2 over an azimuth grid (elevation broadside)."""
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("angle grid must be nonempty")
    vec = w.vector if isinstance(w, QuantizedBeam) else np.asarray(w)
    steer = np.exp(
        1j * math.pi * 2.0 * geom.spacing
        * np.outer(np.cos(angles), np.arange(geom.num_antennas)))
    return np.abs(steer @ np.conj(vec)) ** 2


def null_steering_beam(m: int, main_azimuth: float, null_azimuth: float,
                       phase_set: PhaseSet, geom: ArrayGeometry | None = None,
                       iterations: int = 50) -> QuantizedBeam:
    """Steer toward ``main_azimuth`` with a null at ``null_azimuth``.

    Alternating projections between the null-constraint subspace and the
    constant-modulus set, then re-quantization onto the phase grid.
    """
    geom = geom or ArrayGeometry(m)
    a_null = array_response(geom, null_azimuth)
    a_main = array_response(geom, main_azimuth)
    proj = np.outer(a_null, np.conj(a_null)) / float(np.vdot(a_null, a_null).real)
    v = a_main / math.sqrt(m)
    for _ in range(iterations):
        v = v - proj @ v
        v = np.exp(1j * np.angle(v)) / math.sqrt(m)
    return QuantizedBeam(phase_set.quantize(np.angle(v)), phase_set)


# ---------------------------------------------------------------------------
# codebook CSV format: one row per beam, beam_id then M phase indices
# ---------------------------------------------------------------------------

def save_codebook_csv(codebook: Codebook, path: str | Path) -> None:
    m = codebook.m
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam_id"] + [f"idx_{k}" for k in range(m)])
        for n, beam in enumerate(codebook.beams):
            writer.writerow([n] + [int(i) for i in beam.phase_indices])


def load_codebook_csv(path: str | Path, phase_set: PhaseSet) -> Codebook:
    beams = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "beam_id":
            raise ValueError(f"{path}: not a codebook CSV (missing beam_id header)")
        for row in reader:
            idx = np.asarray([int(v) for v in row[1:]], dtype=np.int64)
            beams.append(QuantizedBeam(idx, phase_set))
    if not beams:
        raise ValueError(f"{path}: codebook CSV has no beams")
    return Codebook(tuple(beams))
