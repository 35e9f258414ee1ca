"""Evaluation harness: achievable rates, per-user SIR maps, ROC curves
for the beam-quality decision rule, and beam-pattern exports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beams import Codebook, beam_pattern, beam_training_select
from .channels import ArrayGeometry, Scenario
from .kernels import power_samples


# ---------------------------------------------------------------------------
# achievable rate
# ---------------------------------------------------------------------------

def user_rate(w, h: np.ndarray, codebook_other: Codebook, h_matrix: np.ndarray,
              p_x: float, sigma2: float) -> float:
    """Average spectral efficiency with the interferer sweeping its
    codebook uniformly; the expectation is an exact enumeration."""
    vec = w.vector if hasattr(w, "vector") else np.asarray(w)
    signal = float(np.abs(np.vdot(vec, h)) ** 2)
    if signal == 0.0:
        return 0.0
    interf = np.abs(codebook_other.matrix @ (h_matrix.conj().T @ vec).conj()) ** 2
    sinr = signal * p_x / (interf * p_x + sigma2)
    return float(np.mean(np.log2(1.0 + sinr)))


def objective_value(codebooks: dict, scenario: Scenario, p_x: float,
                    sigma2: float) -> float:
    """Sum over BSs of the user-grid average rate, with serving beams
    chosen by exhaustive beam training."""
    total = 0.0
    ids = [b.bs_id for b in scenario.base_stations]
    for bs_id in ids:
        cb = codebooks[bs_id]
        others = [(q, codebooks[q], scenario.interference_matrix(q, bs_id))
                  for q in ids if q != bs_id]
        users = scenario.bs(bs_id).users
        if not users:
            continue
        acc = 0.0
        for u in users:
            idx, _ = beam_training_select(cb, u.channel)
            w = cb[idx]
            # with several interferers the rate uses their summed powers
            vec = w.vector
            signal = float(np.abs(np.vdot(vec, u.channel)) ** 2)
            interf = None
            for _, cb_o, h_m in others:
                powers = np.abs(cb_o.matrix @ (h_m.conj().T @ vec).conj()) ** 2
                interf = powers if interf is None else \
                    _cross_sum(interf, powers)
            sinr = signal * p_x / (interf * p_x + sigma2)
            acc += float(np.mean(np.log2(1.0 + sinr)))
        total += acc / len(users)
    return total


def _cross_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All pairwise sums, flattened (independent interferer sweeps)."""
    return (a[:, None] + b[None, :]).ravel()


# ---------------------------------------------------------------------------
# SIR map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SirUserRow:
    user_id: int
    x: float
    y: float
    avg_sir_db: float      # may be +inf
    min_sir_db: float


@dataclass(frozen=True)
class SirReport:
    rows: tuple[SirUserRow, ...]
    bs_id: int

    def median_avg_db(self) -> float:
        return float(np.median([r.avg_sir_db for r in self.rows]))

    def capped(self, cap_db: float = 120.0) -> np.ndarray:
        """Map-friendly (users, 2) array with infinities clamped."""
        arr = np.array([[r.avg_sir_db, r.min_sir_db] for r in self.rows])
        return np.clip(arr, -cap_db, cap_db)


def sir_map(codebook_self: Codebook, codebook_other: Codebook,
            scenario: Scenario, bs_id: int = 1) -> SirReport:
    """Per-user average and minimum SIR (dB) for one BS's users, with
    the other side sweeping its codebook uniformly.

    Users whose serving beam nulls the interference for every transmit
    beam get the +inf sentinel (CSV writes "inf"; map rendering clamps).
    """
    other_ids = scenario.interferer_ids(bs_id)
    if len(other_ids) != 1:
        raise ValueError("SIR maps are defined for the two-BS core scenario")
    h_matrix = scenario.interference_matrix(other_ids[0], bs_id)
    rows = []
    for u in scenario.bs(bs_id).users:
        idx, signal = beam_training_select(codebook_self, u.channel)
        vec = codebook_self[idx].vector
        interf = np.abs(codebook_other.matrix @ (h_matrix.conj().T @ vec).conj()) ** 2
        with np.errstate(divide="ignore"):
            sir = np.where(interf > 0.0, signal / np.maximum(interf, 1e-300),
                           math.inf)
            avg = float(np.mean(sir))
            worst = float(signal / interf.max()) if interf.max() > 0 else math.inf
            avg_db = 10.0 * math.log10(avg) if avg > 0 else -math.inf
            min_db = 10.0 * math.log10(worst) if worst > 0 else -math.inf
        rows.append(SirUserRow(user_id=u.user_id, x=u.position[0],
                               y=u.position[1], avg_sir_db=avg_db,
                               min_sir_db=min_db))
    return SirReport(rows=tuple(rows), bs_id=bs_id)


def write_sir_csv(reports, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "x", "y", "avg_sir_db", "min_sir_db"])
        for report in reports:
            for r in report.rows:
                writer.writerow([r.user_id, repr(r.x), repr(r.y),
                                 _fmt(r.avg_sir_db), _fmt(r.min_sir_db)])


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_rate_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "rate_bps_hz"])
        for user_id, rate in rows:
            writer.writerow([user_id, repr(rate)])


# ---------------------------------------------------------------------------
# ROC of the decision rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    points: tuple          # (gamma, tpr, fpr) triples, gamma ascending
    p_measurements: int
    trials: int

    def auc(self) -> float:
        fpr = np.array([p[2] for p in self.points])
        tpr = np.array([p[1] for p in self.points])
        fpr = np.concatenate([[0.0], fpr, [1.0]])
        tpr = np.concatenate([[0.0], tpr, [1.0]])
        order = np.argsort(fpr, kind="stable")
        return float(np.trapezoid(tpr[order], fpr[order]))


def roc_curve(scenario: Scenario, policy, p: int, gamma_grid,
              trials: int, rng: np.random.Generator,
              rx_id: int = 1, phase_bits: int = 4) -> RocCurve:
    """Detection performance of the averaged-measurement decision rule.

    Per trial two random quantized beams are compared: ground truth
    comes from the unobservable per-path coefficient norms, the
    prediction from the ratio of P-sample interference averages
    thresholded at each gamma.  The same trial set is reused across the
    gamma grid, so the curve is exactly monotone in gamma.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    tx_id = scenario.interferer_ids(rx_id)[0]
    channel = scenario.interference_channel(tx_id, rx_id)
    h_matrix = scenario.interference_matrix(tx_id, rx_id)

    from .beams import PhaseSet
    phase_set = PhaseSet(phase_bits)
    m = scenario.m

    idx = rng.integers(0, phase_set.size, size=(2 * trials, m))
    beams = np.exp(1j * phase_set.values[idx]) / math.sqrt(m)

    truth_metric = _coeff_norms(beams, channel)
    truth_h0 = truth_metric[:trials] < truth_metric[trials:]

    estimates = np.empty(2 * trials)
    hm = h_matrix.conj().T
    for i in range(2 * trials):
        g = hm @ beams[i]
        estimates[i] = float(np.mean(
            power_samples(g, policy.draw_phases(p, rng))))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = estimates[:trials] / estimates[trials:]

    points = []
    for gamma in sorted(float(g) for g in gamma_grid):
        predict_h0 = ratio < gamma      # NaN compares False -> H1
        tp = int(np.sum(predict_h0 & truth_h0))
        fp = int(np.sum(predict_h0 & ~truth_h0))
        n_h0 = int(np.sum(truth_h0))
        n_h1 = trials - n_h0
        tpr = tp / n_h0 if n_h0 else 0.0
        fpr = fp / n_h1 if n_h1 else 0.0
        points.append((gamma, tpr, fpr))
    return RocCurve(points=tuple(points), p_measurements=p, trials=trials)


def _coeff_norms(beams: np.ndarray, channel) -> np.ndarray:
    """Squared coefficient norms for a batch of beams (rows)."""
    from .theory import normalized_steering
    gains, a_r, _ = normalized_steering(channel)
    proj = beams.conj() @ a_r.T          # (n, L): w^H a_r per path
    return np.sum((np.abs(gains[None, :] * proj)) ** 2, axis=1)


def write_roc_csv(curves, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "tpr", "fpr", "trials", "p_measurements"])
        for curve in curves:
            for gamma, tpr, fpr in curve.points:
                writer.writerow([repr(gamma), repr(tpr), repr(fpr),
                                 curve.trials, curve.p_measurements])


# ---------------------------------------------------------------------------
# beam-pattern export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatternAnnotation:
    beam_id: int
    main_lobe_angle: float
    interference_azimuth: float | None
    null_depth_db: float | None


def export_patterns(codebook: Codebook, geom: ArrayGeometry,
                    out_dir: str | Path, angles: np.ndarray | None = None,
                    interference_azimuth: float | None = None):
    """Write per-beam angle sweeps plus an annotations file with the
    main-lobe direction and, when an interference azimuth is given, the
    null depth (main-lobe gain minus gain toward the interferer, dB)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if angles is None:
        angles = np.linspace(0.0, math.pi, 721)
    pattern_path = out_dir / "patterns.csv"
    annot_path = out_dir / "pattern_annotations.csv"

    annotations = []
    with open(pattern_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam_id", "angle_rad", "gain"])
        for n, beam in enumerate(codebook.beams):
            gains = beam_pattern(beam, geom, angles)
            for a, g in zip(angles, gains):
                writer.writerow([n, repr(float(a)), repr(float(g))])
            peak = int(np.argmax(gains))
            depth = None
            if interference_azimuth is not None:
                g_int = float(beam_pattern(beam, geom,
                                           np.array([interference_azimuth]))[0])
                main = float(gains[peak])
                depth = (10.0 * math.log10(main / g_int)
                         if g_int > 0 else math.inf)
            annotations.append(PatternAnnotation(
                beam_id=n, main_lobe_angle=float(angles[peak]),
                interference_azimuth=interference_azimuth,
                null_depth_db=depth))

    with open(annot_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam_id", "main_lobe_angle_rad",
                         "interference_azimuth_rad", "null_depth_db"])
        for a in annotations:
            writer.writerow([
                a.beam_id, repr(a.main_lobe_angle),
                "" if a.interference_azimuth is None else repr(a.interference_azimuth),
                "" if a.null_depth_db is None else _fmt(a.null_depth_db)])
    return pattern_path, annot_path, annotations
