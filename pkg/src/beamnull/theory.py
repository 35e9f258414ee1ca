"""Closed-form interference quantities and their numerically checkable
guarantees.

For a combining beam w and a multipath inter-BS channel, the mean
interference power over i.i.d.-uniform-phase random transmit beams has
an exact closed form in "multipath space": with unit-norm steering
vectors, per-path coefficients xi_l = gain_l * (w^H a_r,l) and the
Hermitian zero-diagonal coupling matrix of transmit-steering inner
products, the mean power equals conj(xi)^H Sigma conj(xi) where
Sigma = (I + coupling)/M.  Everything here is exercised against Monte
Carlo and dense-eigensolver oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beams import QuantizedBeam
from .channels import InterferenceChannel, array_response
from .kernels import jacobi_eigvalsh

_EIG_TOL = 1e-10


@dataclass(frozen=True)
class MultipathProjection:
    """A beam's footprint on one multipath interference channel.

    ``path_coeffs`` collects the effective per-path receive
    coefficients; ``coupling`` is the L x L Hermitian zero-diagonal
    matrix of transmit-steering cross-correlations; ``covariance`` is
    the transmit-side second moment (I + coupling)/M.
    """

    path_coeffs: np.ndarray      # xi, length L
    coupling: np.ndarray         # L x L, zero diagonal
    covariance: np.ndarray       # (I + coupling) / M
    m: int

    @property
    def z_dim(self) -> int:
        return self.path_coeffs.size

    @property
    def norm_sq(self) -> float:
        """Interference-floor measure: squared 2-norm of the coefficients."""
        return float(np.sum(np.abs(self.path_coeffs) ** 2))


def _beam_vector(w) -> np.ndarray:
    return w.vector if isinstance(w, QuantizedBeam) else np.asarray(w)


def normalized_steering(channel: InterferenceChannel):
    """Unit-norm rx/tx steering vectors and rescaled gains.

    The raw channel matrix sums gain * a_r a_t^H over paths with
    unit-modulus-element steering vectors; rewriting with unit-norm
    vectors multiplies each gain by sqrt(M_r * M_t).  The rescaled form
    is what the closed-form machinery works in.
    """
    m_r = channel.rx_geometry.num_antennas
    m_t = channel.tx_geometry.num_antennas
    scale = math.sqrt(m_r * m_t)
    a_r = np.stack([
        array_response(channel.rx_geometry, p.rx_azimuth, p.rx_elevation)
        / math.sqrt(m_r) for p in channel.paths])
    a_t = np.stack([
        array_response(channel.tx_geometry, p.tx_azimuth, p.tx_elevation)
        / math.sqrt(m_t) for p in channel.paths])
    gains = np.asarray([p.gain * scale for p in channel.paths])
    return gains, a_r, a_t


def build_projection(w, channel: InterferenceChannel) -> MultipathProjection:
    gains, a_r, a_t = normalized_steering(channel)
    vec = _beam_vector(w)
    xi = gains * (a_r @ np.conj(vec))
    coupling = a_t.conj() @ a_t.T
    np.fill_diagonal(coupling, 0.0)
    m_t = channel.tx_geometry.num_antennas
    sigma = (np.eye(len(channel)) + coupling) / m_t
    return MultipathProjection(path_coeffs=xi, coupling=coupling,
                               covariance=sigma, m=m_t)


def expected_interference_closed_form(proj: MultipathProjection) -> float:
    """Mean of |w^H H f|^2 over i.i.d.-uniform-phase random beams f."""
    xi_t = np.conj(proj.path_coeffs)
    val = complex(xi_t.conj() @ (proj.covariance @ xi_t))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"closed form not numerically real: {val}")
    return val.real


def coupling_norm(proj: MultipathProjection) -> float:
    """Spectral norm of the coupling matrix (largest |eigenvalue|)."""
    if proj.z_dim == 1:
        return 0.0
    vals = jacobi_eigvalsh(proj.coupling.astype(np.complex128))
    return float(np.max(np.abs(vals)))


def resolution_factor(proj: MultipathProjection) -> float:
    """Discrimination resolution of the mean-power criterion:
    smallest eigenvalue of (I + coupling) over (1 + ||coupling||_2).

    Equals 1 for a single path or orthogonal transmit steering; raises
    if the transmit-side covariance is not positive definite
    (coincident paths), which is reported rather than masked.
    """
    if proj.z_dim == 1:
        return 1.0
    eye_plus = np.eye(proj.z_dim) + proj.coupling
    vals = jacobi_eigvalsh(eye_plus.astype(np.complex128))
    lam_min = float(vals[0])
    if lam_min <= _EIG_TOL:
        raise ValueError(
            f"transmit covariance not positive definite (min eigenvalue {lam_min:.3e})")
    return lam_min / (1.0 + coupling_norm(proj))


def _require_same_channel(a: MultipathProjection, b: MultipathProjection):
    if a.z_dim != b.z_dim or a.m != b.m or not np.allclose(a.coupling, b.coupling):
        raise ValueError("projections must share one interference channel")


@dataclass(frozen=True)
class OrderingCheck:
    condition_holds: bool    # norm gap below the resolution threshold
    ordering_holds: bool     # closed-form mean powers actually ordered
    resolution: float
    norm_sq_w: float
    norm_sq_w_prime: float


def check_ordering_condition(proj_w: MultipathProjection,
                             proj_w_prime: MultipathProjection) -> OrderingCheck:
    """Test the sufficient condition ||xi||^2 < eta * ||xi'||^2 and the
    mean-power ordering it guarantees."""
    _require_same_channel(proj_w, proj_w_prime)
    eta = resolution_factor(proj_w)
    lhs = proj_w.norm_sq
    rhs = proj_w_prime.norm_sq
    condition = lhs < eta * rhs
    ordering = (expected_interference_closed_form(proj_w)
                < expected_interference_closed_form(proj_w_prime))
    return OrderingCheck(condition_holds=condition, ordering_holds=ordering,
                         resolution=eta, norm_sq_w=lhs, norm_sq_w_prime=rhs)


@dataclass(frozen=True)
class BoundReport:
    eigenvalue_bound_ok: bool      # all |lambda_k(I+coupling) - 1| <= norm
    eigenvalue_margin: float
    sandwich_ok: bool              # quadratic form within spectral sandwich
    sandwich_lower: float
    quadratic_value: float
    sandwich_upper: float


def check_spectrum_bounds(proj: MultipathProjection,
                          tol: float = 1e-9) -> BoundReport:
    """Verify the perturbation bound on the covariance eigenvalues and
    the spectral sandwich on the closed-form quadratic."""
    ell = proj.z_dim
    eye_plus = np.eye(ell) + proj.coupling
    vals = jacobi_eigvalsh(eye_plus.astype(np.complex128))
    norm = coupling_norm(proj)
    dev = float(np.max(np.abs(vals - 1.0)))
    eig_ok = dev <= norm + tol

    nsq = proj.norm_sq
    value = expected_interference_closed_form(proj)
    lower = float(vals[0]) * nsq / proj.m
    upper = (1.0 + norm) * nsq / proj.m
    scale = max(1.0, abs(value))
    sandwich_ok = (lower <= value + tol * scale) and (value <= upper + tol * scale)
    return BoundReport(eigenvalue_bound_ok=eig_ok, eigenvalue_margin=norm - dev,
                       sandwich_ok=sandwich_ok, sandwich_lower=lower,
                       quadratic_value=value, sandwich_upper=upper)


@dataclass(frozen=True)
class AsymptoticsRow:
    m: int
    l: int
    trial: int
    coupling_norm: float
    eta_prime: float


def coupling_norm_asymptotics(m_list, l: int, trials: int,
                              rng: np.random.Generator):
    """Sample transmit angles uniformly from [0, pi] (elevation
    broadside) and tabulate the coupling norm and the pessimistic
    resolution eta' = (1 - norm)/(1 + norm) across array sizes.

    Returns (summary, rows): per-M medians plus every trial record.
    Diagnostic data for the large-array trend, not a proof.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    from .channels import ArrayGeometry, InterferencePath

    rows = []
    summary = []
    for m in m_list:
        geom = ArrayGeometry(m)
        norms = np.empty(trials)
        etas = np.empty(trials)
        for t in range(trials):
            az = rng.uniform(0.0, math.pi, size=l)
            paths = tuple(InterferencePath(gain=1.0, rx_azimuth=0.0,
                                           tx_azimuth=float(a)) for a in az)
            ch = InterferenceChannel(paths, geom, geom)
            proj = build_projection(np.ones(m) / math.sqrt(m), ch)
            norm = coupling_norm(proj)
            norms[t] = norm
            etas[t] = (1.0 - norm) / (1.0 + norm)
            rows.append(AsymptoticsRow(m=m, l=l, trial=t,
                                       coupling_norm=norm, eta_prime=etas[t]))
        summary.append((m, float(np.median(norms)), float(np.median(etas))))
    return summary, rows


@dataclass(frozen=True)
class RatioLimitReport:
    ratio: float                 # closed-form mean-power ratio
    norm_ratio: float            # large-array limit of the ratio
    gap: float
    sandwich_low: float
    sandwich_high: float
    within_sandwich: bool


def check_ratio_limit(proj_w: MultipathProjection,
                      proj_w_prime: MultipathProjection,
                      tol: float = 1e-9) -> RatioLimitReport:
    """Compare the mean-power ratio against its large-array limit
    ||xi||^2/||xi'||^2 and check the coupling-norm sandwich around it."""
    _require_same_channel(proj_w, proj_w_prime)
    num = expected_interference_closed_form(proj_w)
    den = expected_interference_closed_form(proj_w_prime)
    if den <= 0:
        raise ValueError("reference beam has zero mean interference power")
    ratio = num / den
    nr = proj_w.norm_sq / proj_w_prime.norm_sq
    norm = coupling_norm(proj_w)
    if norm < 1.0:
        low = nr * (1.0 - norm) / (1.0 + norm)
        high = nr * (1.0 + norm) / (1.0 - norm)
    else:
        low, high = 0.0, math.inf
    within = (low - tol <= ratio <= high + tol)
    return RatioLimitReport(ratio=ratio, norm_ratio=nr, gap=abs(ratio - nr),
                            sandwich_low=low, sandwich_high=high,
                            within_sandwich=within)
