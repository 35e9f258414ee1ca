import cmath
import math

import numpy as np
import pytest

from beamnull.beams import (Codebook, PhaseSet, QuantizedBeam,
                            beam_from_indices, beam_pattern,
                            beam_training_select, beamforming_gain,
                            beamsteering_codebook, load_codebook_csv,
                            null_steering_beam, save_codebook_csv)
from beamnull.channels import ArrayGeometry, array_response


@pytest.mark.parametrize("bits", range(1, 7))
def test_phase_set_values_in_half_open_interval(bits):
    ps = PhaseSet(bits)
    assert np.all(ps.values > -math.pi)
    assert np.all(ps.values <= math.pi)
    steps = np.diff(ps.values)
    assert np.allclose(steps, 2 * math.pi / ps.size)


@pytest.mark.parametrize("bits", range(1, 7))
def test_phase_set_zero_sum(bits):
    ps = PhaseSet(bits)
    assert abs(np.sum(np.exp(1j * ps.values))) < 1e-12


def test_phase_set_quantize_is_identity_on_grid():
    ps = PhaseSet(4)
    assert np.array_equal(ps.quantize(ps.values), np.arange(16))


def test_phase_set_quantize_wraps_circularly():
    ps = PhaseSet(3)
    # -pi and +pi are the same phase; both map to the +pi slot
    assert ps.quantize(-math.pi) == ps.quantize(math.pi)


def test_beam_constant_phase_r1():
    ps = PhaseSet(1)
    beam = beam_from_indices([0, 0, 0, 0], 4, ps)
    assert np.allclose(beam.vector, 0.5 * np.ones(4))


def test_beam_single_antenna():
    beam = beam_from_indices([3], 1, PhaseSet(2))
    assert abs(abs(beam.vector[0]) - 1.0) < 1e-12


def test_beam_unit_norm_random():
    rng = np.random.default_rng(0)
    ps = PhaseSet(4)
    for _ in range(30):
        idx = rng.integers(0, 16, size=16)
        beam = QuantizedBeam(idx, ps)
        assert abs(np.linalg.norm(beam.vector) - 1.0) < 1e-12
        assert np.max(np.abs(np.abs(beam.vector) - 0.25)) < 1e-12


def test_beam_index_out_of_range():
    with pytest.raises(ValueError):
        beam_from_indices([0, 16], 2, PhaseSet(4))
    with pytest.raises(ValueError):
        beam_from_indices([0, 0, 0], 2, PhaseSet(4))


def test_beamforming_gain_coherent_combining():
    ps = PhaseSet(4)
    geom = ArrayGeometry(16)
    az = math.acos(0.25)
    h = array_response(geom, az)
    beam = QuantizedBeam(ps.quantize(np.angle(h)), ps)
    # phases representable exactly on the grid -> full array gain
    assert beamforming_gain(beam, h) == pytest.approx(16.0, abs=1e-9)


def test_beamforming_gain_zero_channel():
    beam = beam_from_indices([0, 0], 2, PhaseSet(1))
    assert beamforming_gain(beam, np.zeros(2, dtype=complex)) == 0.0


def test_beamforming_gain_matches_bruteforce():
    rng = np.random.default_rng(1)
    ps = PhaseSet(4)
    for _ in range(20):
        idx = rng.integers(0, 16, size=8)
        beam = QuantizedBeam(idx, ps)
        h = rng.normal(size=8) + 1j * rng.normal(size=8)
        acc = sum(complex(beam.vector[m]).conjugate() * complex(h[m])
                  for m in range(8))
        assert beamforming_gain(beam, h) == pytest.approx(abs(acc) ** 2,
                                                          rel=1e-12)


def test_beamforming_gain_dimension_mismatch():
    beam = beam_from_indices([0, 0], 2, PhaseSet(1))
    with pytest.raises(ValueError):
        beamforming_gain(beam, np.zeros(3, dtype=complex))


def test_beam_training_selects_matched_beam():
    # midpoint-grid steering phases are odd multiples of pi/16, exactly
    # representable at r = 5
    ps = PhaseSet(5)
    geom = ArrayGeometry(16)
    cb = beamsteering_codebook(16, 16, ps)
    h = array_response(geom, math.acos(-1 + 9 / 16))   # on-grid direction
    idx, gain = beam_training_select(cb, h)
    assert idx == 4
    assert gain == pytest.approx(16.0, abs=1e-9)


def test_beam_training_tie_breaks_to_first():
    ps = PhaseSet(2)
    b = beam_from_indices([0, 1, 2, 3], 4, ps)
    cb = Codebook((b, b))
    idx, _ = beam_training_select(cb, np.ones(4, dtype=complex))
    assert idx == 0


def test_beam_training_matches_exhaustive_scan():
    rng = np.random.default_rng(2)
    ps = PhaseSet(4)
    cb = beamsteering_codebook(16, 16, ps)
    geom = ArrayGeometry(16)
    for _ in range(20):
        h = array_response(geom, rng.uniform(0, math.pi)) * \
            complex(rng.normal(), rng.normal())
        idx, gain = beam_training_select(cb, h)
        gains = [beamforming_gain(b, h) for b in cb]
        assert idx == int(np.argmax(gains))
        assert gain == pytest.approx(max(gains), rel=1e-12)


def test_steering_codebook_cross_gains_vanish():
    cb = beamsteering_codebook(16, 16, PhaseSet(8))
    mat = cb.matrix
    cross = np.abs(mat.conj() @ mat.T) ** 2
    np.fill_diagonal(cross, 0.0)
    assert cross.max() < 1e-3      # of the unit self-gain


def test_steering_codebook_single_beam_is_broadside():
    cb = beamsteering_codebook(8, 1, PhaseSet(6))
    geom = ArrayGeometry(8)
    gains = beam_pattern(cb[0], geom, np.linspace(0, math.pi, 721))
    peak_angle = np.linspace(0, math.pi, 721)[int(np.argmax(gains))]
    assert abs(math.cos(peak_angle)) < 0.02


def test_steering_codebook_peaks_near_design_angles():
    n, m = 16, 16
    cb = beamsteering_codebook(m, n, PhaseSet(6))
    geom = ArrayGeometry(m)
    cos_grid = np.linspace(-1, 1, 4001)
    angles = np.arccos(cos_grid)
    for k, beam in enumerate(cb):
        design = -1 + (2 * k + 1) / n
        gains = beam_pattern(beam, geom, angles)
        found = cos_grid[int(np.argmax(gains))]
        assert abs(found - design) <= 2.0 / n


def test_pattern_matched_beam_reaches_full_gain():
    ps = PhaseSet(4)
    m = 16
    az = math.acos(0.25)    # representable exactly at r=4
    geom = ArrayGeometry(m)
    beam = QuantizedBeam(ps.quantize(np.angle(array_response(geom, az))), ps)
    gain = beam_pattern(beam, geom, np.array([az]))[0]
    assert gain == pytest.approx(m, abs=1e-9)


def test_pattern_all_ones_beam_peaks_broadside():
    ps = PhaseSet(1)
    beam = beam_from_indices([0] * 8, 8, ps)
    geom = ArrayGeometry(8)
    g = beam_pattern(beam, geom, np.array([math.pi / 2, 0.0, math.pi]))
    assert g[0] > g[1] and g[0] > g[2]


def test_pattern_energy_conservation():
    # integral of the pattern over the direction cosine equals 2 for any
    # unit-norm beam (numerical quadrature oracle)
    rng = np.random.default_rng(3)
    ps = PhaseSet(4)
    geom = ArrayGeometry(16)
    cos_grid = np.linspace(-1, 1, 20001)
    angles = np.arccos(cos_grid)
    for _ in range(5):
        beam = QuantizedBeam(rng.integers(0, 16, size=16), ps)
        gains = beam_pattern(beam, geom, angles)
        integral = np.trapezoid(gains, cos_grid)
        assert integral == pytest.approx(2.0, rel=1e-4)


def test_pattern_rejects_empty_grid():
    beam = beam_from_indices([0, 0], 2, PhaseSet(1))
    with pytest.raises(ValueError):
        beam_pattern(beam, ArrayGeometry(2), np.array([]))


def test_null_steering_beam_depth():
    ps = PhaseSet(6)
    geom = ArrayGeometry(16)
    main, null = math.acos(0.6), math.acos(0.148)
    beam = null_steering_beam(16, main, null, ps, geom)
    pattern = beam_pattern(beam, geom, np.linspace(0, math.pi, 2001))
    g_null = beam_pattern(beam, geom, np.array([null]))[0]
    depth = 10 * math.log10(pattern.max() / g_null)
    assert depth >= 30.0


def test_codebook_csv_round_trip(tmp_path):
    ps = PhaseSet(4)
    cb = beamsteering_codebook(8, 4, ps)
    path = tmp_path / "codebook.csv"
    save_codebook_csv(cb, path)
    loaded = load_codebook_csv(path, ps)
    assert len(loaded) == 4
    for a, b in zip(cb, loaded):
        assert np.array_equal(a.phase_indices, b.phase_indices)
