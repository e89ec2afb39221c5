import numpy as np
import pytest

from csewt.bands import classify_band, detect_boundaries_generic, plan_bands, to_normalized
from csewt.spectral import dft

from conftest import FS, case_windows


def test_ten_cycle_plan():
    plan = plan_bands(50.0, 10.0, FS)
    assert (plan.band(1).lower, plan.band(1).upper) == (0.0, 45.0)
    assert (plan.band(2).lower, plan.band(2).upper) == (45.0, 55.0)
    assert (plan.band(4).lower, plan.band(4).upper) == (95.0, 105.0)
    assert plan.band(plan.n_bands).upper == FS / 2
    assert plan.band(plan.n_bands).kind == "interharmonic"


def test_post_swell_half_width():
    plan = plan_bands(50.0, 5.75, FS)
    assert plan.half_width == pytest.approx(8.6957, abs=1e-4)
    assert plan.band(2).lower == pytest.approx(50 - 8.69565, abs=1e-4)


def test_shifted_fundamental_ninth_harmonic():
    plan = plan_bands(50.5, 10.1, FS)
    b = plan.band(18)
    assert b.kind == "harmonic" and b.order == 9
    assert b.center == pytest.approx(454.5)
    assert (b.upper - b.lower) / 2 == pytest.approx(5.0)


def test_classify():
    assert classify_band(2, 20) == ("fundamental", 1)
    assert classify_band(4, 20) == ("harmonic", 2)
    assert classify_band(3, 20) == ("interharmonic", None)
    with pytest.raises(IndexError):
        classify_band(21, 20)


def test_plan_tiles_and_counts():
    plan = plan_bands(50.0, 10.0, FS)
    edges = plan.edges()
    assert edges[0] == 0 and edges[-1] == FS / 2
    assert np.all(np.diff(edges) > 0)
    kinds = [b.kind for b in plan.bands]
    assert kinds.count("fundamental") == 1
    assert kinds.count("harmonic") == 62  # harmonics 2..63 fit below 3200 Hz
    centers = [b.center for b in plan.bands]
    assert np.all(np.diff(centers) > plan.half_width)


def test_locate():
    plan = plan_bands(50.0, 10.0, FS)
    assert plan.locate(70.0) == 3
    assert plan.locate(232.5) == 9
    assert plan.locate(45.0) == 1
    assert plan.locate(3200.0) == plan.n_bands


def test_invalid_plans():
    with pytest.raises(ValueError):
        plan_bands(50.0, 1.5, FS)
    with pytest.raises(ValueError):
        plan_bands(-1.0, 10.0, FS)


def test_normalized_edges():
    plan = plan_bands(50.0, 10.0, FS)
    w = to_normalized(plan)
    assert w[1] == pytest.approx(0.04418, abs=1e-5)
    assert w[-1] == pytest.approx(np.pi)
    assert len(w) == plan.n_bands + 1


def test_generic_two_tones():
    mag = np.zeros(1001)
    mag[200] = 1.0
    mag[600] = 0.8
    b = detect_boundaries_generic(mag, 2)
    assert b[0] == 0 and b[-1] == pytest.approx(np.pi)
    assert b[1] == pytest.approx(0.4 * np.pi)


def test_generic_flat_pads_with_zero():
    b = detect_boundaries_generic(np.ones(100), 3)
    assert len(b) == 4
    assert b[0] == 0 and b[-1] == pytest.approx(np.pi)
    assert np.all(np.diff(b) >= 0)


def test_generic_case_a_separates_tones():
    u, _ = case_windows("A")
    b = detect_boundaries_generic(dft(u), 12)
    tones = 2 * np.pi * np.array([50, 70, 100, 150, 200, 232.5, 250, 300, 350, 369, 400, 450]) / FS
    for lo, hi in zip(b[1:-2], b[2:-1]):
        assert np.sum((tones > lo) & (tones < hi)) == 1
