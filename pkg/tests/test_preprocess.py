import numpy as np
import pytest

from csewt.preprocess import detect_transients, estimate_fundamental, highband_envelope, segment
from csewt.signals import SampledWindow

from conftest import FS, case_windows, tone_pair
from csewt.signals import synthesize


def test_steady_case_a_has_no_transient():
    for seed in range(5):
        u, i = case_windows("A", snr=60.0, seed=seed)
        assert detect_transients(u, i) == []


@pytest.mark.parametrize("case,event", [("C", 736), ("D", 832)])
def test_event_boundary_noiseless(case, event):
    u, i = case_windows(case)
    found = detect_transients(u, i)
    assert len(found) == 1
    assert abs(found[0] - event) <= 64
    # the step itself is located to the sample
    assert found[0] == event


def test_weak_high_band_content_does_not_trigger():
    n = np.arange(1280)
    x = np.sin(2 * np.pi * 50 * n / FS) + 0.02 * np.sin(2 * np.pi * 2000 * n / FS)
    w = SampledWindow(FS, x)
    assert detect_transients(w, w) == []
    assert highband_envelope(w)[200:1000].max() == pytest.approx(0.02, rel=0.02)


def test_mismatched_channels_rejected():
    with pytest.raises(ValueError):
        detect_transients(SampledWindow(FS, np.zeros(10)), SampledWindow(FS, np.zeros(11)))


def test_pure_tone_frequency():
    u, _ = synthesize(tone_pair(50.0, kind="fundamental", order=1), FS, 0.2)
    assert estimate_fundamental(u) == pytest.approx(50.0, abs=0.01)


def test_shifted_fundamental_noiseless():
    u, _ = case_windows("E", f1=50.3)
    assert estimate_fundamental(u) == pytest.approx(50.3, abs=0.01)


def test_fundamental_under_noise():
    errs = [abs(estimate_fundamental(case_windows("A", snr=60.0, seed=s)[0]) - 50.0) for s in range(100)]
    assert np.mean(errs) < 0.005


def test_no_fundamental_raises():
    with pytest.raises(ValueError):
        estimate_fundamental(SampledWindow(FS, np.zeros(1280)))


def test_segment_without_boundaries():
    u, i = case_windows("A")
    plan = segment(u, i, [], f1=50.0)
    assert plan.boundaries == (0, 1280)
    assert plan.segments[0].cycles == pytest.approx(10.0)


def test_segment_at_swell():
    u, i = case_windows("C")
    plan = segment(u, i, [736], f1=50.0)
    assert [s.cycles for s in plan.segments] == pytest.approx([5.75, 4.25])
    assert plan.total_cycles == pytest.approx(10.0, abs=1e-9)


def test_short_piece_is_merged():
    u, i = case_windows("A")
    plan = segment(u, i, [int(0.002 * FS)], f1=50.0)
    assert len(plan.segments) == 1


def test_segments_estimate_their_own_f1():
    u, i = case_windows("D")
    plan = segment(u, i, [832])
    assert len(plan.segments) == 2
    for s in plan.segments:
        assert s.f1 == pytest.approx(50.0, abs=0.01)
    assert sum(s.length for s in plan.segments) == 1280
