import math

import numpy as np
import pytest

from csewt.harness import load_scenario
from csewt.signals import SignalSpec, ToneSpec, synthesize

FS = 6400.0
DURATION = 0.2


def case_spec(case="A", f1=None, snr=math.inf, seed=0, phase=0.0) -> SignalSpec:
    cfg = load_scenario(case, phase=phase, snr_db=snr)
    return cfg.spec(f1 if f1 is not None else float(cfg.signal["f1"]), snr, seed)


def case_windows(case="A", **kw):
    return synthesize(case_spec(case, **kw), FS, DURATION)


def tone_pair(freq=50.0, amp=1.0, dphi=0.0, kind="interharmonic", order=None, f1=50.0):
    v = (ToneSpec(amp, freq, 0.0, kind, order),)
    c = (ToneSpec(amp, freq, -dphi, kind, order),)
    return SignalSpec(v, c, f1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion_log(request):
    lines = request.config.stash.setdefault(_LINES, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
