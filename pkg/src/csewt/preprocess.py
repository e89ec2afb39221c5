"""Transient detection, window segmentation and fundamental estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .signals import SampledWindow
from .spectral import phasors

THRESHOLD_RATIO = 0.03
NOMINAL_F1 = 50.0
SEARCH_BAND = (40.0, 70.0)


@dataclass(frozen=True)
class Segment:
    start: int
    length: int
    f1: float
    fs: float

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def duration(self) -> float:
        return self.length / self.fs

    @property
    def cycles(self) -> float:
        return self.duration * self.f1


@dataclass(frozen=True)
class SegmentPlan:
    boundaries: tuple[int, ...]  # includes 0 and N
    segments: tuple[Segment, ...]

    @property
    def total_cycles(self) -> float:
        return sum(s.cycles for s in self.segments)


def highband_envelope(window: SampledWindow) -> np.ndarray:
    """Magnitude of the analytic signal of everything at or above fs/4."""
    x = np.fft.fft(window.samples)
    f = np.abs(np.fft.fftfreq(window.n, d=1.0 / window.fs))
    x[f < window.fs / 4] = 0.0
    # one-siding: keep positive frequencies doubled (DC and Nyquist are already zero)
    x[np.fft.fftfreq(window.n) < 0] = 0.0
    return np.abs(np.fft.ifft(2 * x))


def detect_transients(u: SampledWindow, i: SampledWindow, guard: int | None = None,
                      ratio: float = THRESHOLD_RATIO) -> list[int]:
    """Sample indices where the high-band envelope first exceeds ``ratio`` of the amplitude.

    The reference amplitude of each channel is ``sqrt(2) * RMS``; either
    channel may trigger.  ``guard`` samples at each end of the window are
    ignored, since the circular transform makes the window edges ring
    like a step (default: one nominal fundamental period).  Later
    up-crossings open new boundaries only when at least one period after
    the previous one.

    The crossing leads the step, so each boundary is moved to the peak of
    the envelope within the next period.  A step between samples ``m - 1``
    and ``m`` peaks symmetrically about ``m - 1/2``; the later of the two
    largest neighbours is returned, i.e. the first sample after the step.
    """
    if u.n != i.n or u.fs != i.fs:
        raise ValueError("voltage and current windows differ in length or rate")
    period = int(round(u.fs / NOMINAL_F1))
    guard = period if guard is None else guard
    over = np.zeros(u.n, dtype=bool)
    level = np.zeros(u.n)
    for w in (u, i):
        amp = math.sqrt(2.0) * math.sqrt(float(np.mean(w.samples ** 2)))
        if amp == 0:
            continue
        env = highband_envelope(w) / amp
        over |= env > ratio
        level += env
    over[:guard] = False
    if guard:
        over[-guard:] = False
    ups = np.flatnonzero(over & ~np.concatenate([[False], over[:-1]]))
    out: list[int] = []
    for idx in ups:
        if not out or idx - out[-1] >= period:
            out.append(int(idx))
    return [_step_sample(level, b, period, guard) for b in out]


def _step_sample(level: np.ndarray, start: int, span: int, guard: int) -> int:
    stop = max(start + 1, min(start + span, len(level) - max(guard, 1)))
    pk = start + int(np.argmax(level[start:stop]))
    if 0 < pk < len(level) - 1 and level[pk + 1] >= level[pk - 1]:
        pk += 1
    return pk


def _interp_bin(X: np.ndarray, k: int) -> float:
    """Fractional peak position from a rectangular-window three-point rule."""
    if not 0 < k < len(X) - 1:
        return float(k)
    side = 1 if X[k + 1] >= X[k - 1] else -1
    a = X[k + side] / X[k]
    return k + side * a / (1 + a)


def _captured(x: np.ndarray, fs: float, freqs) -> float:
    """Energy of ``x`` captured by least squares on real sinusoids at ``freqs``."""
    e = phasors(2 * np.pi * np.asarray(freqs) / fs, len(x))
    B = np.concatenate([e.real, e.imag]).T
    b = B.T @ x
    try:
        coef = np.linalg.solve(B.T @ B, b)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(B, x, rcond=None)
    return float(np.dot(coef, b))


def estimate_fundamental(window: SampledWindow, band=SEARCH_BAND, peak_floor: float = 0.01) -> float:
    """Fundamental frequency of a window.

    Start from the largest DFT bin inside ``band`` with three-point
    interpolation.  Every other spectral peak above ``peak_floor`` of the
    maximum is either a harmonic (modelled at an exact multiple of the
    trial frequency) or a nuisance tone at its interpolated frequency.
    The fundamental is the frequency whose harmonic comb, fitted jointly
    with the nuisance tones, explains the most energy.
    """
    x = np.asarray(window.samples, dtype=float)
    n = len(x)
    X = np.abs(np.fft.rfft(x))
    df = window.fs / n
    k = np.arange(len(X))
    sel = (k * df >= band[0]) & (k * df <= band[1])
    if not sel.any() or X.max() == 0:
        raise ValueError("no dominant component in the fundamental search band")
    k0 = int(k[sel][np.argmax(X[sel])])
    if not 0 < k0 < len(X) - 1 or X[k0] < 4 * np.median(X[1:]):
        raise ValueError("no dominant component in the fundamental search band")
    start = _interp_bin(X, k0) * df

    inner = k[1:-1]
    peaks = inner[(X[inner] > X[inner - 1]) & (X[inner] >= X[inner + 1])
                  & (X[inner] > peak_floor * X[k0])]
    harmonics, nuisance = [], []
    for pk in peaks:
        f = _interp_bin(X, int(pk)) * df
        h = round(f / start)
        if h >= 1 and abs(f - h * start) <= 1.5 * df:
            if h > 1:
                harmonics.append(h)
        else:
            nuisance.append(f)
    orders = np.array([1] + sorted(set(harmonics)), dtype=float)
    # keep the fit well posed on very short segments
    limit = max(1, n // 2 - 2)
    if len(orders) + len(nuisance) > limit:
        nuisance = nuisance[: max(0, limit - len(orders))]
    extra = np.array(nuisance)

    def search(cost, centre, reach, xatol=1e-7):
        res = minimize_scalar(cost, bounds=(centre - reach, centre + reach), method="bounded",
                              options={"xatol": xatol})
        return float(res.x)

    def comb_cost(f):
        return -_captured(x, window.fs, np.concatenate([orders * f, extra]))

    f1 = search(comb_cost, start, df)
    # polish each nuisance tone against the comb, then redo the comb
    for j in range(len(extra)):
        def tone_cost(g, j=j):
            e = extra.copy()
            e[j] = g
            return -_captured(x, window.fs, np.concatenate([orders * f1, e]))
        extra[j] = search(tone_cost, extra[j], 0.5 * df, xatol=1e-4)
    if len(extra):
        f1 = search(comb_cost, f1, 0.5 * df)
    return f1


def segment(u: SampledWindow, i: SampledWindow, boundaries, f1: float | None = None) -> SegmentPlan:
    """Split the window at ``boundaries`` and estimate f1 per segment.

    A boundary that would leave a piece shorter than one fundamental
    period is dropped, merging that piece into its neighbour.  With ``f1``
    given no estimation is done.
    """
    n = u.n
    f_all = f1 if f1 is not None else estimate_fundamental(u)
    period = u.fs / f_all
    cuts = [0]
    for b in sorted(int(b) for b in boundaries):
        if b - cuts[-1] >= period and n - b >= period:
            cuts.append(b)
    cuts.append(n)
    segs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if f1 is not None or len(cuts) == 2:
            fa = f_all
        else:
            fa = estimate_fundamental(u.slice(a, b))
        segs.append(Segment(a, b - a, fa, u.fs))
    return SegmentPlan(tuple(cuts), tuple(segs))
