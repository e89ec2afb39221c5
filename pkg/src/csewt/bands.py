"""Fundamental / harmonic / interharmonic subband partition.

Bands alternate: ``[0, f1 - f1/k]`` (interharmonic), ``[f1 - f1/k, f1 + f1/k]``
(fundamental), ``[f1 + f1/k, 2 f1 - f1/k]`` (interharmonic), ... up to
Nyquist.  Band indices are 1-based so that even ``p = 2h`` is harmonic ``h``
(``h = 1`` being the fundamental) and odd ``p`` is interharmonic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Band:
    index: int
    lower: float
    upper: float
    kind: str  # "fundamental" | "harmonic" | "interharmonic"
    order: int | None = None

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, freq: float) -> bool:
        return self.lower <= freq <= self.upper


@dataclass(frozen=True)
class BandPlan:
    f1: float
    k: float
    fs: float
    bands: tuple[Band, ...]

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def half_width(self) -> float:
        return self.f1 / self.k

    def edges(self) -> np.ndarray:
        """All K+1 band edges in Hz, from 0 to fs/2."""
        return np.array([self.bands[0].lower] + [b.upper for b in self.bands])

    def band(self, p: int) -> Band:
        if not 1 <= p <= self.n_bands:
            raise IndexError(f"band index {p} outside 1..{self.n_bands}")
        return self.bands[p - 1]

    def classify(self, p: int) -> tuple[str, int | None]:
        b = self.band(p)
        return b.kind, b.order

    def locate(self, freq: float) -> int:
        """Index of the band containing ``freq`` (lower band wins on a shared edge)."""
        if not 0 <= freq <= self.fs / 2:
            raise ValueError(f"{freq} Hz outside [0, fs/2]")
        edges = self.edges()
        p = int(np.searchsorted(edges, freq, side="left"))
        return max(p, 1)


def classify_band(p: int, n_bands: int) -> tuple[str, int | None]:
    """Class of band ``p``: even indices are harmonic ``p/2`` (order 1 = fundamental)."""
    if not 1 <= p <= n_bands:
        raise IndexError(f"band index {p} outside 1..{n_bands}")
    if p % 2:
        return "interharmonic", None
    if p == 2:
        return "fundamental", 1
    return "harmonic", p // 2


def plan_bands(f1: float, k: float, fs: float) -> BandPlan:
    """Deterministic subband plan from the fundamental and the cycle count.

    Harmonic bands are emitted while they fit strictly below Nyquist; the
    last interharmonic band absorbs the remainder up to ``fs/2``.
    """
    if f1 <= 0:
        raise ValueError("f1 must be positive")
    if k < 1:
        raise ValueError("k must be at least one cycle")
    half = f1 / k
    if half >= f1 / 2:
        raise ValueError(f"k={k} too small: harmonic bands of half-width {half} Hz overlap")
    nyq = fs / 2
    if f1 + half >= nyq:
        raise ValueError("fundamental band reaches Nyquist")

    edges = [0.0]
    h = 1
    while h * f1 + half < nyq:
        edges += [h * f1 - half, h * f1 + half]
        h += 1
    edges.append(nyq)

    bands = []
    for p, (lo, hi) in enumerate(zip(edges[:-1], edges[1:]), start=1):
        kind, order = classify_band(p, len(edges) - 1)
        bands.append(Band(p, lo, hi, kind, order))
    return BandPlan(f1, k, fs, tuple(bands))


def to_normalized(plan: BandPlan, fs: float | None = None) -> np.ndarray:
    """Band edges mapped to normalised angular frequency ``2 pi f / fs`` in [0, pi]."""
    fs = plan.fs if fs is None else fs
    return 2 * np.pi * plan.edges() / fs


def detect_boundaries_generic(spectrum, n_modes: int) -> np.ndarray:
    """Classic EWT boundary detection on a magnitude spectrum.

    Keeps the ``n_modes`` largest local maxima of ``|X|`` over
    ``[0, pi]`` (padding with zero frequency when there are too few) and
    returns ``[0, midpoints..., pi]``, i.e. ``n_modes + 1`` boundaries.

    ``spectrum`` may be a :class:`~csewt.spectral.Spectrum` or a
    one-sided magnitude array sampled uniformly on ``[0, pi]``.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if hasattr(spectrum, "coefficients"):
        half = spectrum.grid_size // 2 + 1
        mag = np.abs(spectrum.coefficients[:half])
        omega = 2 * np.pi * np.arange(half) / spectrum.grid_size
    else:
        mag = np.abs(np.asarray(spectrum))
        omega = np.linspace(0, np.pi, len(mag))

    interior = np.arange(1, len(mag) - 1)
    is_max = (mag[interior] > mag[interior - 1]) & (mag[interior] >= mag[interior + 1])
    idx = interior[is_max]
    idx = idx[np.argsort(-mag[idx], kind="stable")][:n_modes]
    peaks = np.sort(omega[idx])
    if len(peaks) < n_modes:
        peaks = np.concatenate([np.zeros(n_modes - len(peaks)), peaks])
    mids = 0.5 * (peaks[:-1] + peaks[1:])
    return np.concatenate([[0.0], mids, [np.pi]])
