"""Empirical scale/wavelet filters (Meyer-type transitions) on a frequency grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bands import BandPlan, to_normalized

DEFAULT_GAMMA = 0.01


def beta(x):
    """Transition polynomial ``x^4 (35 - 84x + 70x^2 - 20x^3)`` clamped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x ** 4 * (35 - 84 * x + 70 * x ** 2 - 20 * x ** 3)


def gamma_bound(boundaries) -> float:
    """``min_n (w[n+1] - w[n]) / (w[n+1] + w[n])`` over positive boundaries."""
    w = np.asarray(boundaries, dtype=float)
    w = w[w > 0]
    if len(w) < 2:
        raise ValueError("need at least two positive boundaries")
    if np.any(np.diff(w) < 0):
        raise ValueError("boundaries must be increasing")
    return float(np.min(np.diff(w) / (w[1:] + w[:-1])))


def choose_gamma(boundaries, default: float = DEFAULT_GAMMA) -> float:
    """Transition ratio: ``min(default, 0.9 * bound)``.

    Raises if two boundaries coincide, since no positive ratio then keeps
    transitions disjoint.
    """
    bound = gamma_bound(boundaries)
    if bound <= 0:
        raise ValueError("degenerate boundaries: zero-width band")
    return min(default, 0.9 * bound)


@dataclass(frozen=True)
class FilterBank:
    """Real filter gains on the one-sided grid ``0, df, ..., fs/2``.

    Row ``p - 1`` holds band ``p``: row 0 is the scale function, the rest
    are wavelets.  The last wavelet has no upper transition and stays at 1
    up to Nyquist.
    """

    plan: BandPlan
    gamma: float
    resolution: float
    fs: float
    gains: np.ndarray  # (K, n_half)

    @property
    def n_bands(self) -> int:
        return self.gains.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.gains.shape[1]) * self.resolution

    @property
    def grid_size(self) -> int:
        return int(round(self.fs / self.resolution))

    def full(self, p: int) -> np.ndarray:
        """Gain of band ``p`` on the full two-sided DFT grid (fftfreq order)."""
        n = self.grid_size
        g = self.gains[p - 1]
        idx = np.arange(n)
        return g[np.minimum(idx, n - idx)]

    def to_csv(self, path) -> None:
        """Write ``frequency_hz, filter_index, gain`` rows for plotting."""
        f = self.frequencies
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency_hz", "filter_index", "gain"])
            for p in range(1, self.n_bands + 1):
                for fk, gk in zip(f, self.gains[p - 1]):
                    w.writerow([f"{fk:.12g}", p, f"{gk:.12g}"])


def _lower_edge(w, wn, gamma):
    """sin-shaped rise around ``wn``: 0 below, 1 above the transition."""
    x = (w - (1 - gamma) * wn) / (2 * gamma * wn)
    return np.sin(np.pi / 2 * beta(x))


def _upper_edge(w, wn, gamma):
    x = (w - (1 - gamma) * wn) / (2 * gamma * wn)
    # cos(pi/2) is not exactly zero in floating point
    return np.where(x >= 1, 0.0, np.cos(np.pi / 2 * beta(x)))


def build_filterbank(plan: BandPlan, gamma: float, resolution: float, fs: float | None = None) -> FilterBank:
    """Sample the scale function and wavelets at every grid frequency up to fs/2.

    ``resolution`` must divide ``fs`` into an integer grid.
    """
    fs = plan.fs if fs is None else fs
    n_grid = fs / resolution
    if abs(n_grid - round(n_grid)) > 1e-6 * n_grid:
        raise ValueError("resolution must divide fs into an integer grid")
    n_grid = int(round(n_grid))
    bounds = to_normalized(plan, fs)
    if gamma <= 0 or gamma >= gamma_bound(bounds):
        raise ValueError(f"gamma={gamma} violates the tight-support bound")

    w = 2 * np.pi * np.arange(n_grid // 2 + 1) / n_grid
    K = plan.n_bands
    gains = np.zeros((K, len(w)))
    # transitions are disjoint, so each band is 1 between its two transitions
    # and only the few grid points inside a transition need the beta polynomial
    lo_idx = np.searchsorted(w, (1 - gamma) * bounds[1:K], side="right")
    hi_idx = np.searchsorted(w, (1 + gamma) * bounds[1:K], side="left")
    starts = np.concatenate([[0], hi_idx])
    stops = np.concatenate([lo_idx, [len(w)]])
    for p in range(1, K + 1):
        gains[p - 1, starts[p - 1]:stops[p - 1]] = 1.0
    for n in range(1, K):
        sl = slice(lo_idx[n - 1], hi_idx[n - 1])
        gains[n - 1, sl] = _upper_edge(w[sl], bounds[n], gamma)
        gains[n, sl] = _lower_edge(w[sl], bounds[n], gamma)
    return FilterBank(plan, gamma, fs / n_grid, fs, gains)


def filter_gains(plan: BandPlan, gamma: float, freqs, fs: float | None = None) -> np.ndarray:
    """Gains of every band at arbitrary frequencies in [0, fs/2], shape (K, len(freqs)).

    Agrees with :func:`build_filterbank` on its grid points.
    """
    fs = plan.fs if fs is None else fs
    w = 2 * np.pi * np.abs(np.asarray(freqs, dtype=float)) / fs
    bounds = to_normalized(plan, fs)
    K = plan.n_bands
    inner = bounds[1:K]
    cols = np.arange(len(w))
    gains = np.zeros((K, len(w)))
    band = np.searchsorted(inner, w, side="left")
    gains[band, cols] = 1.0
    for j in (band - 1, band):
        ok = (j >= 0) & (j < K - 1)
        jj, cc = j[ok], cols[ok]
        wn = inner[jj]
        t = ((1 - gamma) * wn < w[cc]) & (w[cc] < (1 + gamma) * wn)
        jj, cc, wn = jj[t], cc[t], wn[t]
        gains[jj, cc] = _upper_edge(w[cc], wn, gamma)
        gains[jj + 1, cc] = _lower_edge(w[cc], wn, gamma)
    return gains


def partition_deviation(bank: FilterBank) -> float:
    """Largest ``| sum_p |filter_p|^2 - 1 |`` over the grid."""
    return float(np.max(np.abs(np.sum(bank.gains ** 2, axis=0) - 1.0)))
