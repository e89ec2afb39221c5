"""DFT analysis/synthesis and the Dirichlet interpolation kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import SampledWindow


@dataclass(frozen=True)
class Spectrum:
    """Complex DFT coefficients on a uniform grid.

    ``n_samples`` is the length of the time window the spectrum was taken
    from.  For a plain DFT it equals the grid size; a refined spectrum has
    ``grid_size = P * n_samples``.
    """

    coefficients: np.ndarray
    fs: float
    n_samples: int

    @property
    def grid_size(self) -> int:
        return len(self.coefficients)

    @property
    def resolution(self) -> float:
        return self.fs / self.grid_size

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def frequencies(self) -> np.ndarray:
        """Signed bin frequencies in Hz (numpy fftfreq ordering)."""
        return np.fft.fftfreq(self.grid_size, d=1.0 / self.fs)


def dft(window: SampledWindow) -> Spectrum:
    """Unnormalised forward DFT, ``X[k] = sum_n x[n] exp(-j 2 pi k n / N)``."""
    if window.n < 2:
        raise ValueError("need at least two samples")
    return Spectrum(np.fft.fft(window.samples), window.fs, window.n)


def idft(spectrum: Spectrum, start_time: float = 0.0) -> SampledWindow:
    """Inverse DFT with the 1/N factor; the imaginary residue is dropped."""
    x = np.fft.ifft(spectrum.coefficients)
    return SampledWindow(spectrum.fs, np.real(x), start_time)


def dirichlet(q, r, n: int, n_refined: int) -> np.ndarray:
    """Measurement-matrix entry linking coarse bin ``q`` to refined bin ``r``.

    ``D = sin(pi N x) / (N sin(pi x)) * exp(-j pi (N-1) x)`` with
    ``x = q/N - r/N'``, which is the normalised geometric sum
    ``(1/N) sum_n exp(-j 2 pi n x)``.  ``q`` and ``r`` are frequency
    indices; the kernel is periodic so any integer offset of N (resp. N')
    is equivalent.  ``r`` may be fractional (off-grid atoms).

    Where ``x`` is an integer the removable singularity is replaced by its
    limit, which is exactly 1.
    """
    q = np.asarray(q)
    r = np.asarray(r)
    if np.issubdtype(q.dtype, np.integer) and np.issubdtype(r.dtype, np.integer) \
            and n_refined % n == 0:
        # exact rational offset: x = (q P - r) / N'
        p = n_refined // n
        m = np.mod(q * p - r, n_refined)
        x = m / n_refined
        singular = m == 0
    else:
        x = np.mod(q / n - r / n_refined, 1.0)
        singular = np.minimum(x, 1.0 - x) < 1e-13
        x = np.where(x > 1.0 - 1e-13, 0.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.sin(np.pi * n * x) / (n * np.sin(np.pi * x))
        val = ratio * np.exp(-1j * np.pi * (n - 1) * x)
    return np.where(singular, 1.0 + 0.0j, val)


def parseval_discrepancy(window: SampledWindow, spectrum: Spectrum) -> float:
    """Relative mismatch between time-domain and frequency-domain energy."""
    e_time = float(np.sum(np.abs(window.samples) ** 2))
    e_freq = float(np.sum(np.abs(spectrum.coefficients) ** 2)) / spectrum.grid_size
    if e_time == 0.0:
        return abs(e_freq)
    return abs(e_time - e_freq) / e_time


def phasors(w, n: int, block: int = 64) -> np.ndarray:
    """``exp(1j * w[..., None] * arange(n))`` from two small exponential tables.

    Writing ``t = block * a + b`` turns the N-point evaluation into one
    complex product per sample; the error stays at rounding level.
    """
    w = np.asarray(w, dtype=float)
    n_hi = -(-n // block)
    lo = np.exp(1j * w[..., None] * np.arange(block))
    hi = np.exp(1j * w[..., None] * (block * np.arange(n_hi)))
    out = hi[..., :, None] * lo[..., None, :]
    return out.reshape(*w.shape, n_hi * block)[..., :n]
