"""Spectrum refinement by sparse recovery over a Dirichlet-kernel dictionary.

The coarse N-point DFT ``S`` of voltage and current is modelled as
``S ~ D alpha`` where column ``r`` of ``D`` is the DFT of a unit complex
exponential at refined bin ``r`` (resolution ``fs / (P N)``), normalised by
``1/N``.  ``alpha`` is recovered with orthogonal matching pursuit, the two
channels sharing one support.  Atoms come in conjugate pairs so the
recovered spectrum stays that of a real signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import least_squares

from .bands import BandPlan
from .spectral import Spectrum, dirichlet, phasors

DEFAULT_P = 10
PEAK_FLOOR = 0.005
DENSE_LIMIT = 2048
FALSE_ALARM = 1e-3
# frequency refit evaluations after each selection round
REFIT_EVALS = 5
# per-band picks per iteration must score this fraction of the best one
BATCH_RATIO = 0.25


@dataclass(frozen=True)
class MeasurementMatrix:
    """Lazily evaluated ``N x P N`` Dirichlet dictionary."""

    n: int
    p: int

    @property
    def n_refined(self) -> int:
        return self.n * self.p

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.n_refined

    @cached_property
    def _kernel(self) -> np.ndarray:
        # D[q, r] only depends on (q P - r) mod N'
        m = np.arange(self.n_refined)
        return dirichlet(0, -m, self.n, self.n_refined)

    def entry(self, q: int, r: int) -> complex:
        return complex(dirichlet(q, r, self.n, self.n_refined))

    def columns(self, r) -> np.ndarray:
        """Columns for refined positions ``r``; fractional positions are allowed."""
        r = np.atleast_1d(np.asarray(r))
        q = np.arange(self.n)[:, None]
        if np.issubdtype(r.dtype, np.integer):
            return self._kernel[np.mod(q * self.p - r[None, :], self.n_refined)]
        return dirichlet(q, r[None, :].astype(float), self.n, self.n_refined)

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise MemoryError(f"dense dictionary only materialised for N <= {DENSE_LIMIT}")
        return self.columns(np.arange(self.n_refined))

    def correlate(self, residual: np.ndarray) -> np.ndarray:
        """``D^H R`` for every refined bin, via a zero-padded FFT.

        ``sum_q conj(D[q, r]) R[q]`` equals the N'-point DFT of the
        time-domain ``ifft(R)`` at bin ``r``.
        """
        x = np.fft.ifft(residual, axis=0)
        return np.fft.fft(x, n=self.n_refined, axis=0)


def build_measurement_matrix(n: int, p: int) -> MeasurementMatrix:
    if int(p) != p:
        raise ValueError("interpolation factor must be an integer")
    if n < 2 or p < 1:
        raise ValueError("need N >= 2 and P >= 1")
    return MeasurementMatrix(int(n), int(p))


@dataclass(frozen=True)
class SupportPolicy:
    """Which refined bins OMP may draw atoms from.

    ``groups`` are positive-frequency refined index sets.  With
    ``independent`` set, every group is solved on its own against the
    full observation (at most ``atoms_per_group`` pairs each) and the
    results are merged; otherwise the union of groups is one search set.
    ``pool`` holds groups that were gated out; a joint search admits one
    once the residual shows a coarse peak inside it.
    """

    name: str
    groups: tuple[np.ndarray, ...]
    independent: bool = False
    atoms_per_group: int = 1
    coarse_points: tuple[tuple[int, ...], ...] = ()
    pool: tuple[np.ndarray, ...] = ()
    floor: float = PEAK_FLOOR
    batch: float = 0.0

    def candidates(self) -> np.ndarray:
        if not self.groups:
            return np.array([], dtype=int)
        return np.unique(np.concatenate(self.groups))


def coarse_peaks(u: Spectrum, i: Spectrum, floor: float = PEAK_FLOOR) -> np.ndarray:
    """Positive-frequency local maxima of ``sqrt(|U|^2 + |I|^2)`` above ``floor * max``."""
    S = np.stack([u.coefficients, i.coefficients], axis=1)
    return _peaks(S, floor * _peak_scale(S))


def _peak_scale(S: np.ndarray) -> float:
    half = S.shape[0] // 2
    mag = np.sqrt(np.sum(np.abs(S[1:half + 1]) ** 2, axis=1))
    return float(mag.max()) if len(mag) else 0.0


def _peaks(S: np.ndarray, level: float) -> np.ndarray:
    half = S.shape[0] // 2
    mag = np.sqrt(np.sum(np.abs(S[:half + 1]) ** 2, axis=1))
    if half < 2 or mag.max() == 0:
        return np.array([], dtype=int)
    k = np.arange(1, half)
    is_peak = (mag[k] > mag[k - 1]) & (mag[k] >= mag[k + 1]) & (mag[k] > level)
    return k[is_peak]


@dataclass(frozen=True)
class BandSupport:
    """Refined index sets of every band of a plan (CSEWT search space)."""

    plan: BandPlan
    resolution: float
    n_refined: int
    band_indices: tuple[np.ndarray, ...]

    def gate(self, u: Spectrum, i: Spectrum, floor: float = PEAK_FLOOR) -> SupportPolicy:
        """Keep bands that hold a coarse peak; the others wait in the pool."""
        peaks_hz = coarse_peaks(u, i, floor) * u.resolution
        groups, pool = [], []
        for band, idx in zip(self.plan.bands, self.band_indices):
            if not len(idx):
                continue
            hit = np.any((peaks_hz >= band.lower) & (peaks_hz <= band.upper))
            (groups if hit else pool).append(idx)
        return SupportPolicy("csewt", tuple(groups), pool=tuple(pool), floor=floor, batch=BATCH_RATIO)

    def policy(self) -> SupportPolicy:
        return SupportPolicy("csewt", tuple(g for g in self.band_indices if len(g)))


def band_restricted_support(plan: BandPlan, resolution: float) -> BandSupport:
    """Map every band to the refined bins inside its edges (positive frequencies, no DC)."""
    n_refined = int(round(plan.fs / resolution))
    nyq = n_refined // 2
    out = []
    for band in plan.bands:
        lo = max(int(math.ceil(band.lower / resolution - 1e-9)), 1)
        hi = min(int(math.floor(band.upper / resolution + 1e-9)), nyq)
        out.append(np.arange(lo, hi + 1))
    return BandSupport(plan, resolution, n_refined, tuple(out))


def csdft_support(u: Spectrum, i: Spectrum, p: int = DEFAULT_P, span: int = 5,
                  floor: float = PEAK_FLOOR) -> SupportPolicy:
    """Per-peak neighbourhoods: each coarse peak and ``span`` bins either side.

    Every coarse point in a neighbourhood is refined on its own into its
    ``P`` refined lines, independently of all other points.
    """
    half = u.grid_size // 2
    peaks = coarse_peaks(u, i, floor)
    neigh = tuple(tuple(int(q) for q in range(pk - span, pk + span + 1) if 1 <= q <= half)
                  for pk in peaks)
    points = sorted({q for nb in neigh for q in nb})
    lo = -(p // 2)
    groups = []
    for q in points:
        r = p * q + np.arange(lo, lo + p)
        groups.append(r[(r >= 1) & (r <= p * half)])
    return SupportPolicy("csdft", tuple(groups), independent=True, atoms_per_group=1,
                         coarse_points=neigh)


@dataclass
class RefinedSpectrum:
    """Sparse high-resolution spectra of the voltage and current windows."""

    alpha: np.ndarray  # (N', 2) complex; column 0 voltage, 1 current
    fs: float
    n_samples: int
    support: np.ndarray  # refined bins carrying an atom (both halves of every pair)
    frequencies: np.ndarray  # refined atom frequencies in Hz (off-grid when refitted)
    residual_norm: np.ndarray  # per channel
    iterations: int
    converged: bool
    history: tuple[float, ...] = ()  # joint residual norm after each selection round

    @property
    def n_refined(self) -> int:
        return self.alpha.shape[0]

    @property
    def resolution(self) -> float:
        return self.fs / self.n_refined

    def channel(self, which: int | str) -> Spectrum:
        col = {"u": 0, "i": 1}.get(which, which)
        return Spectrum(self.alpha[:, col], self.fs, self.n_samples)


def _noise_threshold(m: int, pfa: float = FALSE_ALARM) -> float:
    # max of m Gamma(2, 1) variables exceeds t with probability ~ m (1 + t) e^-t
    t = math.log(max(m, 1) / pfa)
    for _ in range(5):
        t = math.log(max(m, 1) / pfa) + math.log1p(t)
    return t


def _noise_var(residual: np.ndarray) -> np.ndarray:
    half = residual.shape[0] // 2
    mag2 = np.abs(residual[1:half]) ** 2
    if len(mag2) == 0:
        return np.full(residual.shape[1], np.inf)
    return np.median(mag2, axis=0) / math.log(2)


class _Pursuit:
    """OMP state over conjugate atom pairs, kept in the time domain.

    Column ``r`` of the dictionary is the DFT of ``exp(j w n) / N`` with
    ``w = 2 pi r / N'``, so fitting ``S`` with columns is the same least
    squares problem as fitting ``y = ifft(S)`` with complex exponentials.
    Coefficients on exponentials times ``N`` are the refined spectrum.
    """

    def __init__(self, S: np.ndarray, D: MeasurementMatrix):
        self.D = D
        self.n = D.n
        self.nr = D.n_refined
        self.y = np.fft.ifft(S, axis=0)
        self.t = np.arange(self.n)
        self.gap = D.p / 4
        self.history: list[float] = [float(np.linalg.norm(S))]
        self.positions = np.zeros(0)
        self.bounds = np.zeros((0, 2))
        self.beta = np.zeros((0, S.shape[1]), dtype=complex)
        self.E = np.zeros((self.n, 0), dtype=complex)
        self.r = self.y.copy()

    # -- basis bookkeeping
    def _mirrored(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return ~((np.abs(rho) < 1e-9) | (np.abs(rho - self.nr / 2) < 1e-9))

    def freqs(self) -> np.ndarray:
        """Signed atom frequencies in refined-bin units, mirrors after the originals."""
        m = self._mirrored(self.positions)
        return np.concatenate([self.positions, -self.positions[m]])

    def solve(self) -> None:
        if len(self.positions) == 0:
            self.beta = np.zeros((0, self.y.shape[1]), dtype=complex)
            self.E = np.zeros((self.n, 0), dtype=complex)
            self.r = self.y.copy()
            return
        self.E = phasors(2 * np.pi * self.freqs() / self.nr, self.n).T
        EH = self.E.conj().T
        try:
            self.beta = np.linalg.solve(EH @ self.E, EH @ self.y)
        except np.linalg.LinAlgError:
            self.beta, *_ = np.linalg.lstsq(self.E, self.y, rcond=None)
        self.r = self.y - self.E @ self.beta

    def residual_norm(self) -> np.ndarray:
        # frequency-domain norm: ||R|| = sqrt(N) ||r||
        return np.sqrt(self.n) * np.linalg.norm(self.r, axis=0)

    def correlate(self) -> np.ndarray:
        return np.fft.fft(self.r, n=self.nr, axis=0)

    # -- off-grid refinement
    def fit_all(self, max_nfev: int = 200) -> None:
        """Joint least-squares fit of every movable atom frequency within its bounds.

        Variable projection: the amplitudes are eliminated by the linear
        solve, leaving the residual a function of the frequencies alone.
        Neighbouring atoms may not come closer than ``gap`` (a quarter of a
        coarse bin), which keeps the amplitude solve well posed.  The fit
        is kept only if it lowers the residual.  Atoms that land within a
        hair of a grid line are then snapped to it when that is no worse.
        """
        movable = self._mirrored(self.positions)
        if not movable.any():
            return
        lo, hi = self.bounds[:, 0].copy(), self.bounds[:, 1].copy()
        order = np.argsort(self.positions)
        mid = 0.5 * (self.positions[order][1:] + self.positions[order][:-1])
        lo[order[1:]] = np.maximum(lo[order[1:]], mid + self.gap / 2)
        hi[order[:-1]] = np.minimum(hi[order[:-1]], mid - self.gap / 2)
        lo, hi = lo[movable], hi[movable]
        start = self.positions[movable]
        bad = lo >= hi
        lo[bad], hi[bad] = start[bad] - 1e-9, start[bad] + 1e-9
        start = np.clip(start, lo, hi)
        before = float(np.sum(np.abs(self.r) ** 2))
        keep = self.positions.copy()

        def fun(x):
            if not np.array_equal(self.positions[movable], x):
                self.positions = keep.copy()
                self.positions[movable] = x
                self.solve()
            return self.r.view(float).ravel()

        def jac(x):
            # Kaufman's approximation: -P_perp dE/dx beta
            fun(x)
            k = len(self.positions)
            scale = 1j * 2 * np.pi / self.nr * self.t[:, None]
            dpos = scale * self.E[:, :k]
            dneg = -scale * self.E[:, k:]
            m = self._mirrored(self.positions)
            bn = np.zeros_like(self.beta[:k])
            bn[m] = self.beta[k:]
            full = np.zeros((self.n, k), dtype=complex)
            full[:, m] = dneg
            V = dpos[:, None, :] * self.beta[:k].T[None] + full[:, None, :] * bn.T[None]
            V = V[:, :, movable].reshape(self.n, -1)
            EH = self.E.conj().T
            try:
                V = V - self.E @ np.linalg.solve(EH @ self.E, EH @ V)
            except np.linalg.LinAlgError:
                V = V - self.E @ np.linalg.lstsq(self.E, V, rcond=None)[0]
            V = -V.reshape(self.n, -1, int(movable.sum()))
            return np.stack([V.real, V.imag], axis=2).reshape(-1, V.shape[2])

        try:
            res = least_squares(fun, start, jac=jac, bounds=(lo, hi), x_scale=1.0,
                                xtol=1e-10, ftol=1e-12, max_nfev=max_nfev)
            best = res.x
        except (ValueError, np.linalg.LinAlgError):
            best = start
        self.positions = keep.copy()
        self.positions[movable] = best
        self.solve()
        if float(np.sum(np.abs(self.r) ** 2)) > before:
            self.positions = keep
            self.solve()
        self._snap(movable)

    def _snap(self, movable: np.ndarray, tol: float = 1e-6) -> None:
        grid = np.round(self.positions)
        close = movable & (np.abs(grid - self.positions) < tol) & (grid != self.positions)
        if not close.any():
            return
        keep = self.positions.copy()
        before = float(np.sum(np.abs(self.r) ** 2))
        self.positions = np.where(close, grid, keep)
        self.solve()
        if float(np.sum(np.abs(self.r) ** 2)) > before * (1 + 1e-9) + 1e-300:
            self.positions = keep
            self.solve()

    def prune(self, sep: float, rounds: int = 3) -> None:
        """Drop the weaker atom of every pair closer than ``sep``, then refit."""
        for _ in range(rounds):
            k = len(self.positions)
            if k < 2:
                return
            power = np.sum(np.abs(self.beta[:k]) ** 2, axis=1)
            order = np.argsort(self.positions)
            keep = np.ones(k, dtype=bool)
            last = order[0]
            for a in order[1:]:
                if self.positions[a] - self.positions[last] < sep:
                    weak = a if power[a] < power[last] else last
                    keep[weak] = False
                    last = last if weak == a else a
                else:
                    last = a
            if keep.all():
                return
            self.positions = self.positions[keep]
            self.bounds = self.bounds[keep]
            self.solve()
            self.fit_all()

    def add(self, rho: float, lo: float = -np.inf, hi: float = np.inf) -> None:
        self.positions = np.append(self.positions, float(rho))
        self.bounds = np.vstack([self.bounds, [lo, hi]])

    def atoms(self):
        """``(position, coefficient of +f, coefficient of -f or None)`` in refined-spectrum units."""
        k = len(self.positions)
        m = self._mirrored(self.positions)
        neg_rows = np.cumsum(m) - 1
        out = []
        for a in range(k):
            bn = self.beta[k + neg_rows[a]] * self.n if m[a] else None
            out.append((self.positions[a], self.beta[a] * self.n, bn))
        return out


def _grid_sparse(S, D, candidates, gid, groups, tol, limit):
    """Exact answer for spectra made of coarse-grid lines only, else None.

    Closely spaced on-grid tones can mislead the greedy search, since an
    atom between them correlates better than either.  When the largest
    coarse bins alone, placed on their refined lines, already leave a
    residual below ``tol``, that copy is the sparsest exact fit.
    """
    half = D.n // 2
    mag2 = np.sum(np.abs(S) ** 2, axis=1)
    if len(candidates) == 0 or mag2.sum() <= tol ** 2:
        return None
    k = np.arange(1, half + 1)
    pair = mag2[k] + np.where(k < D.n - k, mag2[(D.n - k) % D.n], 0.0)
    order = k[np.argsort(-pair, kind="stable")]
    rest = float(mag2.sum()) - np.cumsum(pair[order - 1])
    need = int(np.searchsorted(-rest, -tol ** 2)) + 1
    if need > min(limit, len(order)):
        return None
    picked = np.sort(order[:need] * D.p)
    where = np.searchsorted(candidates, picked)
    if np.any(where >= len(candidates)) or np.any(candidates[np.minimum(where, len(candidates) - 1)] != picked):
        return None
    st = _Pursuit(S, D)
    for r, j in zip(picked, where):
        g = groups[gid[j]]
        st.add(r, g[0] - 0.5, g[-1] + 0.5)
    st.solve()
    if np.linalg.norm(st.residual_norm()) > tol:
        return None
    st.history.append(float(np.linalg.norm(st.residual_norm())))
    return st


def _run_omp(S, D, groups, max_iters, tol, off_grid, noise_stop, pool=(), floor=PEAK_FLOOR,
             batch=0.0):
    """Joint-channel OMP over conjugate pairs drawn from ``groups``.

    Groups in ``pool`` join the search once a coarse peak of the residual
    falls inside them, which uncovers tones hidden in the leakage of a
    stronger neighbour.  With ``batch > 0`` each iteration takes the best
    candidate of every group whose score reaches ``batch`` times the best
    overall, instead of a single atom.  ``max_iters=None`` allows two
    pairs per admitted group.  With ``off_grid`` every selection round is
    followed by a short joint refit of all atom frequencies, and the
    search ends with a full refit.
    """
    st = _Pursuit(S, D)
    groups = [np.asarray(g) for g in groups if len(g)]
    pool = [np.asarray(g) for g in pool if len(g)]
    level = floor * _peak_scale(S)
    sep = D.p / 2

    def index(gs):
        cand = np.concatenate(gs) if gs else np.array([], dtype=int)
        gid = np.concatenate([np.full(len(g), n) for n, g in enumerate(gs)]) if gs else cand
        order = np.argsort(cand, kind="stable")
        return cand[order], gid[order]

    candidates, gid = index(groups)
    limit0 = max_iters if max_iters is not None else max(2 * len(groups), 1)
    grid = _grid_sparse(S, D, candidates, gid, groups, tol, limit0)
    if grid is not None:
        return grid, len(grid.positions), True
    taken = np.zeros(len(candidates), dtype=bool)
    converged = False
    done = 0
    while True:
        if pool and done:
            hits = _peaks(np.fft.fft(st.r, axis=0), level) * D.p
            admit = [any((hits >= g[0]) & (hits <= g[-1])) for g in pool]
            if any(admit):
                groups += [g for g, ok in zip(pool, admit) if ok]
                pool = [g for g, ok in zip(pool, admit) if not ok]
                was = candidates[taken]
                candidates, gid = index(groups)
                taken = np.isin(candidates, was)
        if len(candidates) == 0:
            converged = True
            break
        limit = max_iters if max_iters is not None else max(2 * len(groups), 1)
        if done >= limit:
            converged = bool(np.linalg.norm(st.residual_norm()) <= tol)
            break
        if np.linalg.norm(st.residual_norm()) <= tol:
            converged = True
            break
        mag2 = np.abs(st.correlate()[candidates]) ** 2
        # two atoms closer than half a coarse bin cannot be told apart
        blocked = taken.copy()
        if len(st.positions):
            gap = np.min(np.abs(candidates[:, None] - st.positions[None, :]), axis=1)
            blocked |= gap < sep
        score = mag2.sum(axis=1)
        score[blocked] = -1
        if noise_stop:
            var = _noise_var(np.fft.fft(st.r, axis=0))
            z = np.sum(mag2 / np.maximum(var, 1e-300), axis=1)
            score[z < _noise_threshold(len(candidates))] = -1
        best = float(score.max())
        if best < 0:
            converged = True
            break
        if batch > 0:
            picks = []
            for n in np.unique(gid[score >= batch * best]):
                idx = np.flatnonzero(gid == n)
                picks.append(int(idx[np.argmax(score[idx])]))
            picks.sort(key=lambda j: -score[j])
        else:
            picks = [int(np.argmax(score))]
        chosen: list[int] = []
        for j in picks[: limit - done]:
            r = candidates[j]
            # picks made together must not share a main lobe; a closer one
            # is scored again against the updated residual next round
            if any(abs(r - candidates[c]) < D.p for c in chosen):
                continue
            g = groups[gid[j]]
            chosen.append(j)
            taken[j] = True
            st.add(r, g[0] - 0.5, g[-1] + 0.5)
        st.solve()
        done += len(chosen)
        if off_grid:
            st.fit_all(max_nfev=REFIT_EVALS)
        st.history.append(float(np.linalg.norm(st.residual_norm())))
    if off_grid and done:
        st.fit_all()
        st.prune(sep)
    return st, done, converged


def refine_spectrum(u: Spectrum, i: Spectrum, matrix: MeasurementMatrix, policy: SupportPolicy,
                    max_iters: int | None = None, residual_tol: float | None = None,
                    off_grid: bool = False, noise_stop: bool = True) -> RefinedSpectrum:
    """Recover the refined spectra of both channels.

    Parameters
    ----------
    max_iters
        Cap on selected atom pairs (per group for independent policies).
        Defaults to twice the number of admitted groups.
    residual_tol
        Stop once the joint residual norm drops below this.  Defaults to
        ``1e-6 * ||S||``.
    off_grid
        After each selection, slide the atoms to the continuous
        frequencies that best explain the data.  Each atom is stored at its
        nearest refined bin with the amplitude of the off-grid fit, and
        its exact frequency is kept in ``frequencies``.
    noise_stop
        Also stop when the best joint correlation is statistically
        indistinguishable from noise, with the noise level taken from the
        median residual bin.
    """
    if u.grid_size != matrix.n or i.grid_size != matrix.n:
        raise ValueError("spectrum length does not match the dictionary")
    S = np.stack([u.coefficients, i.coefficients], axis=1).astype(complex)
    tol = 1e-6 * np.linalg.norm(S) if residual_tol is None else residual_tol

    nr = matrix.n_refined
    alpha = np.zeros((nr, 2), dtype=complex)
    positions: list[float] = []
    total_iters = 0
    converged = True
    history: list[float] = []

    if policy.independent:
        counts = np.zeros(nr)
        for g in policy.groups:
            cap = policy.atoms_per_group if max_iters is None else min(policy.atoms_per_group, max_iters)
            st, it, _ = _run_omp(S, matrix, [g], cap, tol, off_grid, noise_stop)
            total_iters += it
            _deposit(alpha, st.atoms(), nr, counts)
            positions += list(st.positions)
        nz = counts > 0
        alpha[nz] /= counts[nz][:, None]
        R = S - matrix.columns(np.flatnonzero(nz)) @ alpha[nz] if nz.any() else S
        res = np.linalg.norm(R, axis=0)
    else:
        st, total_iters, converged = _run_omp(S, matrix, policy.groups, max_iters, tol,
                                              off_grid, noise_stop, policy.pool, policy.floor,
                                              policy.batch)
        _deposit(alpha, st.atoms(), nr)
        positions = list(st.positions)
        res = st.residual_norm()
        history = st.history

    pos = np.array(positions, dtype=float)
    support = np.flatnonzero(np.any(alpha != 0, axis=1))
    return RefinedSpectrum(alpha, u.fs, matrix.n, support, pos * u.fs / nr,
                           res, total_iters, bool(converged), tuple(history))


def _deposit(alpha, atoms, nr: int, counts=None) -> None:
    for rho, bp, bn in atoms:
        r = int(round(rho)) % nr
        alpha[r] += bp
        if counts is not None:
            counts[r] += 1
        if bn is not None:
            alpha[(-r) % nr] += bn
            if counts is not None:
                counts[(-r) % nr] += 1
