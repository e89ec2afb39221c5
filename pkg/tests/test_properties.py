import math

import numpy as np
from hypothesis import given, settings, strategies as st

from csewt import analysis as an
from csewt import cs
from csewt.bands import plan_bands, to_normalized
from csewt.filterbank import beta, build_filterbank, choose_gamma, gamma_bound
from csewt.preprocess import detect_transients
from csewt.signals import Event, SampledWindow, SignalSpec, ToneSpec, synthesize
from csewt.spectral import dft, dirichlet, idft, parseval_discrepancy

FS = 6400.0
N = 1280
D = cs.build_measurement_matrix(N, 10)

fast = settings(max_examples=40, deadline=None)
slow = settings(max_examples=10, deadline=None)

signals = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=300).map(np.array)


@fast
@given(signals, st.floats(-5, 5))
def test_dft_linearity(x, c):
    y = np.roll(x, 1) * 0.5 + 1.0
    lhs = dft(SampledWindow(FS, c * x + y)).coefficients
    rhs = c * dft(SampledWindow(FS, x)).coefficients + dft(SampledWindow(FS, y)).coefficients
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@fast
@given(signals)
def test_parseval_and_round_trip(x):
    w = SampledWindow(FS, x)
    X = dft(w)
    assert parseval_discrepancy(w, X) < 1e-10 or np.sum(x ** 2) < 1e-300
    assert np.allclose(idft(X).samples, x, atol=1e-10 * (1 + np.abs(x).max()))
    # conjugate symmetry of a real input
    c = X.coefficients
    assert np.allclose(c[1:], np.conj(c[1:][::-1]), atol=1e-9 * (1 + np.abs(c).max()))


@fast
@given(st.integers(0, N - 1), st.floats(0, 12799, allow_nan=False), st.integers(-3, 3))
def test_dirichlet_periodic(q, r, m):
    a = dirichlet(q, r, N, 12800)
    assert abs(dirichlet(q, r + m * 12800, N, 12800) - a) < 1e-9
    assert abs(dirichlet(q + m * N, r, N, 12800) - a) < 1e-9
    assert abs(a) <= 1 + 1e-12


@fast
@given(st.floats(-2, 3))
def test_beta_symmetry(x):
    assert abs(beta(x) + beta(1 - x) - 1) < 1e-14
    assert 0 <= beta(x) <= 1


@fast
@given(st.floats(45, 65), st.floats(2.5, 12))
def test_band_tiling(f1, k):
    plan = plan_bands(f1, k, FS)
    edges = plan.edges()
    assert edges[0] == 0 and edges[-1] == FS / 2
    assert np.all(np.diff(edges) > 0)
    for a, b in zip(plan.bands[:-1], plan.bands[1:]):
        assert a.upper == b.lower
    for b in plan.bands[1:-1]:
        if b.kind != "interharmonic":
            assert math.isclose(b.center, b.index // 2 * f1, rel_tol=1e-12)
            assert math.isclose(b.upper - b.lower, 2 * f1 / k, rel_tol=1e-9)
    g = choose_gamma(to_normalized(plan))
    assert 0 < g < gamma_bound(to_normalized(plan))


@slow
@given(st.floats(45, 65), st.floats(3, 12), st.integers(0, 2 ** 31))
def test_filterbank_conserves_energy(f1, k, seed):
    plan = plan_bands(f1, k, FS)
    bank = build_filterbank(plan, choose_gamma(to_normalized(plan)), 0.5)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=bank.gains.shape[1]) + 1j * rng.normal(size=bank.gains.shape[1])
    total = np.sum(np.abs(X) ** 2)
    split = sum(np.sum(np.abs(X * g) ** 2) for g in bank.gains)
    assert abs(split - total) <= 1e-9 * total


tone_sets = st.lists(st.tuples(st.integers(9, 200), st.floats(0.05, 1.0), st.floats(-3, 3)),
                     min_size=1, max_size=6, unique_by=lambda t: t[0])


def _window(tones, step=5.0, shift=0.0):
    n = np.arange(N)
    u = sum(a * np.sin(2 * np.pi * b * step * n / FS + p) for b, a, p in tones)
    i = sum(a * np.sin(2 * np.pi * b * step * n / FS + p - shift) for b, a, p in tones)
    return SampledWindow(FS, u), SampledWindow(FS, i)


@slow
@given(tone_sets)
def test_grid_coincident_refinement_is_exact(tones):
    u, i = _window(tones)
    U, I = dft(u), dft(i)
    plan = plan_bands(50.0, 10.0, FS)
    policy = cs.band_restricted_support(plan, 0.5).gate(U, I)
    rs = cs.refine_spectrum(U, I, D, policy)
    assert np.max(rs.residual_norm) < 1e-10 * (1 + np.linalg.norm(U.coefficients))
    on = 10 * np.array([b for b, _, _ in tones])
    np.testing.assert_allclose(rs.alpha[on, 0], U.coefficients[on // 10], atol=1e-9)


@slow
@given(st.lists(st.tuples(st.integers(180, 1800), st.floats(0.05, 1.0), st.floats(-3, 3)),
                min_size=1, max_size=5, unique_by=lambda t: t[0] // 20),
       st.floats(0, 1.2), st.sampled_from([math.inf, 60.0]), st.integers(0, 1000))
def test_residual_history_never_grows(tones, shift, snr, seed):
    u, i = _window(tones, step=0.5, shift=shift)
    if math.isfinite(snr):
        rng = np.random.default_rng(seed)
        sigma = math.sqrt(np.mean(u.samples ** 2) / 10 ** 6)
        u = SampledWindow(FS, u.samples + sigma * rng.normal(size=N))
        i = SampledWindow(FS, i.samples + sigma * rng.normal(size=N))
    U, I = dft(u), dft(i)
    policy = cs.band_restricted_support(plan_bands(50.0, 10.0, FS), 0.5).gate(U, I)
    rs = cs.refine_spectrum(U, I, D, policy, off_grid=True)
    h = np.array(rs.history)
    assert np.all(np.diff(h) <= 1e-9 * h[0])


@slow
@given(tone_sets, st.floats(-1.5, 1.5), st.floats(0.1, 10))
def test_energy_scale_and_swap(tones, shift, c):
    u, i = _window(tones, shift=shift)
    cfg = an.PipelineConfig(f1=50.0)
    base = an.csewt_energy(u, i, (), cfg).band_energies[0]
    scaled = an.csewt_energy(SampledWindow(FS, c * u.samples), SampledWindow(FS, c * i.samples), (), cfg)
    swapped = an.csewt_energy(i, u, (), cfg).band_energies[0]
    tol = 1e-9 * np.abs(base).max()
    assert np.allclose(scaled.band_energies[0], c ** 2 * base, atol=c ** 2 * tol)
    assert np.allclose(swapped, base, atol=tol)


@slow
@given(st.integers(-500, 300))
def test_transient_translation(m):
    # the whole swell waveform moves by m samples, not just the event time
    def spec(shift):
        tones = tuple(ToneSpec(a, f, p - 2 * np.pi * f * shift / FS, kind, order)
                      for a, f, p, kind, order in [(1.0, 50.0, 0.0, "fundamental", 1),
                                                   (0.1, 150.0, 0.0, "harmonic", 3),
                                                   (0.1, 232.5, 0.3, "interharmonic", None)])
        return SignalSpec(tones, tones, 50.0, events=(Event("swell", (736 + shift) / FS, 1.4),))
    base = detect_transients(*synthesize(spec(0), FS, 0.2))
    moved = detect_transients(*synthesize(spec(m), FS, 0.2))
    assert len(base) == len(moved) == 1
    assert abs(moved[0] - base[0] - m) <= 2


@slow
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([40.0, 60.0, 80.0]))
def test_synthesis_is_deterministic(seed, snr):
    tones = (ToneSpec(1.0, 50.0, 0.0, "fundamental", 1),)
    spec = SignalSpec(tones, tones, 50.0, snr_db=snr, rng_seed=seed)
    a, b = synthesize(spec, FS, 0.2), synthesize(spec, FS, 0.2)
    assert np.array_equal(a[0].samples, b[0].samples) and np.array_equal(a[1].samples, b[1].samples)
