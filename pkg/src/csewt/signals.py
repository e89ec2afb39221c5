"""Test-signal synthesis and ground-truth component energies.

Voltage and current are sums of fundamental, harmonic and interharmonic
tones.  The current may carry a slow amplitude/phase modulation on its
fundamental and harmonics, and both channels may see swell or
disappearance events.  Gaussian noise is added last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

KINDS = ("fundamental", "harmonic", "interharmonic")

# trapezoid oversampling used by the modulated-component oracle
ORACLE_OVERSAMPLING = 64


@dataclass(frozen=True)
class ToneSpec:
    amplitude: float
    frequency: float
    phase: float = 0.0
    kind: str = "interharmonic"
    order: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown tone kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.kind == "harmonic" and (self.order is None or self.order < 2):
            raise ValueError("harmonic tones need an integer order >= 2")

    @property
    def label(self) -> str:
        if self.kind == "fundamental":
            return "f1"
        if self.kind == "harmonic":
            return f"h{self.order}"
        return f"ih{self.frequency:g}"


@dataclass(frozen=True)
class Modulation:
    """Current-only modulation: ``A (1 + kx sin(2 pi fm t)) sin(... + ka sin(2 pi fm t))``."""

    kx: float = 0.1
    ka: float = 0.4
    frequency: float = 1.0

    def __post_init__(self):
        if not 0 <= self.kx < 1:
            raise ValueError("kx must lie in [0, 1)")


@dataclass(frozen=True)
class Event:
    """Swell (all amplitudes times ``factor``) or disappearance of tone kinds."""

    kind: str
    time: float
    factor: float = 1.0
    components: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("swell", "disappearance"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "swell" and self.factor <= 1:
            raise ValueError("swell factor must exceed 1")
        if self.kind == "disappearance":
            bad = set(self.components) - set(KINDS)
            if bad or not self.components:
                raise ValueError(f"bad disappearance component set {self.components}")

    def gain(self, tone: ToneSpec, t: np.ndarray) -> np.ndarray:
        after = t >= self.time
        if self.kind == "swell":
            return np.where(after, self.factor, 1.0)
        if tone.kind in self.components:
            return np.where(after, 0.0, 1.0)
        return np.ones_like(t)


@dataclass(frozen=True)
class Component:
    label: str
    frequency: float
    kind: str
    order: int | None = None


@dataclass(frozen=True)
class SignalSpec:
    voltage: tuple[ToneSpec, ...]
    current: tuple[ToneSpec, ...]
    f1: float = 50.0
    modulation: Modulation | None = None
    events: tuple[Event, ...] = ()
    snr_db: float = math.inf
    rng_seed: int = 0

    def __post_init__(self):
        for tone in self.voltage + self.current:
            if tone.kind == "harmonic" and not math.isclose(
                    tone.frequency, tone.order * self.f1, rel_tol=1e-12):
                raise ValueError(f"harmonic {tone.order} is not at {tone.order} x f1")

    def components(self) -> list[Component]:
        """Frequency components present in the voltage channel."""
        return [Component(t.label, t.frequency, t.kind, t.order) for t in self.voltage]

    def to_dict(self) -> dict:
        def tone(t):
            return {"amplitude": t.amplitude, "frequency": t.frequency, "phase": t.phase,
                    "kind": t.kind, "order": t.order}
        return {
            "voltage": [tone(t) for t in self.voltage],
            "current": [tone(t) for t in self.current],
            "f1": self.f1,
            "modulation": None if self.modulation is None else vars(self.modulation).copy(),
            "events": [{"kind": e.kind, "time": e.time, "factor": e.factor,
                        "components": list(e.components)} for e in self.events],
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict, phase_shift: float = 0.0) -> "SignalSpec":
        """Build from a config tree.

        Harmonic tones may omit ``frequency``; it is then ``order * f1``.
        A missing ``current`` list copies the voltage tones, with every
        phase reduced by ``phase_shift`` (voltage leads current).
        """
        f1 = float(d.get("f1", 50.0))

        def tone(t, shift=0.0):
            kind = t.get("kind", "interharmonic")
            order = t.get("order")
            if kind == "fundamental":
                freq = t.get("frequency", f1)
            elif kind == "harmonic":
                freq = order * f1
            else:
                freq = t["frequency"]
            return ToneSpec(float(t.get("amplitude", 0.1)), float(freq),
                            float(t.get("phase", 0.0)) - shift, kind, order)

        voltage = tuple(tone(t) for t in d["voltage"])
        if d.get("current") is None:
            current = tuple(tone(t, phase_shift) for t in d["voltage"])
        else:
            current = tuple(tone(t, phase_shift) for t in d["current"])
        mod = d.get("modulation")
        events = tuple(Event(e["kind"], float(e["time"]), float(e.get("factor", 1.0)),
                             tuple(e.get("components", ()))) for e in d.get("events", ()))
        snr = d.get("snr_db", "inf")
        return cls(voltage, current, f1,
                   None if mod is None else Modulation(**mod),
                   events, _parse_snr(snr), int(d.get("rng_seed", 0)))


def _parse_snr(value) -> float:
    if value is None:
        return math.inf
    if isinstance(value, str):
        return math.inf if value.lower() in ("inf", "infinity", "none") else float(value)
    return float(value)


@dataclass(frozen=True)
class SampledWindow:
    """One channel of uniformly sampled data."""

    fs: float
    samples: np.ndarray = field(repr=False)
    start_time: float = 0.0

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def sample_period(self) -> float:
        return 1.0 / self.fs

    @property
    def duration(self) -> float:
        return self.n / self.fs

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n) / self.fs

    def slice(self, start: int, stop: int) -> "SampledWindow":
        return SampledWindow(self.fs, self.samples[start:stop], self.start_time + start / self.fs)


def _event_gain(spec: SignalSpec, tone: ToneSpec, t: np.ndarray) -> np.ndarray:
    g = np.ones_like(t)
    for ev in spec.events:
        g = g * ev.gain(tone, t)
    return g


def _tone_wave(spec: SignalSpec, tone: ToneSpec, t: np.ndarray, modulated: bool) -> np.ndarray:
    amp = tone.amplitude * _event_gain(spec, tone, t)
    phase = 2 * np.pi * tone.frequency * t + tone.phase
    if modulated and spec.modulation is not None and tone.kind != "interharmonic":
        m = spec.modulation
        s = np.sin(2 * np.pi * m.frequency * t)
        amp = amp * (1 + m.kx * s)
        phase = phase + m.ka * s
    return amp * np.sin(phase)


def clean_waveforms(spec: SignalSpec, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.zeros_like(t)
    i = np.zeros_like(t)
    for tone in spec.voltage:
        u += _tone_wave(spec, tone, t, modulated=False)
    for tone in spec.current:
        i += _tone_wave(spec, tone, t, modulated=True)
    return u, i


def synthesize(spec: SignalSpec, fs: float, duration: float) -> tuple[SampledWindow, SampledWindow]:
    """Sample voltage and current over ``[0, duration)`` and add noise."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    fmax = max(t.frequency for t in spec.voltage + spec.current)
    if fs <= 2 * fmax:
        raise ValueError(f"tone at {fmax} Hz is above Nyquist for fs={fs}")
    for ev in spec.events:
        if not 0 <= ev.time <= duration:
            raise ValueError(f"event time {ev.time} outside [0, {duration}]")
    n = int(round(fs * duration))
    t = np.arange(n) / fs
    u, i = clean_waveforms(spec, t)
    uw, iw = SampledWindow(fs, u), SampledWindow(fs, i)
    if not math.isinf(spec.snr_db):
        uw = add_noise(uw, spec.snr_db, (spec.rng_seed, 0))
        iw = add_noise(iw, spec.snr_db, (spec.rng_seed, 1))
    return uw, iw


def add_noise(window: SampledWindow, snr_db: float, seed) -> SampledWindow:
    """Add white Gaussian noise at ``snr_db`` relative to the window's mean power.

    ``snr_db = inf`` returns the input unchanged.  ``seed`` is anything
    :func:`numpy.random.default_rng` accepts.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return window
    power = float(np.mean(window.samples ** 2))
    sigma = math.sqrt(power / 10 ** (snr_db / 10))
    rng = np.random.default_rng(seed)
    noisy = window.samples + sigma * rng.standard_normal(window.n)
    return replace(window, samples=noisy)


def _find_tone(tones: Sequence[ToneSpec], freq: float) -> ToneSpec:
    for t in tones:
        if math.isclose(t.frequency, freq, rel_tol=0, abs_tol=1e-9):
            return t
    raise KeyError(f"no component at {freq} Hz")


def reference_energy(spec: SignalSpec, duration: float, component, fs: float = 6400.0) -> float:
    """Active energy (p.u. s) of one frequency component over ``[0, duration]``.

    ``component`` is a :class:`Component`, a :class:`ToneSpec` or a frequency
    in Hz.  Stationary components use ``A_u A_i cos(dphi) / 2`` times the
    event-weighted duration.  Modulated components are integrated with the
    trapezoid rule on a grid 64 times finer than ``fs``.
    """
    freq = component if isinstance(component, (int, float)) else component.frequency
    tu = _find_tone(spec.voltage, freq)
    ti = _find_tone(spec.current, freq)
    edges = sorted({0.0, duration, *(e.time for e in spec.events if 0 < e.time < duration)})
    modulated = spec.modulation is not None and ti.kind != "interharmonic"
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = np.array([(a + b) / 2])
        g = float(_event_gain(spec, tu, mid)[0] * _event_gain(spec, ti, mid)[0])
        if g == 0.0:
            continue
        if not modulated:
            total += g * (b - a) * 0.5 * tu.amplitude * ti.amplitude * math.cos(tu.phase - ti.phase)
            continue
        n = max(int(math.ceil((b - a) * fs * ORACLE_OVERSAMPLING)), 64) + 1
        t = np.linspace(a, b, n)
        static = replace(spec, events=())
        prod = _tone_wave(static, tu, t, False) * _tone_wave(static, ti, t, True)
        total += g * float(np.trapezoid(prod, t))
    return total


def dot_product_energy(u: SampledWindow, i: SampledWindow) -> float:
    """Time-domain active energy ``sum u[n] i[n] Ts``."""
    return float(np.sum(u.samples * i.samples)) / u.fs
