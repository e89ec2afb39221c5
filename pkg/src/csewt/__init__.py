"""Per-band active energy of voltage/current windows by compressive-sensing EWT.

Modules: ``signals`` (test waveforms and exact references), ``spectral``
(DFT and Dirichlet kernel), ``preprocess`` (transients, segments, f1),
``bands`` (subband plan), ``filterbank`` (empirical wavelet filters),
``cs`` (OMP spectrum refinement), ``analysis`` (energies and baselines)
and ``harness`` (scenario runs and reports).
"""

from .analysis import (EnergyReport, PipelineConfig, baseline_ewt_energy, csdft_energy,
                       csewt_energy, fft_energy, relative_error)
from .bands import BandPlan, plan_bands
from .cs import build_measurement_matrix, refine_spectrum
from .filterbank import FilterBank, build_filterbank
from .harness import RunReport, ScenarioConfig, benchmark, load_scenario, run_scenario
from .preprocess import detect_transients, estimate_fundamental, segment
from .signals import SampledWindow, SignalSpec, reference_energy, synthesize
from .spectral import Spectrum, dft, idft

__all__ = [
    "BandPlan", "EnergyReport", "FilterBank", "PipelineConfig", "RunReport", "SampledWindow",
    "ScenarioConfig", "SignalSpec", "Spectrum", "baseline_ewt_energy", "benchmark",
    "build_filterbank", "build_measurement_matrix", "csdft_energy", "csewt_energy",
    "detect_transients", "dft", "estimate_fundamental", "fft_energy", "idft", "load_scenario",
    "plan_bands", "reference_energy", "refine_spectrum", "relative_error", "run_scenario",
    "segment", "synthesize",
]
