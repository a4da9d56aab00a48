"""Reusable experiment pipelines on the beam oracle.

These glue the oracle, the estimators and the identification together the
same way for the command line and for scripted studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import beam, signals
from .data import FrequencyResponseSet, TimeHistorySet
from .metrics import ComparisonReport, compare
from .modal import ModeSet
from .stabilization import StabilityCriteria, prepare, stabilization_scan

__all__ = [
    "BEAM_INPUTS",
    "DEFAULT_BAND_HZ",
    "DEFAULT_N_FFT",
    "build_beam",
    "step_runs",
    "broadband_run",
    "estimate_frf",
    "stage_seed",
    "NoiseTrial",
    "noise_trial",
]

# Both forces act at node 1 (the first free node), one per bending plane.
BEAM_INPUTS = ((1, "y"), (1, "z"))
DEFAULT_BAND_HZ = (1.0, 399.0)
# 2.56 s at 800 Hz: the transient has decayed by about 60 dB and the rest
# of the record only adds noise to each bin.
DEFAULT_N_FFT = 2048


def stage_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed of ``seed`` for the stage identified by ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def build_beam(
    length_m: float = 1.5,
    n_elements: int = 8,
    youngs_modulus_pa: float = 69e9,
    density_kg_m3: float = 2700.0,
    modal_damping: float = 0.03,
    area_m2: Optional[float] = None,
    I_y_m4: Optional[float] = None,
    I_z_m4: Optional[float] = None,
    target_f1_hz: float = beam.REFERENCE_F1_HZ,
    target_f2_hz: float = beam.REFERENCE_F2_HZ,
) -> beam.AssembledSystem:
    """Assemble the beam; missing inertias are calibrated against the two targets."""
    area = beam.REFERENCE_AREA_M2 if area_m2 is None else area_m2
    model = beam.BeamModel(
        length_m=length_m, n_elements=n_elements, youngs_modulus_pa=youngs_modulus_pa,
        density_kg_m3=density_kg_m3, area_m2=area, modal_damping=modal_damping,
        I_y_m4=I_y_m4 or 1e-8, I_z_m4=I_z_m4 or 1e-8,
    )
    if I_y_m4 is None or I_z_m4 is None:
        _, I_y, I_z = beam.calibrate_section(target_f1_hz, target_f2_hz, base=model, area_m2=area)
        model = replace(model, I_y_m4=I_y_m4 or I_y, I_z_m4=I_z_m4 or I_z)
    return beam.assemble_beam(model)


def step_runs(
    system: beam.AssembledSystem,
    fs_hz: float = 800.0,
    n_samples: int = 2**16,
    inputs: Sequence[tuple[int, str]] = BEAM_INPUTS,
    amplitude_n: float = 1.0,
) -> list[TimeHistorySet]:
    """One step test per input; run ``q`` loads input ``q`` and records every input channel."""
    runs = []
    for q in range(len(inputs)):
        loads = [(node, d, amplitude_n if i == q else 0.0) for i, (node, d) in enumerate(inputs)]
        runs.append(beam.simulate_step_response(system, loads, fs_hz, n_samples))
    return runs


def broadband_run(
    system: beam.AssembledSystem,
    fs_hz: float = 800.0,
    n_samples: int = 2**16,
    inputs: Sequence[tuple[int, str]] = BEAM_INPUTS,
    seed: int = 0,
) -> TimeHistorySet:
    """All inputs driven at once by independent white forces (modes above Nyquist dropped)."""
    model = beam.modal_model(system, inputs, max_mode_hz=fs_hz / 2)
    forces = np.random.default_rng(seed).standard_normal((len(inputs), n_samples))
    return model.simulate(
        forces, fs_hz,
        input_labels=tuple(f"F_n{node}{d}" for node, d in inputs),
        output_labels=system.output_labels(),
    )


def estimate_frf(
    runs,
    estimator: str = "direct",
    band_hz=DEFAULT_BAND_HZ,
    n_fft: Optional[int] = DEFAULT_N_FFT,
    seg_len: int = 16384,
    overlap: int = 8192,
) -> FrequencyResponseSet:
    """Direct spectral ratio (one run per input) or Welch H1 (any number of runs)."""
    if estimator == "direct":
        return signals.frf_direct(runs, band_hz=band_hz, n_fft=n_fft)
    if estimator == "h1":
        return signals.h1_estimate(runs, seg_len=seg_len, overlap=overlap, band_hz=band_hz)
    raise ValueError(f"unknown estimator {estimator!r}; use 'direct' or 'h1'")


@dataclass
class NoiseTrial:
    level_pct: float
    seed: int
    minimal: ComparisonReport
    stable: ComparisonReport
    n_stable: int = 0
    notes: list = field(default_factory=list)


def noise_trial(
    runs: Sequence[TimeHistorySet],
    reference: ModeSet,
    level_pct: float,
    seed: int,
    order: int = 32,
    k_range=(32, 60, 2),
    criteria: Optional[StabilityCriteria] = None,
    estimator: str = "direct",
    band_hz=DEFAULT_BAND_HZ,
    n_fft: Optional[int] = DEFAULT_N_FFT,
    directions_seed: int = 0,
) -> NoiseTrial:
    """Corrupt every run, estimate the FRF, identify at one order and by stabilization.

    Run ``q`` is corrupted with ``stage_seed(seed, q)``.
    """
    noisy = [signals.add_wgn(run, level_pct, stage_seed(seed, q)) for q, run in enumerate(runs)]
    frf = estimate_frf(noisy, estimator, band_hz, n_fft)
    k_max = max(order, k_range[1])
    ctx = prepare(frf, directions_seed, max_order=k_max)
    minimal = compare(ctx.modes(order), reference)
    diagram = stabilization_scan(frf, k_range, criteria, context=ctx)
    stable = compare(diagram.consolidated, reference)
    return NoiseTrial(level_pct, seed, minimal, stable, len(diagram.consolidated), list(diagram.status))
