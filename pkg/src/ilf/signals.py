"""FRF estimation from time histories and controlled noise injection."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .data import EstimatorKind, FrequencyResponseSet, TimeHistorySet

__all__ = ["frf_direct", "h1_estimate", "add_wgn", "average_frfs"]

Runs = Union[TimeHistorySet, Sequence[TimeHistorySet]]

MIN_INPUT_SPECTRUM = 1e-14


def _as_runs(th: Runs) -> list[TimeHistorySet]:
    runs = [th] if isinstance(th, TimeHistorySet) else list(th)
    if not runs:
        raise ValueError("no time histories given")
    first = runs[0]
    for run in runs[1:]:
        if run.fs_hz != first.fs_hz or run.n_samples != first.n_samples:
            raise ValueError("runs differ in sampling rate or length")
        if run.inputs.shape[0] != first.inputs.shape[0] or run.outputs.shape[0] != first.outputs.shape[0]:
            raise ValueError("runs differ in channel counts")
    return runs


def _band_mask(freqs, band_hz):
    mask = freqs > 0
    if band_hz is not None:
        low, high = band_hz
        if not low < high:
            raise ValueError(f"band must satisfy low < high, got {band_hz}")
        mask &= (freqs >= low) & (freqs <= high)
    return mask


def frf_direct(
    th: Runs,
    band_hz: Optional[tuple[float, float]] = None,
    combined: bool = False,
    n_fft: Optional[int] = None,
    from_rest: bool = True,
) -> FrequencyResponseSet:
    """FRF as the ratio of output and input spectra.

    Signals are treated as starting from rest: each channel is differenced
    with a leading zero before the FFT. For step tests whose response has
    settled by the end of the record, this turns the pair into a
    transient that is consistent with the DFT's periodic extension, so no
    leakage window is needed. The ratio itself is unchanged because the same
    linear operation is applied to input and output.

    With ``combined=False`` the ``q``-th run provides column ``q`` and only
    input ``q`` of that run is used. With ``combined=True`` every run is
    used and each bin solves ``Y = H X`` in the least-squares sense, which
    needs at least ``m`` runs with independent input spectra.

    ``n_fft`` shorter than the record keeps only the leading samples of the
    differenced signals. Once the response has settled the discarded tail
    holds nothing but noise, so this raises the per-bin signal-to-noise ratio
    without smoothing the resonances.

    ``from_rest=False`` skips the differencing and divides the plain spectra,
    which is exact at the excited lines of a steady-state periodic record
    spanning whole periods.
    """
    runs = _as_runs(th)
    fs, T = runs[0].fs_hz, runs[0].n_samples
    if n_fft is not None:
        if not 2 <= n_fft <= T:
            raise ValueError(f"n_fft must lie in [2, {T}], got {n_fft}")
        T = n_fft
    m = runs[0].inputs.shape[0]
    freqs = np.fft.rfftfreq(T, 1.0 / fs)
    mask = _band_mask(freqs, band_hz)
    if not np.any(mask):
        raise ValueError("no frequency bins inside the band")

    def prep(block):
        return np.diff(block, axis=1, prepend=0.0) if from_rest else block

    def spectra(run):
        X = np.fft.rfft(prep(run.inputs), n=T, axis=1)[:, mask]
        Y = np.fft.rfft(prep(run.outputs), n=T, axis=1)[:, mask]
        return X, Y

    if combined:
        if len(runs) < m:
            raise ValueError(f"combined estimation needs at least {m} runs, got {len(runs)}")
        XY = [spectra(run) for run in runs]
        X = np.stack([x for x, _ in XY], axis=-1)  # (m, N, R)
        Y = np.stack([y for _, y in XY], axis=-1)  # (p, N, R)
        Xb = np.moveaxis(X, 1, 0)
        Yb = np.moveaxis(Y, 1, 0)
        svals = np.linalg.svd(Xb, compute_uv=False)
        if np.any(svals[:, -1] < MIN_INPUT_SPECTRUM):
            raise ValueError("input spectra are not independent at every in-band bin")
        H = Yb @ np.linalg.pinv(Xb)  # (N, p, m)
        values = np.moveaxis(H, 0, -1)
    else:
        if len(runs) != m:
            raise ValueError(f"expected one run per input ({m}), got {len(runs)}")
        columns = []
        for q, run in enumerate(runs):
            X, Y = spectra(run)
            xq = X[q]
            bad = np.abs(xq) < MIN_INPUT_SPECTRUM
            if np.any(bad):
                f_bad = freqs[mask][np.argmax(bad)]
                raise ValueError(f"input {q} spectrum vanishes at {f_bad:.6g} Hz")
            columns.append(Y / xq[None, :])
        values = np.stack(columns, axis=1)
    first = runs[0]
    return FrequencyResponseSet(
        freqs_hz=freqs[mask],
        values=values,
        output_labels=first.output_labels,
        input_labels=first.input_labels,
        estimator_kind=EstimatorKind.DIRECT_RATIO,
    )


def h1_estimate(
    th: Runs,
    seg_len: int = 16384,
    overlap: int = 8192,
    window: str = "hann",
    band_hz: Optional[tuple[float, float]] = None,
) -> FrequencyResponseSet:
    """Welch-averaged ``H1 = S_yx S_xx^-1``.

    Cross- and auto-spectral matrices are accumulated over every segment of
    every run, so several inputs may be active simultaneously as long as they
    are not fully correlated.
    """
    if window != "hann":
        raise ValueError(f"unsupported window {window!r}")
    runs = _as_runs(th)
    fs, T = runs[0].fs_hz, runs[0].n_samples
    if T < seg_len:
        raise ValueError(f"record length {T} is shorter than seg_len {seg_len}")
    if not 0 <= overlap < seg_len:
        raise ValueError("overlap must satisfy 0 <= overlap < seg_len")
    win = get_window("hann", seg_len, fftbins=True)
    win = win / win.sum()  # amplitude-correct
    step = seg_len - overlap
    freqs = np.fft.rfftfreq(seg_len, 1.0 / fs)
    mask = _band_mask(freqs, band_hz)

    m = runs[0].inputs.shape[0]
    p = runs[0].outputs.shape[0]
    Sxx = np.zeros((mask.sum(), m, m), dtype=complex)
    Syx = np.zeros((mask.sum(), p, m), dtype=complex)
    for run in runs:
        xs = sliding_window_view(run.inputs, seg_len, axis=1)[:, ::step]
        ys = sliding_window_view(run.outputs, seg_len, axis=1)[:, ::step]
        X = np.fft.rfft((xs - xs.mean(axis=-1, keepdims=True)) * win, axis=-1)[..., mask]
        Y = np.fft.rfft((ys - ys.mean(axis=-1, keepdims=True)) * win, axis=-1)[..., mask]
        Sxx += np.einsum("asf,bsf->fab", X, X.conj())
        Syx += np.einsum("asf,bsf->fab", Y, X.conj())
    H = np.linalg.solve(np.swapaxes(Sxx, 1, 2), np.swapaxes(Syx, 1, 2))
    values = np.moveaxis(np.swapaxes(H, 1, 2), 0, -1)
    first = runs[0]
    return FrequencyResponseSet(
        freqs_hz=freqs[mask],
        values=values,
        output_labels=first.output_labels,
        input_labels=first.input_labels,
        estimator_kind=EstimatorKind.H1,
    )


def add_wgn(th: TimeHistorySet, level_pct: float, seed: int = 0) -> TimeHistorySet:
    """Add independent white Gaussian noise to every channel.

    The noise standard deviation is ``level_pct / 100`` times the channel's
    own sample standard deviation. Inputs are drawn first, then outputs,
    channel by channel, from ``numpy.random.default_rng(seed)``.
    """
    if level_pct < 0:
        raise ValueError("level_pct must be non-negative")
    if level_pct == 0:
        return th
    rng = np.random.default_rng(seed)
    scale = level_pct / 100.0

    def corrupt(block):
        std = block.std(axis=1, keepdims=True)
        return block + scale * std * rng.standard_normal(block.shape)

    inputs = corrupt(th.inputs)
    outputs = corrupt(th.outputs)
    metadata = dict(th.metadata, noise_pct=level_pct, noise_seed=seed)
    return replace(th, inputs=inputs, outputs=outputs, metadata=metadata)


def average_frfs(sets: Sequence[FrequencyResponseSet]) -> FrequencyResponseSet:
    """Element-wise complex mean of response sets on identical grids and channels."""
    sets = list(sets)
    if not sets:
        raise ValueError("no response sets given")
    first = sets[0]
    for s in sets[1:]:
        if s.values.shape != first.values.shape or not np.array_equal(s.freqs_hz, first.freqs_hz):
            raise ValueError("response sets have different grids or channel layouts")
    mean = np.mean([s.values for s in sets], axis=0)
    return replace(first, values=mean)
