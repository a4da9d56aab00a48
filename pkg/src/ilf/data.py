"""Containers for sampled frequency responses and time histories."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np


class EstimatorKind(str, Enum):
    DIRECT_RATIO = "direct_ratio"
    H1 = "h1"
    EXACT = "exact"


def _default_labels(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


@dataclass(frozen=True)
class FrequencyResponseSet:
    """Sampled MIMO frequency response ``H(j 2 pi f)``.

    Parameters
    ----------
    freqs_hz : ndarray, shape (N,)
        Strictly increasing, positive frequency grid in Hz.
    values : ndarray, shape (p, m, N)
        Complex response indexed as (output, input, bin).
    output_labels, input_labels : sequence of str, optional
        Channel names; generated when omitted.
    estimator_kind : EstimatorKind
        How the values were obtained.
    """

    freqs_hz: np.ndarray
    values: np.ndarray
    output_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    estimator_kind: EstimatorKind = EstimatorKind.DIRECT_RATIO

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freqs.ndim != 1:
            raise ValueError("freqs_hz must be one-dimensional")
        if values.ndim != 3:
            raise ValueError(f"values must have shape (p, m, N), got {values.shape}")
        if values.shape[2] != freqs.size:
            raise ValueError(
                f"values has {values.shape[2]} bins but freqs_hz has {freqs.size}"
            )
        if freqs.size and np.any(freqs <= 0):
            raise ValueError("freqs_hz must be strictly positive")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs_hz must be strictly increasing")
        p, m, _ = values.shape
        out_labels = tuple(self.output_labels) or _default_labels("y", p)
        in_labels = tuple(self.input_labels) or _default_labels("u", m)
        if len(out_labels) != p or len(in_labels) != m:
            raise ValueError("label counts do not match the (p, m) dimensions of values")
        freqs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "output_labels", out_labels)
        object.__setattr__(self, "input_labels", in_labels)
        object.__setattr__(self, "estimator_kind", EstimatorKind(self.estimator_kind))

    @property
    def n_outputs(self) -> int:
        return self.values.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.values.shape[1]

    @property
    def n_bins(self) -> int:
        return self.freqs_hz.size

    def select_band(self, low_hz: float, high_hz: float) -> "FrequencyResponseSet":
        """Return the bins with ``low_hz <= f <= high_hz``."""
        if not low_hz < high_hz:
            raise ValueError(f"band must satisfy low < high, got ({low_hz}, {high_hz})")
        mask = (self.freqs_hz >= low_hz) & (self.freqs_hz <= high_hz)
        return replace(self, freqs_hz=self.freqs_hz[mask], values=self.values[:, :, mask])

    def decimate(self, n_points: int) -> "FrequencyResponseSet":
        """Keep at most ``n_points`` bins, evenly spread over the grid.

        The first and last bins are always retained.
        """
        if n_points < 2:
            raise ValueError("n_points must be at least 2")
        if self.n_bins <= n_points:
            return self
        idx = np.unique(np.round(np.linspace(0, self.n_bins - 1, n_points)).astype(int))
        return replace(self, freqs_hz=self.freqs_hz[idx], values=self.values[:, :, idx])


@dataclass(frozen=True)
class TimeHistorySet:
    """Synchronously sampled input forces and output responses.

    ``inputs`` has shape (m, T) and ``outputs`` shape (p, T).
    """

    fs_hz: float
    inputs: np.ndarray
    outputs: np.ndarray
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if not self.fs_hz > 0:
            raise ValueError("fs_hz must be positive")
        if inputs.shape[1] != outputs.shape[1]:
            raise ValueError(
                f"inputs have {inputs.shape[1]} samples but outputs have {outputs.shape[1]}"
            )
        in_labels = tuple(self.input_labels) or _default_labels("u", inputs.shape[0])
        out_labels = tuple(self.output_labels) or _default_labels("y", outputs.shape[0])
        if len(in_labels) != inputs.shape[0] or len(out_labels) != outputs.shape[0]:
            raise ValueError("label counts do not match channel counts")
        object.__setattr__(self, "fs_hz", float(self.fs_hz))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "input_labels", in_labels)
        object.__setattr__(self, "output_labels", out_labels)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[1]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.fs_hz


def stack_columns(sets: Sequence[FrequencyResponseSet]) -> FrequencyResponseSet:
    """Concatenate single-input response sets along the input axis."""
    first = sets[0]
    for s in sets[1:]:
        if not np.array_equal(s.freqs_hz, first.freqs_hz):
            raise ValueError("frequency grids differ")
        if s.output_labels != first.output_labels:
            raise ValueError("output channels differ")
    values = np.concatenate([s.values for s in sets], axis=1)
    labels = tuple(label for s in sets for label in s.input_labels)
    return FrequencyResponseSet(
        first.freqs_hz, values, first.output_labels, labels, first.estimator_kind
    )
