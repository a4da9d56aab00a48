"""Argument checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers
from typing import Optional

import numpy as np

from .data import FrequencyResponseSet


def check_frf(frf, min_bins: int = 2) -> FrequencyResponseSet:
    """Accept a FrequencyResponseSet or a ``(freqs_hz, values)`` pair.

    A 1-D ``values`` array is read as a single-input single-output response.
    """
    if not isinstance(frf, FrequencyResponseSet):
        try:
            freqs, values = frf
        except (TypeError, ValueError):
            raise TypeError(
                "expected a FrequencyResponseSet or a (freqs_hz, values) pair, "
                f"got {type(frf).__name__}"
            ) from None
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[None, None, :]
        frf = FrequencyResponseSet(np.asarray(freqs, dtype=float), values)
    if frf.n_bins < min_bins:
        raise ValueError(f"at least {min_bins} frequency bins are required, got {frf.n_bins}")
    if not np.all(np.isfinite(frf.values)):
        raise ValueError("frequency response contains non-finite entries")
    return frf


def check_band(band, name: str = "band_hz") -> Optional[tuple[float, float]]:
    if band is None:
        return None
    try:
        low, high = (float(b) for b in band)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a (low, high) pair, got {band!r}") from None
    if not (0 <= low < high):
        raise ValueError(f"{name} must satisfy 0 <= low < high, got ({low}, {high})")
    return low, high


def check_order(k, name: str = "order") -> int:
    if not isinstance(k, numbers.Integral) or isinstance(k, bool):
        raise TypeError(f"{name} must be an integer, got {type(k).__name__}")
    if k < 1:
        raise ValueError(f"{name} must be positive, got {k}")
    return int(k)


def check_order_range(k_range) -> tuple[int, int, int]:
    """Normalize ``(k_min, k_max[, step])``; orders must be even."""
    parts = tuple(k_range)
    if len(parts) not in (2, 3):
        raise ValueError(f"order range needs 2 or 3 entries, got {parts}")
    k_min, k_max = (check_order(v, "order bound") for v in parts[:2])
    step = check_order(parts[2], "order step") if len(parts) == 3 else 2
    if k_max < k_min:
        raise ValueError(f"order range is empty: {k_min} > {k_max}")
    if k_min % 2 or step % 2:
        raise ValueError("orders must be even (conjugate pairs)")
    return k_min, k_max, step
