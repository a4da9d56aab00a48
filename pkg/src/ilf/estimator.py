"""Estimator-style front ends for single-order and stabilized identification."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import loewner
from ._validation import check_band, check_frf, check_order, check_order_range
from .modal import ModeSet, extract_modes
from .stabilization import StabilityCriteria, prepare, stabilization_scan

__all__ = ["LoewnerModalIdentifier", "StabilizedModalIdentifier", "relative_errors"]


def relative_errors(model_values: np.ndarray, data_values: np.ndarray) -> np.ndarray:
    """Per-bin ``||H_model - H_data||_F / ||H_data||_F``."""
    diff = np.linalg.norm(model_values - data_values, axis=(0, 1))
    ref = np.linalg.norm(data_values, axis=(0, 1))
    return diff / np.where(ref > 0, ref, 1.0)


class LoewnerModalIdentifier(BaseEstimator):
    """Identify a real state-space model of fixed order from an FRF.

    Parameters
    ----------
    order : int
        Model order ``k``; each underdamped mode uses two states.
    band_hz : (float, float), optional
        Frequency band for mode extraction. Defaults to the data's span.
    directions_seed : int
        Seed for the random tangential directions.
    transform : {"vectorized", "loop_baseline"}
        Implementation of the real transform.
    pinv_tol : float
        Relative cut-off of the pseudoinverse of ``E``.
    n_points : int, optional
        Evenly thin the FRF to this many bins before fitting.

    Attributes
    ----------
    realization_ : StateSpaceRealization
        Fitted model including ``Ac``.
    modes_ : ModeSet
        Physical modes inside the band.
    singular_values_ : ndarray
        Singular values of the stacked pencil.
    """

    def __init__(
        self,
        order: int = 32,
        band_hz=None,
        directions_seed: int = 0,
        transform: str = "vectorized",
        pinv_tol: float = loewner.DEFAULT_PINV_TOL,
        n_points: Optional[int] = None,
    ):
        self.order = order
        self.band_hz = band_hz
        self.directions_seed = directions_seed
        self.transform = transform
        self.pinv_tol = pinv_tol
        self.n_points = n_points

    def fit(self, frf, y=None):
        k = check_order(self.order)
        band = check_band(self.band_hz)
        frf = check_frf(frf)
        if self.n_points is not None:
            frf = frf.decimate(self.n_points)
        ctx = prepare(frf, self.directions_seed, max_order=k, band_hz=band, mode=self.transform)
        if k > ctx.max_order:
            raise ValueError(f"order {k} exceeds the {ctx.max_order} available singular vectors")
        real = loewner.reduce_realization(ctx.pencil, k, ctx.factors)
        self.realization_ = loewner.to_continuous(real, self.pinv_tol)
        self.modes_ = extract_modes(self.realization_, ctx.band_hz, source=f"ilf k={k}")
        self.singular_values_ = ctx.factors.sigma
        self.n_outputs_ = frf.n_outputs
        self.n_inputs_ = frf.n_inputs
        return self

    def predict(self, freqs_hz) -> np.ndarray:
        """Model response at ``freqs_hz``; shape (p, m, N)."""
        check_is_fitted(self, "realization_")
        return loewner.frequency_response(self.realization_, np.asarray(freqs_hz, dtype=float))

    def reconstruction_error(self, frf) -> np.ndarray:
        """Per-bin relative error of the fitted model against ``frf``."""
        frf = check_frf(frf, min_bins=1)
        return relative_errors(self.predict(frf.freqs_hz), frf.values)

    def score(self, frf, y=None) -> float:
        """Negative worst-case relative reconstruction error (higher is better)."""
        return -float(np.max(self.reconstruction_error(frf)))


class StabilizedModalIdentifier(BaseEstimator):
    """Sweep model orders and keep the poles that persist.

    Parameters
    ----------
    orders : (int, int, int)
        ``(k_min, k_max, step)``, all even.
    freq_tol_pct, damp_tol_pct, mac_min, min_consecutive
        Stability thresholds between consecutive orders.
    band_hz : (float, float), optional
    directions_seed : int
    n_jobs : int
        Threads used across orders; the result does not depend on it.

    Attributes
    ----------
    diagram_ : StabilizationDiagram
    modes_ : ModeSet
        Consolidated stable modes.
    """

    def __init__(
        self,
        orders=(32, 60, 2),
        freq_tol_pct: float = 1.0,
        damp_tol_pct: float = 5.0,
        mac_min: float = 0.98,
        min_consecutive: int = 3,
        band_hz=None,
        directions_seed: int = 0,
        n_jobs: int = 1,
    ):
        self.orders = orders
        self.freq_tol_pct = freq_tol_pct
        self.damp_tol_pct = damp_tol_pct
        self.mac_min = mac_min
        self.min_consecutive = min_consecutive
        self.band_hz = band_hz
        self.directions_seed = directions_seed
        self.n_jobs = n_jobs

    def fit(self, frf, y=None):
        k_range = check_order_range(self.orders)
        criteria = StabilityCriteria(self.freq_tol_pct, self.damp_tol_pct,
                                     self.mac_min, self.min_consecutive)
        frf = check_frf(frf)
        self.diagram_ = stabilization_scan(
            frf, k_range, criteria, seed=self.directions_seed,
            band_hz=check_band(self.band_hz), n_jobs=self.n_jobs,
        )
        self.modes_: ModeSet = self.diagram_.consolidated
        return self
