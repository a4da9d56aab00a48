"""Random modal models with known poles, used as identification ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .data import EstimatorKind, FrequencyResponseSet, TimeHistorySet
from .modal import Mode, ModeSet

__all__ = ["ModalModel", "random_modal_model", "random_stable_model", "white_noise_inputs"]


@dataclass(frozen=True)
class ModalModel:
    """Real system written as a sum of conjugate first-order modal terms.

    ``H(s) = sum_r c_r b_r^T / (s - pole_r) + conj(c_r) conj(b_r)^T / (s - conj(pole_r))``

    ``output_vectors`` is (p, n) and ``input_vectors`` is (m, n), both
    complex; the state order is ``2 n``.
    """

    poles: np.ndarray
    output_vectors: np.ndarray
    input_vectors: np.ndarray

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=complex)
        if np.any(poles.real >= 0) or np.any(poles.imag <= 0):
            raise ValueError("poles must be stable with positive imaginary part")
        c = np.asarray(self.output_vectors, dtype=complex)
        b = np.asarray(self.input_vectors, dtype=complex)
        if c.shape[1] != poles.size or b.shape[1] != poles.size:
            raise ValueError("modal vectors must have one column per pole")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "output_vectors", c)
        object.__setattr__(self, "input_vectors", b)

    @property
    def order(self) -> int:
        return 2 * self.poles.size

    @property
    def n_outputs(self) -> int:
        return self.output_vectors.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_vectors.shape[0]

    def transfer(self, s) -> np.ndarray:
        """H at complex points ``s``; shape (p, m, len(s))."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        c, b, lam = self.output_vectors, self.input_vectors, self.poles
        g = 1.0 / (s[None, :] - lam[:, None])  # (n, N)
        gc = 1.0 / (s[None, :] - lam.conj()[:, None])
        return (np.einsum("pr,mr,rn->pmn", c, b, g)
                + np.einsum("pr,mr,rn->pmn", c.conj(), b.conj(), gc))

    def frf(self, freqs_hz) -> FrequencyResponseSet:
        freqs = np.asarray(freqs_hz, dtype=float)
        return FrequencyResponseSet(
            freqs_hz=freqs,
            values=self.transfer(2j * np.pi * freqs),
            estimator_kind=EstimatorKind.EXACT,
        )

    def mode_set(self, source: str = "synthetic") -> ModeSet:
        modes = tuple(Mode(lam, self.output_vectors[:, r]) for r, lam in enumerate(self.poles))
        return ModeSet(modes, order_k=self.order, source=source)

    def simulate(self, inputs: np.ndarray, fs_hz: float, input_labels=(), output_labels=()) -> TimeHistorySet:
        """Response to sampled inputs held constant between samples (exact ZOH).

        The system starts at rest.
        """
        u = np.atleast_2d(np.asarray(inputs, dtype=float))
        if u.shape[0] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input rows, got {u.shape[0]}")
        dt = 1.0 / fs_hz
        y = np.zeros((self.n_outputs, u.shape[1]))
        for r, lam in enumerate(self.poles):
            a = np.exp(lam * dt)
            g = (a - 1.0) / lam
            drive = self.input_vectors[:, r] @ u
            q = lfilter([0.0, g], [1.0, -a], drive)
            y += 2.0 * np.real(np.outer(self.output_vectors[:, r], q))
        return TimeHistorySet(fs_hz=fs_hz, inputs=u, outputs=y,
                              input_labels=input_labels, output_labels=output_labels)


def _spread_frequencies(rng, n, low, high, min_gap_pct):
    """Log-uniform order statistics with a guaranteed minimum relative gap.

    Sorted uniform draws on a shortened log interval are shifted by
    ``i * gap``, which keeps the draws uniform among admissible layouts.
    """
    gap = np.log1p(min_gap_pct / 100.0)
    span = np.log(high) - np.log(low) - (n - 1) * gap
    if span < 0:
        raise ValueError(f"cannot place {n} modes in [{low}, {high}] Hz with {min_gap_pct}% spacing")
    x = np.sort(rng.uniform(0.0, span, n)) + gap * np.arange(n)
    return low * np.exp(x)


def random_modal_model(
    n_modes: int,
    n_inputs: int,
    n_outputs: int,
    band_hz: tuple = (5.0, 100.0),
    damping_range: tuple = (0.01, 0.03),
    min_gap_pct: float = 2.0,
    seed: Optional[int] = 0,
) -> ModalModel:
    """Proportionally damped structure with random real mode shapes.

    Frequencies are log-uniform in ``band_hz`` with a minimum relative gap;
    shapes and participation factors are standard normal. Residues follow the
    structural form ``phi gamma^T / (2 j omega_d)``.
    """
    rng = np.random.default_rng(seed)
    f = _spread_frequencies(rng, n_modes, *band_hz, min_gap_pct)
    zeta = rng.uniform(*damping_range, n_modes)
    w = 2 * np.pi * f
    wd = w * np.sqrt(1 - zeta**2)
    poles = -zeta * w + 1j * wd
    phi = rng.standard_normal((n_outputs, n_modes))
    gamma = rng.standard_normal((n_inputs, n_modes))
    return ModalModel(poles, phi.astype(complex), gamma / (2j * wd))


def random_stable_model(order: int, n_inputs: int, n_outputs: int, seed: Optional[int] = 0) -> ModalModel:
    """Generic real model of even ``order`` with complex modal vectors."""
    if order < 2 or order % 2:
        raise ValueError("order must be even and positive")
    rng = np.random.default_rng(seed)
    n = order // 2
    w = 2 * np.pi * np.sort(rng.uniform(1.0, 50.0, n))
    zeta = rng.uniform(0.01, 0.2, n)
    poles = -zeta * w + 1j * w * np.sqrt(1 - zeta**2)
    c = rng.standard_normal((n_outputs, n)) + 1j * rng.standard_normal((n_outputs, n))
    b = rng.standard_normal((n_inputs, n)) + 1j * rng.standard_normal((n_inputs, n))
    return ModalModel(poles, c, b * w)


def white_noise_inputs(n_inputs: int, n_samples: int, seed: Optional[int] = 0) -> np.ndarray:
    """Independent unit-variance Gaussian forces, shape (m, T)."""
    return np.random.default_rng(seed).standard_normal((n_inputs, n_samples))
