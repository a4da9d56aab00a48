"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ilf.data import FrequencyResponseSet


def oscillator_transfer(s, f0_hz=10.0, zeta=0.03):
    """1-DOF receptance ``1 / (s^2 + 2 zeta w0 s + w0^2)``."""
    w0 = 2 * np.pi * f0_hz
    s = np.asarray(s, dtype=complex)
    return 1.0 / (s**2 + 2 * zeta * w0 * s + w0**2)


def oscillator_frf(freqs_hz, f0_hz=10.0, zeta=0.03) -> FrequencyResponseSet:
    freqs = np.asarray(freqs_hz, dtype=float)
    H = oscillator_transfer(2j * np.pi * freqs, f0_hz, zeta)
    return FrequencyResponseSet(freqs, H[None, None, :])


def companion_realization(f0_hz, zeta):
    """(A, C) of a second-order block in companion form."""
    w0 = 2 * np.pi * f0_hz
    A = np.array([[0.0, 1.0], [-(w0**2), -2 * zeta * w0]])
    C = np.array([[1.0, 0.0]])
    return A, C


def zoh_step_frf_ratio(pole, residue, freqs_hz, fs_hz, n):
    """DFT ratio of a sampled step response to its sampled step input.

    For one conjugate pair ``r/(s-p) + conj``, the sampled response to a unit
    step is ``y[t] = 2 Re(r/p (e^{p t dt} - 1))``. Differencing turns it into
    a sum of geometric sequences whose ``n``-point DFT has a closed form.
    """
    dt = 1.0 / fs_hz
    z = np.exp(-2j * np.pi * np.asarray(freqs_hz) * dt)
    total = np.zeros_like(z)
    for p, r in ((pole, residue), (np.conj(pole), np.conj(residue))):
        a = np.exp(p * dt)
        # y[t] - y[t-1] = (r/p)(a - 1) a^{t-1} for t >= 1, and y[0] = 0
        c = (r / p) * (a - 1.0)
        total += c * z * (1 - (a * z) ** (n - 1)) / (1 - a * z)
    return total


def zoh_transfer(poles, output_vectors, input_vectors, freqs_hz, fs_hz):
    """Frequency response of a modal model sampled with a zero-order hold.

    Each modal state obeys ``q[t] = a q[t-1] + g u[t-1]`` with ``a = e^{p dt}``
    and ``g = (a - 1) / p``, so its transfer function is ``g z^-1 / (1 - a z^-1)``.
    """
    dt = 1.0 / fs_hz
    zinv = np.exp(-2j * np.pi * np.asarray(freqs_hz) * dt)
    H = 0
    for r, p in enumerate(np.asarray(poles)):
        for lam, c, b in ((p, output_vectors[:, r], input_vectors[:, r]),
                          (np.conj(p), np.conj(output_vectors[:, r]), np.conj(input_vectors[:, r]))):
            a = np.exp(lam * dt)
            g = (a - 1.0) / lam
            H = H + np.einsum("p,m,n->pmn", c, b, g * zinv / (1 - a * zinv))
    return H


def deflated_eigenvalues(E, A, rank):
    """Eigenvalues of ``pinv(E) A`` restricted to the range of E, via an SVD split."""
    U, s, Vh = np.linalg.svd(E)
    U1, V1 = U[:, :rank], Vh[:rank].T
    # E = U1 S V1^T; on range(V1): S V1^T x' = U1^T A x with x = V1 z
    return sla.eigvals(np.diag(1.0 / s[:rank]) @ U1.T @ A @ V1)


def match_sorted(a, b):
    """Pair two eigenvalue lists by greedy nearest matching."""
    b = list(b)
    out = []
    for x in a:
        i = int(np.argmin([abs(x - y) for y in b]))
        out.append((x, b.pop(i)))
    return out
