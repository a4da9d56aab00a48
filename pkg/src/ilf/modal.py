"""Modal parameters from continuous state matrices, and mode-shape correlation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Mode",
    "ModeSet",
    "ModePairing",
    "normalize_shape",
    "extract_modes",
    "mac",
    "mac_matrix",
    "match_modes",
]


def normalize_shape(shape) -> np.ndarray:
    """Unit Euclidean norm, first significant entry rotated onto the positive real axis."""
    shape = np.asarray(shape, dtype=complex).ravel()
    norm = np.linalg.norm(shape)
    if norm == 0:
        raise ValueError("mode shape has zero norm")
    shape = shape / norm
    mags = np.abs(shape)
    first = np.flatnonzero(mags > 1e-12 * mags.max())[0]
    return shape * (np.conj(shape[first]) / mags[first])


@dataclass(frozen=True)
class Mode:
    """One vibration mode.

    ``pole`` is the continuous-time eigenvalue with positive imaginary part;
    frequency and damping are derived from it.
    """

    pole: complex
    shape: np.ndarray

    def __post_init__(self):
        pole = complex(self.pole)
        if abs(pole) == 0:
            raise ValueError("pole must be nonzero")
        object.__setattr__(self, "pole", pole)
        object.__setattr__(self, "shape", normalize_shape(self.shape))

    @classmethod
    def from_frequency(cls, frequency_hz: float, damping_ratio: float, shape) -> "Mode":
        w = 2 * np.pi * frequency_hz
        return cls(complex(-damping_ratio * w, w * np.sqrt(1 - damping_ratio**2)), shape)

    @property
    def natural_frequency_hz(self) -> float:
        return abs(self.pole) / (2 * np.pi)

    @property
    def damping_ratio(self) -> float:
        return -self.pole.real / abs(self.pole)


@dataclass(frozen=True)
class ModeSet:
    """Modes sorted by ascending natural frequency."""

    modes: tuple = ()
    order_k: int = 0
    source: str = ""

    def __post_init__(self):
        modes = tuple(sorted(self.modes, key=lambda m: m.natural_frequency_hz))
        poles = [m.pole for m in modes]
        if len(set(poles)) != len(poles):
            raise ValueError("two modes share an identical pole")
        object.__setattr__(self, "modes", modes)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.array([m.natural_frequency_hz for m in self.modes])

    @property
    def damping_ratios(self) -> np.ndarray:
        return np.array([m.damping_ratio for m in self.modes])

    @property
    def poles(self) -> np.ndarray:
        return np.array([m.pole for m in self.modes])

    def shapes(self) -> np.ndarray:
        """Shapes as columns, shape (p, n_modes)."""
        if not self.modes:
            return np.zeros((0, 0), dtype=complex)
        return np.column_stack([m.shape for m in self.modes])

    def in_band(self, low_hz: float, high_hz: float) -> "ModeSet":
        kept = [m for m in self.modes if low_hz <= m.natural_frequency_hz <= high_hz]
        return ModeSet(tuple(kept), self.order_k, self.source)


def extract_modes(
    realization,
    band_hz: tuple[float, float] = (0.0, np.inf),
    source: str = "",
) -> ModeSet:
    """Physical modes of ``realization.Ac`` with shapes ``C v``.

    A pole is kept when it has positive imaginary part, negative real part,
    damping ratio in (0, 1) and natural frequency inside ``band_hz``.
    """
    low, high = band_hz
    if not low < high:
        raise ValueError(f"band must satisfy low < high, got {band_hz}")
    if realization.Ac is None:
        raise ValueError("realization has no continuous state matrix; call to_continuous first")
    Ac = realization.Ac
    if not np.all(np.isfinite(Ac)):
        raise np.linalg.LinAlgError("state matrix contains non-finite entries")
    eigvals, eigvecs = np.linalg.eig(Ac)
    modes = []
    seen = set()
    for lam, vec in zip(eigvals, eigvecs.T):
        if not (lam.imag > 0 and lam.real < 0):
            continue
        wn = abs(lam)
        zeta = -lam.real / wn
        f = wn / (2 * np.pi)
        if not (0 < zeta < 1 and low <= f <= high):
            continue
        if lam in seen:
            continue
        shape = realization.C @ vec
        if not np.any(shape):
            continue
        seen.add(lam)
        modes.append(Mode(lam, shape))
    return ModeSet(tuple(modes), realization.order_k, source)


def mac(shape_a, shape_b) -> float:
    """Modal assurance criterion ``|a^H b|^2 / ((a^H a)(b^H b))``."""
    a = np.asarray(shape_a, dtype=complex).ravel()
    b = np.asarray(shape_b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"shape lengths differ: {a.size} vs {b.size}")
    na = np.vdot(a, a).real
    nb = np.vdot(b, b).real
    if na == 0 or nb == 0:
        raise ValueError("MAC is undefined for a zero-norm shape")
    value = abs(np.vdot(a, b)) ** 2 / (na * nb)
    return float(min(value, 1.0))


def mac_matrix(shapes_a: np.ndarray, shapes_b: np.ndarray) -> np.ndarray:
    """MAC between every column of ``shapes_a`` and every column of ``shapes_b``."""
    A = np.asarray(shapes_a, dtype=complex)
    B = np.asarray(shapes_b, dtype=complex)
    cross = np.abs(A.conj().T @ B) ** 2
    na = np.sum(np.abs(A) ** 2, axis=0)
    nb = np.sum(np.abs(B) ** 2, axis=0)
    return np.minimum(cross / np.outer(na, nb), 1.0)


@dataclass(frozen=True)
class ModePairing:
    """Result of :func:`match_modes`; ``pairs`` holds (reference index, candidate index, MAC)."""

    pairs: tuple = ()
    unmatched_reference: tuple = ()
    unmatched_candidates: tuple = ()

    def __len__(self):
        return len(self.pairs)


def match_modes(
    candidates: ModeSet, reference: ModeSet, freq_window_pct: float = 2.0
) -> ModePairing:
    """Greedy pairing in ascending reference frequency.

    Each reference mode takes the still-unpaired candidate within
    ``freq_window_pct`` percent of its frequency that has the highest MAC.
    """
    if not freq_window_pct > 0:
        raise ValueError("freq_window_pct must be positive")
    free = set(range(len(candidates)))
    cand_f = candidates.frequencies_hz
    pairs = []
    unmatched_ref = []
    for i, ref in enumerate(reference):
        f_ref = ref.natural_frequency_hz
        window = [c for c in sorted(free)
                  if abs(cand_f[c] - f_ref) <= freq_window_pct / 100 * f_ref]
        if not window:
            unmatched_ref.append(i)
            continue
        scores = [mac(candidates[c].shape, ref.shape) for c in window]
        best = int(np.argmax(scores))
        pairs.append((i, window[best], scores[best]))
        free.discard(window[best])
    return ModePairing(tuple(pairs), tuple(unmatched_ref), tuple(sorted(free)))
