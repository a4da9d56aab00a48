"""Loewner pencil construction and descriptor realizations from tangential data.

The pipeline is::

    partition_data -> build_loewner_pencil -> real_transform
                   -> reduce_realization -> to_continuous

``reduce_realization`` projects the pencil onto the dominant singular
subspaces of ``[LL LLs]`` (left) and ``[LL; LLs]`` (right); the factors can be
computed once with :func:`svd_factors` and reused for every model order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .data import FrequencyResponseSet

__all__ = [
    "InterpolationData",
    "LoewnerPencil",
    "StateSpaceRealization",
    "SvdFactors",
    "partition_data",
    "build_loewner_pencil",
    "sylvester_residuals",
    "real_transform",
    "rank_reveal",
    "svd_factors",
    "reduce_realization",
    "to_continuous",
    "evaluate_model",
    "frequency_response",
]

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10
DEFAULT_PINV_TOL = 1e-12

# Per conjugate pair (mu, conj(mu)) on the left and (lambda, conj(lambda)) on the right.
LEFT_BLOCK = np.array([[1.0, 1.0], [-1.0j, 1.0j]]) / np.sqrt(2.0)
RIGHT_BLOCK = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)


@dataclass(frozen=True)
class InterpolationData:
    """Right/left tangential interpolation data.

    Attributes
    ----------
    lam : ndarray, shape (rho,)
        Right interpolation points.
    mu : ndarray, shape (v,)
        Left interpolation points.
    R : ndarray, shape (m, rho)
        Right tangential directions, one unit column per point.
    L : ndarray, shape (v, p)
        Left tangential directions, one unit row per point.
    W : ndarray, shape (p, rho)
        Right tangential data ``H(lam_i) r_i``.
    V : ndarray, shape (v, m)
        Left tangential data ``l_j H(mu_j)``.
    right_pairing, left_pairing : ndarray of int
        Index of each point's conjugate partner (its own index for real points).
    """

    lam: np.ndarray
    mu: np.ndarray
    R: np.ndarray
    L: np.ndarray
    W: np.ndarray
    V: np.ndarray
    right_pairing: np.ndarray
    left_pairing: np.ndarray

    def __post_init__(self):
        rho, v = self.lam.size, self.mu.size
        m, p = self.R.shape[0], self.L.shape[1]
        if self.R.shape != (m, rho) or self.W.shape != (p, rho):
            raise ValueError("right data has inconsistent dimensions")
        if self.L.shape != (v, p) or self.V.shape != (v, m):
            raise ValueError("left data has inconsistent dimensions")
        if self.right_pairing.shape != (rho,) or self.left_pairing.shape != (v,):
            raise ValueError("pairing maps must have one entry per point")

    @property
    def n_inputs(self) -> int:
        return self.R.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.L.shape[1]

    def scaled(self, alpha: complex) -> "InterpolationData":
        """Copy with both W and V multiplied by ``alpha``."""
        return replace(self, W=alpha * self.W, V=alpha * self.V)


@dataclass(frozen=True)
class LoewnerPencil:
    """Loewner matrix ``LL``, shifted Loewner matrix ``LLs`` and the data ``V``, ``W``.

    ``imag_residual`` records max|Im| / norm over the transformed matrices when
    the pencil came out of :func:`real_transform`; it is 0 otherwise.
    """

    LL: np.ndarray
    LLs: np.ndarray
    V: np.ndarray
    W: np.ndarray
    is_real: bool = False
    imag_residual: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.LL.shape


@dataclass(frozen=True)
class StateSpaceRealization:
    """Descriptor model ``E x' = A x + B u``, ``y = C x`` (no feedthrough).

    ``Ac`` holds ``pinv(E) A`` once :func:`to_continuous` has been applied.
    """

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Ac: Optional[np.ndarray] = None

    def __post_init__(self):
        k = self.E.shape[0]
        if self.E.shape != (k, k) or self.A.shape != (k, k):
            raise ValueError("E and A must be square and of equal size")
        if self.B.shape[0] != k or self.C.shape[1] != k:
            raise ValueError("B rows and C columns must match the model order")
        if self.Ac is not None and self.Ac.shape != (k, k):
            raise ValueError("Ac must have the same shape as A")

    @property
    def order_k(self) -> int:
        return self.E.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class SvdFactors:
    """Leading singular vectors of the stacked pencil.

    ``Y`` (v x r) spans the column space of ``[LL LLs]`` and ``X`` (rho x r)
    the row space of ``[LL; LLs]``; ``sigma`` are the singular values of
    ``[LL; LLs]`` in descending order (only the leading ones when the
    factorization was truncated).
    """

    Y: np.ndarray
    X: np.ndarray
    sigma: np.ndarray
    _projections: dict = field(default_factory=dict, repr=False, compare=False)

    def projection(self, pencil: "LoewnerPencil"):
        """``(E, A, B, C)`` projected on all ``r`` vectors, computed once per pencil.

        The order-``k`` matrices are the leading blocks of these, so every
        order after the first costs a slice instead of an ``O(v rho k)`` product.
        """
        hit = self._projections.get(id(pencil))
        if hit is not None and hit[0] is pencil:
            return hit[1]
        Yh = self.Y.conj().T
        mats = (-Yh @ pencil.LL @ self.X, -Yh @ pencil.LLs @ self.X, Yh @ pencil.V, pencil.W @ self.X)
        self._projections[id(pencil)] = (pencil, mats)
        return mats


def _unit_sign_fixed(vectors: np.ndarray, axis: int) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=axis, keepdims=True)
    vectors = vectors / norms
    # first component positive, so single-channel directions come out as exactly 1
    first = np.take(vectors, [0], axis=axis)
    return vectors * np.where(first < 0, -1.0, 1.0)


def _conjugate_closed(points, directions, data):
    """Interleave every point with its conjugate mirror.

    ``directions`` and ``data`` carry one column per point.
    """
    n = points.size
    pts = np.empty(2 * n, dtype=complex)
    pts[0::2] = points
    pts[1::2] = np.conj(points)
    dirs = np.repeat(directions, 2, axis=1).astype(complex)
    dirs[:, 1::2] = np.conj(dirs[:, 1::2])
    vals = np.empty((data.shape[0], 2 * n), dtype=complex)
    vals[:, 0::2] = data
    vals[:, 1::2] = np.conj(data)
    pairing = np.arange(2 * n) ^ 1
    return pts, dirs, vals, pairing


def partition_data(frf: FrequencyResponseSet, directions_seed: int = 0) -> InterpolationData:
    """Split a frequency response into conjugate-closed right/left tangential data.

    Bins are taken in ascending frequency; with 1-based numbering the
    even-numbered bins become right points and the odd-numbered ones left
    points. Each point ``s = j 2 pi f`` is followed by ``conj(s)`` carrying the
    conjugated direction and data. Directions are real, standard-normal draws
    scaled to unit length from ``numpy.random.default_rng(directions_seed)``.
    """
    if frf.n_bins < 2:
        raise ValueError(f"at least 2 frequency bins are required, got {frf.n_bins}")
    H = frf.values
    if not np.all(np.isfinite(H)):
        raise ValueError("frequency response contains non-finite entries")
    p, m, _ = H.shape
    s = 2j * np.pi * frf.freqs_hz
    right_idx = np.arange(1, frf.n_bins, 2)
    left_idx = np.arange(0, frf.n_bins, 2)

    rng = np.random.default_rng(directions_seed)
    r = _unit_sign_fixed(rng.standard_normal((m, right_idx.size)), axis=0)
    l_rows = _unit_sign_fixed(rng.standard_normal((left_idx.size, p)), axis=1)

    w = np.einsum("pmn,mn->pn", H[:, :, right_idx], r)
    v = np.einsum("np,pmn->nm", l_rows, H[:, :, left_idx])

    lam, R, W, right_pairing = _conjugate_closed(s[right_idx], r, w)
    mu, Lt, Vt, left_pairing = _conjugate_closed(s[left_idx], l_rows.T, v.T)
    return InterpolationData(
        lam=lam, mu=mu, R=R, L=Lt.T, W=W, V=Vt.T,
        right_pairing=right_pairing, left_pairing=left_pairing,
    )


def build_loewner_pencil(data: InterpolationData) -> LoewnerPencil:
    """Assemble ``LL[j, i] = (v_j r_i - l_j w_i) / (mu_j - lam_i)`` and its shifted twin."""
    denom = data.mu[:, None] - data.lam[None, :]
    if np.any(denom == 0):
        j, i = np.argwhere(denom == 0)[0]
        raise ValueError(f"left point {j} coincides with right point {i}")
    VR = data.V @ data.R
    LW = data.L @ data.W
    LL = (VR - LW) / denom
    LLs = (data.mu[:, None] * VR - LW * data.lam[None, :]) / denom
    return LoewnerPencil(LL=LL, LLs=LLs, V=data.V.copy(), W=data.W.copy(), is_real=False)


def _relative(residual: np.ndarray, lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(residual) / scale)


def sylvester_residuals(pencil: LoewnerPencil, data: InterpolationData) -> tuple[float, float]:
    """Relative residuals of the two Sylvester equations the pencil must satisfy.

    Returns norms of ``LL Lam - M LL - (L W - V R)`` and
    ``LLs Lam - M LLs - (L W Lam - M V R)``, each divided by the norm of the
    left-hand side (or of the right-hand side when that is larger).
    """
    if pencil.is_real:
        raise ValueError("residuals are defined on the pencil before the real transform")
    v, rho = pencil.LL.shape
    if (v, rho) != (data.mu.size, data.lam.size):
        raise ValueError(
            f"pencil shape {pencil.LL.shape} does not match data ({data.mu.size}, {data.lam.size})"
        )
    lam, mu = data.lam[None, :], data.mu[:, None]
    VR = data.V @ data.R
    LW = data.L @ data.W

    lhs1 = pencil.LL * lam - mu * pencil.LL
    rhs1 = LW - VR
    lhs2 = pencil.LLs * lam - mu * pencil.LLs
    rhs2 = LW * lam - mu * VR
    return _relative(lhs1 - rhs1, lhs1, rhs1), _relative(lhs2 - rhs2, lhs2, rhs2)


def _canonical_order(pairing: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, int]:
    """Permutation placing real points first, then each (s, conj(s)) pair adjacently."""
    n = pairing.size
    if np.any(pairing[pairing] != np.arange(n)):
        raise ValueError("conjugate pairing is not an involution")
    real_idx = [i for i in range(n) if pairing[i] == i]
    for i in real_idx:
        if points[i].imag != 0:
            raise ValueError(f"non-real point {points[i]} has no conjugate partner")
    pairs = []
    for i in range(n):
        j = pairing[i]
        if j > i:
            if points[i] != np.conj(points[j]):
                raise ValueError(f"points {i} and {j} are not conjugates")
            first, second = (i, j) if points[i].imag > 0 else (j, i)
            pairs.extend([first, second])
    return np.array(real_idx + pairs, dtype=int), len(real_idx)


def _apply_left_vectorized(X: np.ndarray, n_real: int) -> np.ndarray:
    # (I_real (+) kron(I_pairs, LEFT_BLOCK)) @ X without forming the dense matrix
    head = X[:n_real]
    tail = X[n_real:].reshape(-1, 2, X.shape[1])
    tail = np.einsum("ab,kbn->kan", LEFT_BLOCK, tail).reshape(-1, X.shape[1])
    return np.concatenate([head, tail], axis=0)


def _apply_right_vectorized(X: np.ndarray, n_real: int) -> np.ndarray:
    head = X[:, :n_real]
    tail = X[:, n_real:].reshape(X.shape[0], -1, 2)
    tail = np.einsum("nkb,ba->nka", tail, RIGHT_BLOCK).reshape(X.shape[0], -1)
    return np.concatenate([head, tail], axis=1)


def _loop_transform_matrices(n_real_left, n_pairs_left, n_real_right, n_pairs_right):
    """Dense transforms grown one diagonal block at a time (legacy layout)."""
    TL = np.eye(n_real_left, dtype=complex)
    for _ in range(n_pairs_left):
        TL = sla.block_diag(TL, LEFT_BLOCK)
    TR = np.eye(n_real_right, dtype=complex)
    for _ in range(n_pairs_right):
        TR = sla.block_diag(TR, RIGHT_BLOCK)
    return TL, TR


def transform_matrices(n_real_left, n_pairs_left, n_real_right, n_pairs_right):
    """Dense left/right transforms assembled with Kronecker products."""
    TL = np.eye(n_real_left + 2 * n_pairs_left, dtype=complex)
    TR = np.eye(n_real_right + 2 * n_pairs_right, dtype=complex)
    TL[n_real_left:, n_real_left:] = np.kron(np.eye(n_pairs_left), LEFT_BLOCK)
    TR[n_real_right:, n_real_right:] = np.kron(np.eye(n_pairs_right), RIGHT_BLOCK)
    return TL, TR


def real_transform(
    pencil: LoewnerPencil,
    data: InterpolationData,
    mode: Literal["vectorized", "loop_baseline"] = "vectorized",
) -> LoewnerPencil:
    """Congruence by unitary 2x2 blocks mapping conjugate-symmetric data to real matrices.

    Rows and columns are first permuted so that real points come first and
    conjugate pairs sit next to each other (positive imaginary part first).
    ``vectorized`` applies the block-diagonal transforms through their
    Kronecker structure; ``loop_baseline`` grows dense transforms block by
    block and multiplies them out, as legacy implementations did.
    """
    if pencil.is_real:
        raise ValueError("pencil has already been transformed")
    left_perm, n_real_left = _canonical_order(data.left_pairing, data.mu)
    right_perm, n_real_right = _canonical_order(data.right_pairing, data.lam)
    LL = pencil.LL[np.ix_(left_perm, right_perm)]
    LLs = pencil.LLs[np.ix_(left_perm, right_perm)]
    V = pencil.V[left_perm]
    W = pencil.W[:, right_perm]
    n_pairs_left = (left_perm.size - n_real_left) // 2
    n_pairs_right = (right_perm.size - n_real_right) // 2

    if mode == "vectorized":
        LLt = _apply_right_vectorized(_apply_left_vectorized(LL, n_real_left), n_real_right)
        LLst = _apply_right_vectorized(_apply_left_vectorized(LLs, n_real_left), n_real_right)
        Vt = _apply_left_vectorized(V, n_real_left)
        Wt = _apply_right_vectorized(W, n_real_right)
    elif mode == "loop_baseline":
        TL, TR = _loop_transform_matrices(n_real_left, n_pairs_left, n_real_right, n_pairs_right)
        LLt = TL @ LL @ TR
        LLst = TL @ LLs @ TR
        Vt = TL @ V
        Wt = W @ TR
    else:
        raise ValueError(f"unknown mode {mode!r}")

    residual = 0.0
    for M in (LLt, LLst, Vt, Wt):
        scale = np.linalg.norm(M)
        if scale > 0:
            residual = max(residual, float(np.max(np.abs(M.imag)) / scale))
    return LoewnerPencil(
        LL=LLt.real.copy(), LLs=LLst.real.copy(), V=Vt.real.copy(), W=Wt.real.copy(),
        is_real=True, imag_residual=residual,
    )


def rank_reveal(pencil: LoewnerPencil, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank of ``[LL; LLs]`` relative to its largest singular value."""
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    if pencil.LL.size == 0:
        raise ValueError("empty pencil")
    sigma = np.linalg.svd(np.vstack([pencil.LL, pencil.LLs]), compute_uv=False)
    if sigma[0] == 0:
        return 0
    return int(np.count_nonzero(sigma > rel_tol * sigma[0]))


def _truncated_svd(M: np.ndarray, r: int):
    # Lanczos bidiagonalization for the leading triplets; deterministic start vector
    v0 = np.ones(min(M.shape)) / np.sqrt(min(M.shape))
    U, s, Vh = svds(M, k=r, v0=v0, tol=0, solver="arpack")
    order = np.argsort(s)[::-1]
    return U[:, order], s[order], Vh[order]


def svd_factors(
    pencil: LoewnerPencil,
    max_order: Optional[int] = None,
    method: Literal["auto", "full", "truncated"] = "auto",
) -> SvdFactors:
    """Singular subspaces used by :func:`reduce_realization`.

    Parameters
    ----------
    pencil : LoewnerPencil
    max_order : int, optional
        Number of singular vectors to keep. None keeps all of them.
    method : {"auto", "full", "truncated"}
        ``full`` runs a dense LAPACK SVD. ``truncated`` computes only the
        leading ``max_order`` triplets with ARPACK, which is much cheaper for
        large pencils; ``sigma`` then holds only those values. ``auto`` picks
        ``truncated`` for real pencils whose smaller side exceeds
        ``4 * max_order`` and at least 256, falling back to ``full`` if ARPACK
        does not converge.
    """
    if pencil.LL.size == 0:
        raise ValueError("empty pencil")
    if method not in ("auto", "full", "truncated"):
        raise ValueError(f"unknown method {method!r}")
    top = np.hstack([pencil.LL, pencil.LLs])
    side = np.vstack([pencil.LL, pencil.LLs])
    n_min = min(pencil.LL.shape)
    if method == "truncated" and (max_order is None or max_order >= n_min):
        raise ValueError("truncated SVD needs max_order smaller than the pencil size")
    use_truncated = method == "truncated" or (
        method == "auto"
        and pencil.is_real
        and max_order is not None
        and n_min >= max(256, 4 * max_order)
    )
    if use_truncated:
        try:
            Y, _, _ = _truncated_svd(top, max_order)
            _, sigma, Xh = _truncated_svd(side, max_order)
            return SvdFactors(Y=Y, X=Xh.conj().T, sigma=sigma)
        except ArpackNoConvergence:
            if method == "truncated":
                raise
            logger.warning("ARPACK did not converge; using a dense SVD")
    Y, _, _ = sla.svd(top, full_matrices=False, lapack_driver="gesdd")
    _, sigma, Xh = sla.svd(side, full_matrices=False, lapack_driver="gesdd")
    X = Xh.conj().T
    if max_order is not None:
        Y, X = Y[:, :max_order], X[:, :max_order]
    return SvdFactors(Y=Y, X=X, sigma=sigma)


def reduce_realization(
    pencil: LoewnerPencil, k: int, factors: Optional[SvdFactors] = None
) -> StateSpaceRealization:
    """Order-``k`` projection ``E = -Y* LL X``, ``A = -Y* LLs X``, ``B = Y* V``, ``C = W X``."""
    v, rho = pencil.LL.shape
    if not 1 <= k <= min(v, rho):
        raise ValueError(f"order k={k} must lie in [1, {min(v, rho)}]")
    if factors is None:
        factors = svd_factors(pencil, max_order=k)
    if factors.Y.shape[1] < k or factors.X.shape[1] < k:
        raise ValueError(f"factors hold only {factors.Y.shape[1]} singular vectors, k={k}")
    if factors.Y.shape[1] < min(v, rho):
        E, A, B, C = factors.projection(pencil)
        return StateSpaceRealization(
            E=E[:k, :k].copy(), A=A[:k, :k].copy(), B=B[:k].copy(), C=C[:, :k].copy()
        )
    # full-width factors: projecting all of them would cost a dense v x rho product
    Yh = factors.Y[:, :k].conj().T
    X = factors.X[:, :k]
    return StateSpaceRealization(
        E=-Yh @ pencil.LL @ X,
        A=-Yh @ pencil.LLs @ X,
        B=Yh @ pencil.V,
        C=pencil.W @ X,
    )


def to_continuous(
    realization: StateSpaceRealization, pinv_rel_tol: float = DEFAULT_PINV_TOL
) -> StateSpaceRealization:
    """Attach ``Ac = pinv(E) A``; singular values of E below ``pinv_rel_tol * max`` are dropped."""
    Einv = sla.pinv(realization.E, atol=0.0, rtol=pinv_rel_tol)
    return replace(realization, Ac=Einv @ realization.A)


def evaluate_model(realization: StateSpaceRealization, s: complex) -> np.ndarray:
    """Transfer matrix ``C (sE - A)^-1 B`` at a single complex point."""
    G = s * realization.E - realization.A
    if np.linalg.cond(G) > 1e15:
        raise np.linalg.LinAlgError(f"sE - A is singular at s={s}")
    return realization.C @ np.linalg.solve(G, realization.B)


def frequency_response(realization: StateSpaceRealization, freqs_hz) -> np.ndarray:
    """Evaluate the model on ``s = j 2 pi f``; returns shape (p, m, N)."""
    s = 2j * np.pi * np.asarray(freqs_hz, dtype=float)
    G = s[:, None, None] * realization.E[None] - realization.A[None]
    X = np.linalg.solve(G, np.broadcast_to(realization.B, (s.size,) + realization.B.shape))
    return np.einsum("pk,nkm->pmn", realization.C, X)
