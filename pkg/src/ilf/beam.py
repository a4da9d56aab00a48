"""Finite-element cantilever used as ground truth for identification.

Two uncoupled Euler-Bernoulli bending planes (y uses ``I_z``, z uses
``I_y``), each discretised into 2-node elements with a transverse
displacement and a rotation per node. Node 0 is the clamped root, so an
``n``-element beam has ``4 n`` free DOFs. Damping is modal and equal for
every mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .data import EstimatorKind, FrequencyResponseSet, TimeHistorySet
from .modal import Mode, ModeSet
from .synthetic import ModalModel

DIRECTIONS = ("y", "z")
KINDS = ("translation", "rotation")

# Table-1 analytical values for the first y- and z-bending modes.
REFERENCE_F1_HZ = 14.277
REFERENCE_F2_HZ = 26.132
REFERENCE_AREA_M2 = 3.0e-4


@dataclass(frozen=True)
class BeamModel:
    length_m: float = 1.5
    n_elements: int = 8
    youngs_modulus_pa: float = 69e9
    density_kg_m3: float = 2700.0
    area_m2: float = REFERENCE_AREA_M2
    I_y_m4: float = 1.0e-8
    I_z_m4: float = 1.0e-8
    modal_damping: float = 0.03

    def __post_init__(self):
        positive = {
            "length_m": self.length_m,
            "youngs_modulus_pa": self.youngs_modulus_pa,
            "density_kg_m3": self.density_kg_m3,
            "area_m2": self.area_m2,
            "I_y_m4": self.I_y_m4,
            "I_z_m4": self.I_z_m4,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ValueError(f"n_elements must be a positive integer, got {self.n_elements}")
        if not 0 <= self.modal_damping < 1:
            raise ValueError(f"modal_damping must lie in [0, 1), got {self.modal_damping}")


@dataclass(frozen=True)
class AssembledSystem:
    """Mass and stiffness after clamping, plus the DOF bookkeeping.

    ``dof_map`` maps ``(node, direction, kind)`` to a row of ``M``/``K``.
    """

    M: np.ndarray
    K: np.ndarray
    dof_map: dict
    model: BeamModel

    @property
    def n_dof(self) -> int:
        return self.M.shape[0]

    def translation_dofs(self) -> list:
        """(node, direction) pairs of the measured translations, node-major."""
        n = self.model.n_elements
        return [(node, d) for node in range(1, n + 1) for d in DIRECTIONS]

    def translation_index(self) -> np.ndarray:
        return np.array([self.dof_map[(node, d, "translation")] for node, d in self.translation_dofs()])

    def output_labels(self) -> tuple:
        return tuple(f"n{node}{d}" for node, d in self.translation_dofs())


def element_matrices(EI: float, rhoA: float, le: float):
    """Stiffness and consistent mass of a 2-node Euler-Bernoulli element (w1, t1, w2, t2)."""
    l = le
    k = EI / l**3 * np.array([
        [12.0, 6 * l, -12.0, 6 * l],
        [6 * l, 4 * l * l, -6 * l, 2 * l * l],
        [-12.0, -6 * l, 12.0, -6 * l],
        [6 * l, 2 * l * l, -6 * l, 4 * l * l],
    ])
    m = rhoA * l / 420.0 * np.array([
        [156.0, 22 * l, 54.0, -13 * l],
        [22 * l, 4 * l * l, 13 * l, -3 * l * l],
        [54.0, 13 * l, 156.0, -22 * l],
        [-13 * l, -3 * l * l, -22 * l, 4 * l * l],
    ])
    return k, m


def assemble_beam(model: BeamModel) -> AssembledSystem:
    n = int(model.n_elements)
    le = model.length_m / n
    rhoA = model.density_kg_m3 * model.area_m2
    inertia = {"y": model.I_z_m4, "z": model.I_y_m4}

    dof_map = {}
    idx = 0
    for node in range(1, n + 1):
        for d in DIRECTIONS:
            for kind in KINDS:
                dof_map[(node, d, kind)] = idx
                idx += 1
    n_dof = idx
    M = np.zeros((n_dof, n_dof))
    K = np.zeros((n_dof, n_dof))
    for d in DIRECTIONS:
        k_e, m_e = element_matrices(model.youngs_modulus_pa * inertia[d], rhoA, le)
        for e in range(n):
            dofs = []
            for node in (e, e + 1):
                for kind in KINDS:
                    dofs.append(dof_map.get((node, d, kind), -1))
            dofs = np.array(dofs)
            keep = dofs >= 0  # root node is clamped
            sel = np.ix_(dofs[keep], dofs[keep])
            K[sel] += k_e[np.ix_(keep, keep)]
            M[sel] += m_e[np.ix_(keep, keep)]
    return AssembledSystem(M=M, K=K, dof_map=dof_map, model=model)


def _undamped(system: AssembledSystem):
    # Jacobi scaling balances translations against rotations; without it the
    # lowest eigenvalues lose about two digits. Normalizing by the largest
    # diagonal entry keeps it invariant to a uniform change of stiffness.
    kd = np.diag(system.K)
    d = 1.0 / np.sqrt(kd / kd.max())
    w2, phi = sla.eigh(system.K * np.outer(d, d), system.M * np.outer(d, d))
    phi = phi * d[:, None]
    # the Rayleigh quotient is second-order accurate in the eigenvector error
    w2 = np.einsum("in,ij,jn->n", phi, system.K, phi) / np.einsum("in,ij,jn->n", phi, system.M, phi)
    if np.any(w2 <= 0):
        raise np.linalg.LinAlgError("stiffness matrix is not positive definite")
    # eigh returns M-orthonormal vectors; fix the sign for reproducibility
    tidx = system.translation_index()
    for n in range(phi.shape[1]):
        t = phi[tidx, n]
        pivot = t[np.argmax(np.abs(t))] if np.any(t) else phi[np.argmax(np.abs(phi[:, n])), n]
        if pivot < 0:
            phi[:, n] = -phi[:, n]
    return np.sqrt(w2), phi


def _plane_fundamental(model: BeamModel, direction: str) -> float:
    system = assemble_beam(model)
    rows = [i for (node, d, kind), i in system.dof_map.items() if d == direction]
    sel = np.ix_(rows, rows)
    w2 = sla.eigh(system.K[sel], system.M[sel], eigvals_only=True, subset_by_index=[0, 0])
    return float(np.sqrt(w2[0]) / (2 * np.pi))


def calibrate_section(
    target_f1_hz: float = REFERENCE_F1_HZ,
    target_f2_hz: float = REFERENCE_F2_HZ,
    base: Optional[BeamModel] = None,
    area_m2: float = REFERENCE_AREA_M2,
    rel_tol: float = 1e-6,
) -> tuple[float, float, float]:
    """Find ``(area, I_y, I_z)`` putting the first y- and z-plane modes at the targets.

    The lower target is assigned to the y plane (bending with ``I_z``) and the
    higher one to the z plane. Each inertia is found by bracketed root search
    on the plane's fundamental frequency.
    """
    if not 0 < target_f1_hz <= target_f2_hz:
        raise ValueError("targets must satisfy 0 < f1 <= f2")
    base = replace(base or BeamModel(), area_m2=area_m2)

    def solve(direction: str, target: float) -> float:
        field_name = "I_z_m4" if direction == "y" else "I_y_m4"

        def err(log_inertia):
            model = replace(base, **{field_name: float(np.exp(log_inertia))})
            return _plane_fundamental(model, direction) - target

        lo, hi = np.log(1e-14), np.log(1e-2)
        if err(lo) * err(hi) > 0:
            raise ValueError(f"target {target} Hz is not bracketed for the {direction} plane")
        return float(np.exp(brentq(err, lo, hi, xtol=rel_tol * 1e-3, rtol=1e-14)))

    I_z = solve("y", target_f1_hz)
    I_y = solve("z", target_f2_hz)
    return area_m2, I_y, I_z


def calibrated_model(
    target_f1_hz: float = REFERENCE_F1_HZ, target_f2_hz: float = REFERENCE_F2_HZ, **kwargs
) -> BeamModel:
    """Default beam with its section calibrated by :func:`calibrate_section`."""
    area, I_y, I_z = calibrate_section(target_f1_hz, target_f2_hz)
    return BeamModel(area_m2=area, I_y_m4=I_y, I_z_m4=I_z, **kwargs)


def modal_basis(system: AssembledSystem):
    """Natural circular frequencies and mass-normalized mode shapes (all DOFs)."""
    return _undamped(system)


def analytical_modes(system: AssembledSystem) -> ModeSet:
    """Undamped modes of ``K phi = w^2 M phi`` with shapes on the translation DOFs.

    The returned shapes are the translation rows of the mass-normalized
    eigenvectors, rescaled to the :class:`Mode` convention; the M-orthonormal
    vectors themselves come from :func:`modal_basis`.
    """
    w, phi = _undamped(system)
    zeta = system.model.modal_damping
    tidx = system.translation_index()
    modes = [Mode.from_frequency(w[n] / (2 * np.pi), zeta, phi[tidx, n]) for n in range(w.size)]
    return ModeSet(modes=tuple(modes), order_k=2 * w.size, source="analytical")


def _force_vector(system: AssembledSystem, node: int, direction: str, amplitude: float):
    if node == 0:
        raise ValueError("cannot load the clamped root node")
    key = (node, direction, "translation")
    if key not in system.dof_map:
        raise ValueError(f"no translation DOF at node {node} direction {direction!r}")
    f = np.zeros(system.n_dof)
    f[system.dof_map[key]] = amplitude
    return f


def simulate_step_response(
    system: AssembledSystem,
    inputs: Sequence[tuple[int, str, float]] = ((1, "y", 1.0), (1, "z", 1.0)),
    fs_hz: float = 800.0,
    n_samples: int = 2**16,
    max_mode_hz: Optional[float] = None,
) -> TimeHistorySet:
    """Exact modal superposition of step loads applied at ``t = 0``.

    Each entry of ``inputs`` is ``(node, direction, amplitude_N)``; all steps
    act simultaneously. Modes above ``max_mode_hz`` are dropped, which acts as
    an ideal anti-aliasing filter; by default that is the Nyquist frequency.
    Pass ``np.inf`` to keep every mode.
    """
    if n_samples < 2 or n_samples & (n_samples - 1):
        raise ValueError(f"n_samples must be a power of two, got {n_samples}")
    if max_mode_hz is None:
        max_mode_hz = fs_hz / 2
    w, phi = _undamped(system)
    keep = w / (2 * np.pi) <= max_mode_hz
    w, phi = w[keep], phi[:, keep]
    zeta = system.model.modal_damping
    tidx = system.translation_index()

    t = np.arange(n_samples) / fs_hz
    forces = np.array([_force_vector(system, node, d, amp) for node, d, amp in inputs])
    load = forces.sum(axis=0)
    modal_load = phi.T @ load
    q = step_modal_response(modal_load, w, zeta, t)
    outputs = phi[tidx] @ q
    input_hist = np.repeat(np.array([amp for *_, amp in inputs], dtype=float)[:, None],
                           n_samples, axis=1)
    return TimeHistorySet(
        fs_hz=fs_hz,
        inputs=input_hist,
        outputs=outputs,
        input_labels=tuple(f"F_n{node}{d}" for node, d, _ in inputs),
        output_labels=system.output_labels(),
    )


def step_modal_response(modal_load, w, zeta, t) -> np.ndarray:
    """Underdamped single-DOF step responses, one row per mode."""
    modal_load = np.atleast_1d(modal_load)[:, None]
    w = np.atleast_1d(w)[:, None]
    wd = w * np.sqrt(1 - zeta**2)
    decay = np.exp(-zeta * w * t[None, :])
    shape = np.cos(wd * t) + zeta / np.sqrt(1 - zeta**2) * np.sin(wd * t)
    return modal_load / w**2 * (1.0 - decay * shape)


def receptance(
    system: AssembledSystem,
    freqs_hz,
    inputs: Sequence[tuple[int, str]] = ((1, "y"), (1, "z")),
    max_mode_hz: float = np.inf,
) -> np.ndarray:
    """Modal receptance ``sum_n phi_out phi_in^T / (w_n^2 - w^2 + 2 j zeta w_n w)``.

    Returns shape (p, m, N); ``freqs_hz`` may contain 0.
    """
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    w, phi = _undamped(system)
    keep = w / (2 * np.pi) <= max_mode_hz
    w, phi = w[keep], phi[:, keep]
    zeta = system.model.modal_damping
    tidx = system.translation_index()
    in_idx = [system.dof_map[(node, d, "translation")] for node, d in inputs]
    omega = 2 * np.pi * freqs
    denom = w[:, None] ** 2 - omega[None, :] ** 2 + 2j * zeta * w[:, None] * omega[None, :]
    return np.einsum("pn,mn,nk->pmk", phi[tidx], phi[in_idx], 1.0 / denom)


def exact_frf(
    system: AssembledSystem,
    freqs_hz,
    inputs: Sequence[tuple[int, str]] = ((1, "y"), (1, "z")),
    max_mode_hz: float = np.inf,
) -> FrequencyResponseSet:
    """Noise-free receptance FRF on a positive frequency grid, summed over all modes."""
    H = receptance(system, freqs_hz, inputs, max_mode_hz)
    return FrequencyResponseSet(
        freqs_hz=np.asarray(freqs_hz, dtype=float),
        values=H,
        output_labels=system.output_labels(),
        input_labels=tuple(f"F_n{node}{d}" for node, d in inputs),
        estimator_kind=EstimatorKind.EXACT,
    )


def modal_model(
    system: AssembledSystem,
    inputs: Sequence[tuple[int, str]] = ((1, "y"), (1, "z")),
    max_mode_hz: float = np.inf,
) -> ModalModel:
    """The beam's input/output behaviour as a :class:`ModalModel`.

    Useful for responses to arbitrary force histories, e.g. broadband
    excitation for H1 estimation.
    """
    w, phi = _undamped(system)
    keep = w / (2 * np.pi) <= max_mode_hz
    w, phi = w[keep], phi[:, keep]
    zeta = system.model.modal_damping
    wd = w * np.sqrt(1 - zeta**2)
    in_idx = [system.dof_map[(node, d, "translation")] for node, d in inputs]
    poles = -zeta * w + 1j * wd
    return ModalModel(poles, phi[system.translation_index()].astype(complex),
                      phi[in_idx] / (2j * wd))
