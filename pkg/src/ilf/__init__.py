"""Modal identification from frequency response data with the Loewner framework.

The main entry points are :class:`LoewnerModalIdentifier` for a single model
order and :class:`StabilizedModalIdentifier` for an order sweep with
stability checks. The ``beam`` module provides a finite-element cantilever
with known modes, and ``signals`` turns time histories into FRFs.
"""

from .data import EstimatorKind, FrequencyResponseSet, TimeHistorySet
from .estimator import LoewnerModalIdentifier, StabilizedModalIdentifier
from .loewner import (
    InterpolationData,
    LoewnerPencil,
    StateSpaceRealization,
    build_loewner_pencil,
    evaluate_model,
    partition_data,
    rank_reveal,
    real_transform,
    reduce_realization,
    sylvester_residuals,
    to_continuous,
)
from .modal import Mode, ModeSet, extract_modes, mac, match_modes
from .stabilization import StabilityCriteria, StabilizationDiagram, stabilization_scan

__version__ = "0.1.0"

__all__ = [
    "EstimatorKind",
    "FrequencyResponseSet",
    "TimeHistorySet",
    "LoewnerModalIdentifier",
    "StabilizedModalIdentifier",
    "InterpolationData",
    "LoewnerPencil",
    "StateSpaceRealization",
    "build_loewner_pencil",
    "evaluate_model",
    "partition_data",
    "rank_reveal",
    "real_transform",
    "reduce_realization",
    "sylvester_residuals",
    "to_continuous",
    "Mode",
    "ModeSet",
    "extract_modes",
    "mac",
    "match_modes",
    "StabilityCriteria",
    "StabilizationDiagram",
    "stabilization_scan",
]
