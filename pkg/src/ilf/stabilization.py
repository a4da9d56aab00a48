"""Model-order sweeps, pole stability flags and consolidated stable modes."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import loewner
from .data import FrequencyResponseSet
from .modal import ModeSet, extract_modes, mac

logger = logging.getLogger(__name__)

__all__ = [
    "StabilityCriteria",
    "StabilizationDiagram",
    "IdentificationContext",
    "prepare",
    "stabilization_scan",
    "classify",
    "diagram_export",
    "CSV_HEADER",
]

CSV_HEADER = ("order", "freq_hz", "damping", "flag")
NEW, FREQ_STABLE, STABLE = "n", "f", "s"


@dataclass(frozen=True)
class StabilityCriteria:
    """Thresholds between consecutive orders.

    ``freq_tol_pct`` and ``damp_tol_pct`` are relative changes in percent;
    ``min_consecutive`` counts fully stable poles in a chain.
    """

    freq_tol_pct: float = 1.0
    damp_tol_pct: float = 5.0
    mac_min: float = 0.98
    min_consecutive: int = 3

    def __post_init__(self):
        if self.freq_tol_pct < 0 or self.damp_tol_pct < 0:
            raise ValueError("tolerances must be non-negative")
        if not 0 < self.mac_min <= 1:
            raise ValueError("mac_min must lie in (0, 1]")
        if self.min_consecutive < 2:
            raise ValueError("min_consecutive must be at least 2")


@dataclass
class StabilizationDiagram:
    """Per-order mode sets with stability flags.

    ``flags[i][j]`` is the flag of mode ``j`` at ``orders[i]`` and
    ``predecessors[i][j]`` the index of the mode it was linked to at the
    previous order (-1 when unlinked). ``chains`` lists, per consolidated
    mode, the ``(order index, mode index)`` members of its stable chain.
    """

    orders: list = field(default_factory=list)
    mode_sets: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    predecessors: list = field(default_factory=list)
    consolidated: ModeSet = field(default_factory=ModeSet)
    chains: list = field(default_factory=list)
    criteria: StabilityCriteria = field(default_factory=StabilityCriteria)
    status: list = field(default_factory=list)

    def __len__(self):
        return len(self.orders)

    def rows(self):
        """(order, frequency, damping, flag) for every pole, in order."""
        for k, modes, flags in zip(self.orders, self.mode_sets, self.flags):
            for mode, flag in zip(modes, flags):
                yield k, mode.natural_frequency_hz, mode.damping_ratio, flag


@dataclass(frozen=True)
class IdentificationContext:
    """Everything order-independent: the real pencil and its singular factors."""

    pencil: loewner.LoewnerPencil
    factors: loewner.SvdFactors
    band_hz: tuple

    @property
    def max_order(self) -> int:
        return min(self.factors.Y.shape[1], self.factors.X.shape[1])

    def realization(self, k: int) -> loewner.StateSpaceRealization:
        return loewner.to_continuous(loewner.reduce_realization(self.pencil, k, self.factors))

    def modes(self, k: int) -> ModeSet:
        return extract_modes(self.realization(k), self.band_hz, source=f"ilf k={k}")


def prepare(
    frf: FrequencyResponseSet,
    seed: int = 0,
    max_order: Optional[int] = None,
    band_hz: Optional[tuple] = None,
    mode: str = "vectorized",
) -> IdentificationContext:
    """Partition, build and real-transform the pencil, then factor it once."""
    data = loewner.partition_data(frf, seed)
    pencil = loewner.real_transform(loewner.build_loewner_pencil(data), data, mode=mode)
    factors = loewner.svd_factors(pencil, max_order=max_order)
    if band_hz is None:
        band_hz = (float(frf.freqs_hz[0]), float(frf.freqs_hz[-1]))
    return IdentificationContext(pencil, factors, tuple(band_hz))


def _link(prev: ModeSet, cur: ModeSet, criteria: StabilityCriteria):
    """Flag each pole of ``cur`` against ``prev``; each previous pole is used at most once."""
    flags = [NEW] * len(cur)
    preds = [-1] * len(cur)
    candidates = []
    for j, mode in enumerate(cur):
        f = mode.natural_frequency_hz
        for i, old in enumerate(prev):
            df = abs(f - old.natural_frequency_hz) / old.natural_frequency_hz * 100
            if df > criteria.freq_tol_pct:
                continue
            dz = abs(mode.damping_ratio - old.damping_ratio) / old.damping_ratio * 100
            full = dz <= criteria.damp_tol_pct and mac(mode.shape, old.shape) >= criteria.mac_min
            # fully stable links first, then by frequency distance
            candidates.append((not full, df, j, i, full))
    candidates.sort()
    used = set()
    for _, _, j, i, full in candidates:
        if preds[j] >= 0 or i in used:
            continue
        preds[j] = i
        used.add(i)
        flags[j] = STABLE if full else FREQ_STABLE
    return flags, preds


def classify(orders, mode_sets, criteria: StabilityCriteria) -> StabilizationDiagram:
    """Flag poles across consecutive orders and consolidate stable chains."""
    flags, preds = [], []
    for i, modes in enumerate(mode_sets):
        if i == 0:
            flags.append([NEW] * len(modes))
            preds.append([-1] * len(modes))
        else:
            f, p = _link(mode_sets[i - 1], modes, criteria)
            flags.append(f)
            preds.append(p)

    # walk stable links backwards from every pole that has no stable successor
    has_stable_child = [set() for _ in mode_sets]
    for i in range(1, len(mode_sets)):
        for j, (flag, pred) in enumerate(zip(flags[i], preds[i])):
            if flag == STABLE:
                has_stable_child[i - 1].add(pred)
    chains = []
    for i in range(len(mode_sets) - 1, -1, -1):
        for j in range(len(mode_sets[i])):
            if flags[i][j] != STABLE or j in has_stable_child[i]:
                continue
            chain = []
            ii, jj = i, j
            while ii >= 0 and flags[ii][jj] == STABLE:
                chain.append((ii, jj))
                jj = preds[ii][jj]
                ii -= 1
            if len(chain) >= criteria.min_consecutive:
                chains.append(chain[::-1])

    representatives = []
    for chain in chains:
        members = sorted(chain, key=lambda ij: mode_sets[ij[0]][ij[1]].natural_frequency_hz)
        ii, jj = members[(len(members) - 1) // 2]
        representatives.append((mode_sets[ii][jj], chain))

    # a broken chain can restart on the same physical mode; keep the longest
    representatives.sort(key=lambda rc: (-len(rc[1]), rc[0].natural_frequency_hz))
    kept = []
    for mode, chain in representatives:
        duplicate = any(
            abs(mode.natural_frequency_hz - other.natural_frequency_hz)
            <= criteria.freq_tol_pct / 100 * other.natural_frequency_hz
            and mac(mode.shape, other.shape) >= criteria.mac_min
            for other, _ in kept
        )
        if not duplicate:
            kept.append((mode, chain))
    kept.sort(key=lambda rc: rc[0].natural_frequency_hz)
    consolidated = ModeSet(tuple(m for m, _ in kept), order_k=0, source="stabilization")
    return StabilizationDiagram(
        orders=list(orders),
        mode_sets=list(mode_sets),
        flags=flags,
        predecessors=preds,
        consolidated=consolidated,
        chains=[c for _, c in kept],
        criteria=criteria,
    )


def stabilization_scan(
    frf: FrequencyResponseSet,
    k_range: tuple = (32, 60, 2),
    criteria: Optional[StabilityCriteria] = None,
    seed: int = 0,
    band_hz: Optional[tuple] = None,
    n_jobs: int = 1,
    context: Optional[IdentificationContext] = None,
) -> StabilizationDiagram:
    """Identify at every order in ``k_range`` and build the stabilization diagram.

    The pencil and its SVD do not depend on the order, so they are computed
    once (or taken from ``context``) and each order only re-projects them.
    Orders above the available rank are dropped and noted in ``status``.
    """
    criteria = criteria or StabilityCriteria()
    k_min, k_max, *rest = k_range
    step = rest[0] if rest else 2
    if k_min < 2 or step < 1 or k_max < k_min:
        raise ValueError(f"invalid order range {k_range}")
    if k_min % 2 or step % 2:
        raise ValueError("orders must be even (conjugate pairs)")
    if context is None:
        context = prepare(frf, seed, max_order=k_max, band_hz=band_hz)
    orders = list(range(k_min, k_max + 1, step))
    status = []
    usable = [k for k in orders if k <= context.max_order]
    if len(usable) < len(orders):
        msg = f"orders above {context.max_order} exceed the data and were dropped"
        logger.warning(msg)
        status.append(msg)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            mode_sets = list(pool.map(context.modes, usable))
    else:
        mode_sets = [context.modes(k) for k in usable]
    diagram = classify(usable, mode_sets, criteria)
    diagram.status = status
    return diagram


def diagram_csv(diagram: StabilizationDiagram) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for k, f, z, flag in diagram.rows():
        writer.writerow([k, repr(float(f)), repr(float(z)), flag])
    return buf.getvalue()


def diagram_export(
    diagram: StabilizationDiagram,
    csv_path,
    svg_path=None,
    overlay_frf: Optional[FrequencyResponseSet] = None,
    channel: Optional[tuple[int, int]] = None,
) -> None:
    """Write the pole table as CSV and, optionally, an SVG scatter of poles vs order.

    The overlay shows ``|H|`` of one ``(output, input)`` channel, or the mean
    magnitude over all channels when ``channel`` is None.
    """
    Path(csv_path).write_text(diagram_csv(diagram))
    if svg_path is None:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 5))
    glyphs = {NEW: ("x", "tab:gray", "new"), FREQ_STABLE: ("o", "tab:orange", "stable freq."),
              STABLE: ("+", "tab:blue", "stable")}
    rows = list(diagram.rows())
    for flag, (marker, color, label) in glyphs.items():
        pts = [(f, k) for k, f, _, fl in rows if fl == flag]
        if pts:
            f, k = zip(*pts)
            ax.scatter(f, k, marker=marker, color=color, label=label, s=18)
    for mode in diagram.consolidated:
        ax.axvline(mode.natural_frequency_hz, color="tab:green", lw=0.5, ls=":")
    ax.set_xlabel("Frequency [Hz]")
    ax.set_ylabel("Model order")
    if overlay_frf is not None:
        ax2 = ax.twinx()
        if channel is None:
            mag = np.mean(np.abs(overlay_frf.values), axis=(0, 1))
        else:
            mag = np.abs(overlay_frf.values[channel[0], channel[1]])
        ax2.semilogy(overlay_frf.freqs_hz, mag, color="k", lw=0.7)
        ax2.set_ylabel("|H|")
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    # a fixed salt keeps the generated element ids, and so the file, reproducible
    with matplotlib.rc_context({"svg.hashsalt": "ilf"}):
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
