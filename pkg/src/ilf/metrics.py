"""Accuracy tables against reference modes and identification timing studies."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from . import loewner
from .data import FrequencyResponseSet
from .modal import ModeSet, extract_modes, match_modes

__all__ = [
    "ComparisonRow",
    "ComparisonReport",
    "compare",
    "TimingReport",
    "timing_sweep",
    "identify_ilf",
    "identify_lf_loop_baseline",
    "format_table",
    "METHODS",
]

ABSENT = "NA"


@dataclass(frozen=True)
class ComparisonRow:
    reference_index: int
    identified_index: int
    reference_freq_hz: float
    identified_freq_hz: float
    reference_damping: float
    identified_damping: float
    mac: float

    @property
    def freq_error_pct(self) -> float:
        return 100.0 * (self.identified_freq_hz - self.reference_freq_hz) / self.reference_freq_hz

    @property
    def damping_error_pct(self) -> float:
        return 100.0 * (self.identified_damping - self.reference_damping) / self.reference_damping


@dataclass(frozen=True)
class ComparisonReport:
    """Matched modes with relative errors in percent and MAC.

    ``unmatched_reference`` and ``unmatched_identified`` hold indices into the
    respective mode sets that found no partner.
    """

    rows: tuple = ()
    unmatched_reference: tuple = ()
    unmatched_identified: tuple = ()
    reference_freqs_hz: tuple = ()

    def __len__(self):
        return len(self.rows)

    @property
    def freq_errors_pct(self) -> np.ndarray:
        return np.array([r.freq_error_pct for r in self.rows])

    @property
    def damping_errors_pct(self) -> np.ndarray:
        return np.array([r.damping_error_pct for r in self.rows])

    @property
    def macs(self) -> np.ndarray:
        return np.array([r.mac for r in self.rows])

    def summary(self) -> dict:
        """Max/mean absolute errors and the smallest MAC (NaN when nothing matched)."""
        if not self.rows:
            nan = float("nan")
            return dict(max_abs_df_pct=nan, mean_abs_df_pct=nan, max_abs_dzeta_pct=nan,
                        mean_abs_dzeta_pct=nan, min_mac=nan, n_matched=0,
                        n_unmatched_reference=len(self.unmatched_reference))
        df = np.abs(self.freq_errors_pct)
        dz = np.abs(self.damping_errors_pct)
        return dict(
            max_abs_df_pct=float(df.max()),
            mean_abs_df_pct=float(df.mean()),
            max_abs_dzeta_pct=float(dz.max()),
            mean_abs_dzeta_pct=float(dz.mean()),
            min_mac=float(self.macs.min()),
            n_matched=len(self.rows),
            n_unmatched_reference=len(self.unmatched_reference),
        )

    def table(self) -> list[list]:
        """Rows for CSV/text output; unmatched reference modes appear with empty fields."""
        header = ["mode", "ref_freq_hz", "id_freq_hz", "df_pct", "ref_damping",
                  "id_damping", "dzeta_pct", "mac", "status"]
        body = []
        for r in self.rows:
            body.append([r.reference_index + 1, r.reference_freq_hz, r.identified_freq_hz,
                         r.freq_error_pct, r.reference_damping, r.identified_damping,
                         r.damping_error_pct, r.mac, "matched"])
        for i in self.unmatched_reference:
            body.append([i + 1, self.reference_freqs_hz[i], "", "", "", "", "", "", "unmatched"])
        body.sort(key=lambda row: row[0])
        return [header] + body

    def to_csv(self) -> str:
        return _to_csv(self.table())

    def to_text(self) -> str:
        return format_table(self.table())


def compare(
    identified: ModeSet, reference: ModeSet, freq_window_pct: float = 2.0
) -> ComparisonReport:
    """Match ``identified`` against ``reference`` and tabulate the errors.

    Errors are ``100 * (identified - reference) / reference``.

    Examples
    --------
    >>> from ilf.modal import Mode, ModeSet
    >>> ref = ModeSet((Mode.from_frequency(10.0, 0.03, [1.0, 0.5]),))
    >>> compare(ref, ref).summary()["max_abs_df_pct"]
    0.0
    """
    pairing = match_modes(identified, reference, freq_window_pct)
    rows = []
    for i, c, value in pairing.pairs:
        ref, cand = reference[i], identified[c]
        rows.append(ComparisonRow(
            reference_index=i,
            identified_index=c,
            reference_freq_hz=ref.natural_frequency_hz,
            identified_freq_hz=cand.natural_frequency_hz,
            reference_damping=ref.damping_ratio,
            identified_damping=cand.damping_ratio,
            mac=value,
        ))
    return ComparisonReport(
        rows=tuple(rows),
        unmatched_reference=pairing.unmatched_reference,
        unmatched_identified=pairing.unmatched_candidates,
        reference_freqs_hz=tuple(reference.frequencies_hz),
    )


# ---------------------------------------------------------------------------
# identification pipelines that are timed


def _legacy_continuous(realization: loewner.StateSpaceRealization):
    """Explicit state matrix via one fresh dense solve per column of A and B.

    Nothing is factorized once and reused; this mirrors the generic
    descriptor-to-explicit conversions that the vectorized pipeline replaces.
    """
    E, A, B = realization.E, realization.A, realization.B
    k = E.shape[0]
    Ac = np.empty_like(A)
    Bc = np.empty_like(B)
    for j in range(k):
        Ac[:, j] = np.linalg.solve(E.copy(), A[:, j].copy())
    for j in range(B.shape[1]):
        Bc[:, j] = np.linalg.solve(E.copy(), B[:, j].copy())
    return loewner.StateSpaceRealization(E=E, A=A, B=B, C=realization.C, Ac=Ac)


def identify_ilf(frf, k, seed=0, band_hz=None, svd_rank=None) -> ModeSet:
    """Vectorized real transform and pseudoinverse conversion."""
    data = loewner.partition_data(frf, seed)
    pencil = loewner.real_transform(loewner.build_loewner_pencil(data), data, mode="vectorized")
    factors = loewner.svd_factors(pencil, max_order=svd_rank or k)
    real = loewner.to_continuous(loewner.reduce_realization(pencil, k, factors))
    return extract_modes(real, band_hz or _band(frf), source=f"ilf k={k}")


def identify_lf_loop_baseline(frf, k, seed=0, band_hz=None, svd_rank=None) -> ModeSet:
    """Loop-grown dense transforms and per-column explicit conversion."""
    data = loewner.partition_data(frf, seed)
    pencil = loewner.real_transform(loewner.build_loewner_pencil(data), data, mode="loop_baseline")
    factors = loewner.svd_factors(pencil, max_order=svd_rank or k)
    real = _legacy_continuous(loewner.reduce_realization(pencil, k, factors))
    return extract_modes(real, band_hz or _band(frf), source=f"lf k={k}")


def _band(frf):
    return (float(frf.freqs_hz[0]), float(frf.freqs_hz[-1]))


METHODS: dict[str, Callable] = {
    "ilf": identify_ilf,
    "lf_loop_baseline": identify_lf_loop_baseline,
}


@dataclass(frozen=True)
class TimingRow:
    method: str
    order: int
    mean_s: float
    std_s: Optional[float]  # None when a single repeat was taken
    n_repeats: int


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    slope_stderr: float

    def slope_is_flat(self, n_stderr: float = 2.0) -> bool:
        if not math.isfinite(self.slope_stderr):
            return False
        return abs(self.slope) < n_stderr * self.slope_stderr or self.slope == 0


@dataclass
class TimingReport:
    """Per (method, order) wall times and a linear fit of mean time against order."""

    rows: list = field(default_factory=list)
    regressions: dict = field(default_factory=dict)
    n_bins: int = 0

    def rows_for(self, method: str) -> list:
        return [r for r in self.rows if r.method == method]

    def mean_times(self, method: str) -> dict:
        return {r.order: r.mean_s for r in self.rows_for(method)}

    def table(self) -> list[list]:
        header = ["method", "order", "mean_s", "std_s", "n_repeats"]
        body = [[r.method, r.order, r.mean_s, ABSENT if r.std_s is None else r.std_s, r.n_repeats]
                for r in self.rows]
        return [header] + body

    def regression_table(self) -> list[list]:
        header = ["method", "slope_s_per_order", "intercept_s", "slope_stderr"]
        return [header] + [[m, g.slope, g.intercept, g.slope_stderr]
                           for m, g in self.regressions.items()]

    def to_csv(self) -> str:
        return _to_csv(self.table())

    def to_text(self) -> str:
        return format_table(self.table()) + "\n\n" + format_table(self.regression_table())


def _fit(orders, means) -> Regression:
    if len(orders) < 3:
        return Regression(float("nan"), float("nan"), float("nan"))
    fit = stats.linregress(orders, means)
    return Regression(float(fit.slope), float(fit.intercept), float(fit.stderr))


def timing_sweep(
    frf: FrequencyResponseSet,
    k_range: tuple = (32, 60, 2),
    n_repeats: int = 10,
    methods: Sequence[str] = ("ilf", "lf_loop_baseline"),
    seed: int = 0,
    svd_rank: Optional[int] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> TimingReport:
    """Time the full identification at every order for every method.

    Each measurement covers partitioning, pencil assembly, the real
    transform, the SVD, projection, conversion to an explicit state matrix
    and modal extraction; FRF estimation is excluded. Runs are sequential
    with BLAS pinned to one thread. All methods share the same SVD so only
    the transform and conversion stages differ. ``svd_rank`` (default the
    largest order of the sweep) fixes how many singular vectors are computed,
    which keeps the SVD cost independent of the order being timed.

    Each method gets one untimed warm-up call. Repeats form the outer loop and
    every pass visits the orders in a fresh permutation drawn from ``seed``, so
    slow drift of the machine does not masquerade as a trend with order.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be at least 1")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
    k_min, k_max, *rest = k_range
    step = rest[0] if rest else 2
    orders = list(range(k_min, k_max + 1, step))
    rank = svd_rank or k_max
    report = TimingReport(n_bins=frf.n_bins)
    rng = np.random.default_rng(seed)
    with threadpool_limits(limits=1):
        for method in methods:
            fn = METHODS[method]
            fn(frf, orders[0], seed=seed, svd_rank=rank)
            samples = {k: [] for k in orders}
            for _ in range(n_repeats):
                for k in rng.permutation(orders):
                    t0 = clock()
                    fn(frf, int(k), seed=seed, svd_rank=rank)
                    samples[int(k)].append(clock() - t0)
            means = []
            for k in orders:
                mean = float(np.mean(samples[k]))
                std = float(np.std(samples[k], ddof=1)) if n_repeats > 1 else None
                report.rows.append(TimingRow(method, k, mean, std, n_repeats))
                means.append(mean)
            report.regressions[method] = _fit(orders, means)
    return report


# ---------------------------------------------------------------------------
# output helpers


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _to_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in table:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def format_table(table, precision: int = 6) -> str:
    """Right-aligned plain-text table; floats printed with ``precision`` significant digits."""

    def show(v):
        if isinstance(v, float):
            return f"{v:.{precision}g}"
        return str(v)

    cells = [[show(v) for v in row] for row in table]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
