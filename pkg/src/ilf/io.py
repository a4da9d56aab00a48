"""CSV/JSON serialization of time histories, FRFs and mode sets, plus config files.

File layouts
------------
time histories
    ``t,<input labels...>,<output labels...>`` with a ``.json`` sidecar
    holding ``fs_hz`` and which columns are inputs and outputs.
frequency responses
    ``freq_hz,re_<i>_<j>,im_<i>_<j>,...`` with 1-based output ``i`` and input
    ``j``. The sidecar names the channel pairs, the labels and the estimator.
    Without a sidecar the indices in the header are enough to rebuild the
    tensor, which makes this the ingestion path for external data.
mode sets
    ``mode,freq_hz,damping,pole_re,pole_im,shape_re_<i>...,shape_im_<i>...``
config
    One ``section.key = value`` per line; ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Optional

import numpy as np

from .data import EstimatorKind, FrequencyResponseSet, TimeHistorySet
from .modal import Mode, ModeSet

__all__ = [
    "FileFormatError",
    "sidecar_path",
    "write_time_csv",
    "read_time_csv",
    "write_frf_csv",
    "read_frf_csv",
    "write_modes_csv",
    "read_modes_csv",
    "parse_config",
    "read_config",
]

_FRF_COLUMN = re.compile(r"^(re|im)_(\d+)_(\d+)$")


class FileFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_numeric(path, expected_header=None):
    """Header plus a float matrix; any bad cell is reported with its line number."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(path, "file is empty", 1) from None
        header = [h.strip() for h in header]
        if expected_header is not None and header[: len(expected_header)] != list(expected_header):
            raise FileFormatError(path, f"header must start with {','.join(expected_header)}", 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FileFormatError(
                    path, f"expected {len(header)} fields, found {len(row)}", lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise FileFormatError(path, f"not a number: {bad!r}", lineno) from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _read_sidecar(path, required: bool):
    side = sidecar_path(path)
    if not side.exists():
        if required:
            raise FileFormatError(side, "sidecar file is missing")
        return None
    try:
        return json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(side, f"invalid JSON: {exc.msg}", exc.lineno) from None


# ---------------------------------------------------------------------------
# time histories


def write_time_csv(th: TimeHistorySet, path) -> None:
    header = ["t", *th.input_labels, *th.output_labels]
    block = np.vstack([th.time[None, :], th.inputs, th.outputs]).T
    _write_rows(path, header, ([_fmt(v) for v in row] for row in block))
    meta = {
        "fs_hz": th.fs_hz,
        "inputs": list(th.input_labels),
        "outputs": list(th.output_labels),
        "metadata": {k: v for k, v in th.metadata.items() if _jsonable(v)},
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _jsonable(value) -> bool:
    return isinstance(value, (str, int, float, bool, type(None), list, tuple))


def read_time_csv(path, n_inputs: Optional[int] = None, fs_hz: Optional[float] = None) -> TimeHistorySet:
    """Read a time-history CSV.

    Without a sidecar, ``n_inputs`` tells how many leading channels are
    inputs and ``fs_hz`` defaults to the inverse of the first time step.
    """
    header, data = _read_numeric(path, expected_header=["t"])
    meta = _read_sidecar(path, required=False) or {}
    labels = header[1:]
    if "inputs" in meta:
        n_in = len(meta["inputs"])
    elif n_inputs is not None:
        n_in = n_inputs
    else:
        raise FileFormatError(path, "no sidecar; pass n_inputs to split the channels")
    if data.shape[0] < 2:
        raise FileFormatError(path, "need at least two samples")
    fs = meta.get("fs_hz", fs_hz)
    if fs is None:
        fs = 1.0 / (data[1, 0] - data[0, 0])
    return TimeHistorySet(
        fs_hz=float(fs),
        inputs=data[:, 1:1 + n_in].T,
        outputs=data[:, 1 + n_in:].T,
        input_labels=tuple(labels[:n_in]),
        output_labels=tuple(labels[n_in:]),
        metadata=meta.get("metadata", {}),
    )


# ---------------------------------------------------------------------------
# frequency responses


def write_frf_csv(frf: FrequencyResponseSet, path) -> None:
    p, m, _ = frf.values.shape
    pairs = [(i, j) for i in range(p) for j in range(m)]
    header = ["freq_hz"]
    for i, j in pairs:
        header += [f"re_{i + 1}_{j + 1}", f"im_{i + 1}_{j + 1}"]
    cols = [frf.freqs_hz]
    for i, j in pairs:
        cols += [frf.values[i, j].real, frf.values[i, j].imag]
    block = np.column_stack(cols)
    _write_rows(path, header, ([_fmt(v) for v in row] for row in block))
    meta = {
        "estimator_kind": frf.estimator_kind.value,
        "output_labels": list(frf.output_labels),
        "input_labels": list(frf.input_labels),
        "channel_pairs": [
            {"column": f"{i + 1}_{j + 1}", "output": frf.output_labels[i], "input": frf.input_labels[j]}
            for i, j in pairs
        ],
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_frf_csv(path) -> FrequencyResponseSet:
    header, data = _read_numeric(path, expected_header=["freq_hz"])
    parsed = {}
    for col, name in enumerate(header[1:], start=1):
        match = _FRF_COLUMN.match(name)
        if not match:
            raise FileFormatError(path, f"unrecognized column {name!r}", 1)
        part, i, j = match.group(1), int(match.group(2)), int(match.group(3))
        if i < 1 or j < 1:
            raise FileFormatError(path, f"channel indices are 1-based: {name!r}", 1)
        if (part, i, j) in parsed:
            raise FileFormatError(path, f"duplicate column {name!r}", 1)
        parsed[(part, i, j)] = col
    if not parsed:
        raise FileFormatError(path, "no response columns", 1)
    p = max(i for _, i, _ in parsed)
    m = max(j for _, _, j in parsed)
    values = np.zeros((p, m, data.shape[0]), dtype=complex)
    for i in range(1, p + 1):
        for j in range(1, m + 1):
            try:
                re_col, im_col = parsed[("re", i, j)], parsed[("im", i, j)]
            except KeyError:
                raise FileFormatError(path, f"missing re/im column for channel {i}_{j}", 1) from None
            values[i - 1, j - 1] = data[:, re_col] + 1j * data[:, im_col]
    freqs = data[:, 0]
    bad = np.flatnonzero(freqs <= 0)
    if bad.size:
        raise FileFormatError(path, "frequencies must be positive", int(bad[0]) + 2)
    bad = np.flatnonzero(np.diff(freqs) <= 0)
    if bad.size:
        raise FileFormatError(path, "frequencies must be strictly increasing", int(bad[0]) + 3)
    meta = _read_sidecar(path, required=False) or {}
    try:
        return FrequencyResponseSet(
            freqs_hz=freqs,
            values=values,
            output_labels=tuple(meta.get("output_labels", ())),
            input_labels=tuple(meta.get("input_labels", ())),
            estimator_kind=meta.get("estimator_kind", EstimatorKind.DIRECT_RATIO),
        )
    except ValueError as exc:
        raise FileFormatError(sidecar_path(path), str(exc)) from None


# ---------------------------------------------------------------------------
# mode sets


def write_modes_csv(modes: ModeSet, path, n_outputs: Optional[int] = None) -> None:
    p = len(modes[0].shape) if len(modes) else (n_outputs or 0)
    header = ["mode", "freq_hz", "damping", "pole_re", "pole_im"]
    header += [f"shape_re_{i + 1}" for i in range(p)] + [f"shape_im_{i + 1}" for i in range(p)]
    rows = []
    for n, mode in enumerate(modes, start=1):
        row = [str(n), _fmt(mode.natural_frequency_hz), _fmt(mode.damping_ratio),
               _fmt(mode.pole.real), _fmt(mode.pole.imag)]
        row += [_fmt(v) for v in mode.shape.real] + [_fmt(v) for v in mode.shape.imag]
        rows.append(row)
    _write_rows(path, header, rows)


def read_modes_csv(path, source: str = "file") -> ModeSet:
    header, data = _read_numeric(path, expected_header=["mode", "freq_hz", "damping", "pole_re", "pole_im"])
    p = (len(header) - 5) // 2
    modes = []
    for row in data:
        pole = complex(row[3], row[4])
        shape = row[5:5 + p] + 1j * row[5 + p:5 + 2 * p]
        modes.append(Mode(pole, shape))
    return ModeSet(tuple(modes), order_k=0, source=source)


# ---------------------------------------------------------------------------
# config files


def parse_config(text: str, origin: str = "<config>") -> dict:
    """Parse ``section.key = value`` lines into a flat dict of strings.

    Blank lines and ``#`` comments are ignored. Keys without a section
    prefix, repeated keys and lines without ``=`` are errors.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError(origin, f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key or key.startswith(".") or key.endswith("."):
            raise FileFormatError(origin, f"key {key!r} needs a section prefix", lineno)
        if key in values:
            raise FileFormatError(origin, f"duplicate key {key!r}", lineno)
        values[key] = value
    return values


def read_config(path) -> dict:
    return parse_config(Path(path).read_text(), origin=str(path))
