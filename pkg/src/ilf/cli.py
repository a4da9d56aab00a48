"""Command-line entry point: ``ilf <subcommand> [options]``.

Every run resolves its settings from built-in defaults, then an optional
config file (``section.key = value`` lines), then command-line flags. The
effective settings are logged and written to ``<out-dir>/config.txt`` so a
run can be repeated with ``--config <out-dir>/config.txt``.

Exit codes
----------
0  success
2  bad configuration (unknown keys, unparsable values, invalid parameters)
3  computation failure
4  file or I/O failure (missing files, malformed CSV)
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, beam, io, signals, study
from .estimator import relative_errors
from .loewner import frequency_response
from .metrics import compare, format_table, timing_sweep, METHODS
from .stabilization import StabilityCriteria, diagram_export, prepare, stabilization_scan

logger = logging.getLogger("ilf")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4

DEFAULT_NOISE_LEVELS = (0.1, 0.5, 1.0, 1.5, 2.0)


class ConfigError(ValueError):
    """Invalid run settings; reported before any computation starts."""


# ---------------------------------------------------------------------------
# value parsers


def parse_orders(text) -> tuple[int, int, int]:
    """``"min:max[:step]"`` to an even order range; the step defaults to 2.

    >>> parse_orders("32:60")
    (32, 60, 2)
    """
    if isinstance(text, tuple):
        return text
    parts = str(text).split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"expected min:max[:step], got {text!r}")
    k_min, k_max, *rest = (int(p) for p in parts)
    step = rest[0] if rest else 2
    if k_min < 2 or step < 1 or k_max < k_min:
        raise ValueError(f"invalid order range {text!r}")
    if k_min % 2 or step % 2:
        raise ValueError(f"orders must be even, got {text!r}")
    return k_min, k_max, step


def parse_band(text) -> Optional[tuple[float, float]]:
    """``"low:high"`` in Hz, or ``"full"`` for the whole data span."""
    if text is None or isinstance(text, tuple):
        return text
    if str(text).strip().lower() in ("full", "none", ""):
        return None
    parts = str(text).replace(",", ":").split(":")
    if len(parts) != 2:
        raise ValueError(f"expected low:high, got {text!r}")
    low, high = (float(p) for p in parts)
    if not 0 <= low < high:
        raise ValueError(f"band must satisfy 0 <= low < high, got {text!r}")
    return low, high


def parse_levels(text) -> tuple[float, ...]:
    if text is None or isinstance(text, tuple):
        return text
    if str(text).strip().lower() == "none":
        return None
    levels = tuple(float(p) for p in str(text).replace(":", ",").split(",") if p.strip())
    if not levels or any(lvl < 0 or not np.isfinite(lvl) for lvl in levels):
        raise ValueError(f"noise levels must be non-negative numbers, got {text!r}")
    return levels


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise ValueError(f"must be positive, got {text!r}")
        return value
    return parse


def _non_negative(text) -> float:
    value = float(text)
    if not value >= 0:
        raise ValueError(f"must be non-negative, got {text!r}")
    return value


def _optional_positive(text):
    """A positive float, or ``none``/``auto`` to calibrate the value instead."""
    if str(text).strip().lower() in ("none", "auto"):
        return None
    return _positive(float)(text)


def _optional_path(text):
    return None if text in (None, "", "none") else str(text)


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "full"):
        return None
    return _positive(int)(text)


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"choose one of {', '.join(options)}; got {text!r}")
        return text
    return parse


def _methods(text):
    if isinstance(text, tuple):
        return text
    names = tuple(p.strip() for p in str(text).split(",") if p.strip())
    unknown = [n for n in names if n not in METHODS]
    if not names or unknown:
        raise ValueError(f"methods must be a subset of {', '.join(sorted(METHODS))}")
    return names


def _fmt_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        if len(value) == 3 and all(isinstance(v, int) for v in value):
            return ":".join(str(v) for v in value)
        if len(value) == 2 and all(isinstance(v, float) for v in value):
            return f"{value[0]!r}:{value[1]!r}"
        return ",".join(str(v) for v in value)
    return str(value)


# key -> (parser, default). A default of None means "decided per subcommand".
SCHEMA: dict[str, tuple[Callable, object]] = {
    "run.seed": (int, 0),
    "run.out_dir": (str, "ilf-out"),
    "run.band": (parse_band, None),
    "run.orders": (parse_orders, (32, 60, 2)),
    "run.order": (_positive(int), 32),
    "run.estimator": (_choice("direct", "h1"), "direct"),
    "run.noise": (parse_levels, None),
    "run.repeats": (_positive(int), 10),
    "run.frf": (_optional_path, None),
    "run.reference": (_optional_path, None),
    "run.jobs": (_positive(int), 1),
    "beam.length": (_positive(float), 1.5),
    "beam.n_elements": (_positive(int), 8),
    "beam.E": (_positive(float), 69e9),
    "beam.rho": (_positive(float), 2700.0),
    "beam.A": (_positive(float), beam.REFERENCE_AREA_M2),
    "beam.I_y": (_optional_positive, None),
    "beam.I_z": (_optional_positive, None),
    "beam.damping": (_non_negative, 0.03),
    "beam.fs": (_positive(float), 800.0),
    "beam.n_samples": (_positive(int), 2**16),
    "beam.f1_target": (_positive(float), beam.REFERENCE_F1_HZ),
    "beam.f2_target": (_positive(float), beam.REFERENCE_F2_HZ),
    "signal.n_fft": (_optional_int, study.DEFAULT_N_FFT),
    "signal.seg_len": (_positive(int), 16384),
    "signal.overlap": (int, 8192),
    "stabilize.freq_tol": (_non_negative, 1.0),
    "stabilize.damp_tol": (_non_negative, 5.0),
    "stabilize.mac_min": (float, 0.98),
    "stabilize.min_consecutive": (_positive(int), 3),
    "bench.n_bins": (_positive(int), 2000),
    "bench.methods": (_methods, ("ilf", "lf_loop_baseline")),
}

# command-line flag (argparse dest) -> config key
FLAG_KEYS = {
    "seed": "run.seed",
    "out_dir": "run.out_dir",
    "band": "run.band",
    "orders": "run.orders",
    "order": "run.order",
    "estimator": "run.estimator",
    "noise": "run.noise",
    "repeats": "run.repeats",
    "frf": "run.frf",
    "reference": "run.reference",
    "jobs": "run.jobs",
    "n_elements": "beam.n_elements",
    "n_fft": "signal.n_fft",
}


@dataclass
class RunConfig:
    """Validated settings of one run; ``values`` is keyed like the config file."""

    command: str
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["run.out_dir"])

    def to_text(self) -> str:
        lines = [f"# ilf {__version__} {self.command}"]
        lines += [f"{key} = {_fmt_value(self.values[key])}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def criteria(self) -> StabilityCriteria:
        return StabilityCriteria(
            freq_tol_pct=self["stabilize.freq_tol"],
            damp_tol_pct=self["stabilize.damp_tol"],
            mac_min=self["stabilize.mac_min"],
            min_consecutive=self["stabilize.min_consecutive"],
        )

    def beam_kwargs(self) -> dict:
        return dict(
            length_m=self["beam.length"],
            n_elements=self["beam.n_elements"],
            youngs_modulus_pa=self["beam.E"],
            density_kg_m3=self["beam.rho"],
            modal_damping=self["beam.damping"],
            area_m2=self["beam.A"],
            I_y_m4=self["beam.I_y"],
            I_z_m4=self["beam.I_z"],
            target_f1_hz=self["beam.f1_target"],
            target_f2_hz=self["beam.f2_target"],
        )

    def beam_band(self) -> tuple[float, float]:
        """Analysis band of beam runs: the given band, else 1 Hz to 1 Hz below Nyquist."""
        if self["run.band"] is not None:
            return self["run.band"]
        return 1.0, self["beam.fs"] / 2 - 1.0


def resolve_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Defaults, then the config file, then flags; every value is parsed and checked."""
    unknown = sorted(set(file_values) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values, sources = {}, {}
    for key, (parse, default) in SCHEMA.items():
        raw, src = default, "default"
        if key in file_values:
            raw, src = file_values[key], "file"
        if key in flag_values:
            raw, src = flag_values[key], "flag"
        try:
            values[key] = raw if src == "default" else parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
        sources[key] = src
    cfg = RunConfig(command, values, sources)
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: RunConfig) -> None:
    if cfg.command in ("identify", "stabilize") and cfg["run.frf"] is None:
        raise ConfigError(f"{cfg.command} needs an FRF file (--frf or run.frf)")
    if cfg["signal.overlap"] < 0 or cfg["signal.overlap"] >= cfg["signal.seg_len"]:
        raise ConfigError("signal.overlap must lie in [0, signal.seg_len)")
    if not 0 <= cfg["stabilize.mac_min"] <= 1:
        raise ConfigError("stabilize.mac_min must lie in [0, 1]")
    if cfg.command == "beam-sim" and cfg["run.noise"] is not None and len(cfg["run.noise"]) != 1:
        raise ConfigError("beam-sim takes a single noise level")
    if cfg.command in ("beam-sim", "noise-sweep") or (cfg.command == "bench" and cfg["run.frf"] is None):
        n = cfg["beam.n_samples"]
        if n < 2 or n & (n - 1):
            raise ConfigError(f"beam.n_samples must be a power of two, got {n}")
        low, high = cfg.beam_band()
        if not 0 <= low < high < cfg["beam.fs"] / 2:
            raise ConfigError(f"band ({low}, {high}) Hz must lie below Nyquist ({cfg['beam.fs'] / 2} Hz)")
        n_fft = cfg["signal.n_fft"]
        if n_fft is not None and not 2 <= n_fft <= n:
            raise ConfigError(f"signal.n_fft must lie in [2, beam.n_samples], got {n_fft}")
        if cfg["run.estimator"] == "h1" and cfg["signal.seg_len"] > n:
            raise ConfigError("signal.seg_len exceeds beam.n_samples")
        try:
            beam.BeamModel(
                length_m=cfg["beam.length"], n_elements=cfg["beam.n_elements"],
                youngs_modulus_pa=cfg["beam.E"], density_kg_m3=cfg["beam.rho"],
                area_m2=cfg["beam.A"], modal_damping=cfg["beam.damping"],
                I_y_m4=cfg["beam.I_y"] or 1.0, I_z_m4=cfg["beam.I_z"] or 1.0,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid beam parameters: {exc}") from None


# ---------------------------------------------------------------------------
# output helpers


def _write_table(path: Path, table) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in table:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _prepare_out_dir(cfg: RunConfig) -> Path:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    return out


def _load_reference(cfg: RunConfig):
    path = cfg["run.reference"]
    return None if path is None else io.read_modes_csv(path, source="reference")


def _beam_system(cfg: RunConfig):
    return study.build_beam(**cfg.beam_kwargs())


def _beam_runs(cfg: RunConfig, system):
    fs, n = cfg["beam.fs"], cfg["beam.n_samples"]
    if cfg["run.estimator"] == "h1":
        return [study.broadband_run(system, fs, n, seed=study.stage_seed(cfg["run.seed"], 100))]
    return study.step_runs(system, fs, n)


def _estimate(cfg: RunConfig, runs):
    return study.estimate_frf(
        runs, cfg["run.estimator"], cfg.beam_band(), cfg["signal.n_fft"],
        cfg["signal.seg_len"], cfg["signal.overlap"],
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_beam_sim(cfg: RunConfig) -> int:
    """Simulate the beam tests and write time histories, FRFs and analytical modes."""
    system = _beam_system(cfg)
    runs = _beam_runs(cfg, system)
    level = (cfg["run.noise"] or (0.0,))[0]
    if level > 0:
        runs = [signals.add_wgn(run, level, study.stage_seed(cfg["run.seed"], q))
                for q, run in enumerate(runs)]
    frf = _estimate(cfg, runs)
    out = _prepare_out_dir(cfg)
    for q, run in enumerate(runs, start=1):
        io.write_time_csv(run, out / f"time_run{q}.csv")
    exact = beam.exact_frf(system, frf.freqs_hz, study.BEAM_INPUTS)
    io.write_frf_csv(exact, out / "frf_exact.csv")
    io.write_frf_csv(frf, out / f"frf_{cfg['run.estimator']}.csv")
    modes = beam.analytical_modes(system).in_band(*cfg.beam_band())
    io.write_modes_csv(modes, out / "modes_analytical.csv")
    print(f"{len(runs)} run(s), {runs[0].outputs.shape[0]} outputs x {frf.n_inputs} inputs at {cfg['beam.fs']:g} Hz; "
          f"{frf.n_bins} FRF bins; {len(modes)} analytical modes in band -> {out}")
    return EXIT_OK


def _reconstruction_table(freqs, errors) -> list[list]:
    return [["freq_hz", "rel_error"]] + [[float(f), float(e)] for f, e in zip(freqs, errors)]


def cmd_identify(cfg: RunConfig) -> int:
    """Single-order identification from an FRF file."""
    frf = io.read_frf_csv(cfg["run.frf"])
    reference = _load_reference(cfg)
    k = cfg["run.order"]
    ctx = prepare(frf, cfg["run.seed"], max_order=k, band_hz=cfg["run.band"])
    if k > ctx.max_order:
        raise ValueError(f"order {k} exceeds the {ctx.max_order} singular vectors the data supports")
    real = ctx.realization(k)
    modes = ctx.modes(k)
    errors = relative_errors(frequency_response(real, frf.freqs_hz), frf.values)
    out = _prepare_out_dir(cfg)
    io.write_modes_csv(modes, out / "modes.csv", n_outputs=frf.n_outputs)
    _write_table(out / "reconstruction.csv", _reconstruction_table(frf.freqs_hz, errors))
    summary = [
        ["order", k],
        ["n_modes", len(modes)],
        ["max_rel_error", float(errors.max())],
        ["median_rel_error", float(np.median(errors))],
        ["rms_rel_error", float(np.sqrt(np.mean(errors**2)))],
    ]
    _write_table(out / "summary.csv", [["quantity", "value"]] + summary)
    print(format_table([["quantity", "value"]] + summary))
    print(format_table([["mode", "freq_hz", "damping"]]
                       + [[n, m.natural_frequency_hz, m.damping_ratio] for n, m in enumerate(modes, 1)]))
    if reference is not None:
        report = compare(modes, reference)
        (out / "comparison.csv").write_text(report.to_csv())
        print(report.to_text())
    return EXIT_OK


def cmd_stabilize(cfg: RunConfig) -> int:
    """Stabilization diagram over an order range."""
    frf = io.read_frf_csv(cfg["run.frf"])
    reference = _load_reference(cfg)
    diagram = stabilization_scan(
        frf, cfg["run.orders"], cfg.criteria(), seed=cfg["run.seed"],
        band_hz=cfg["run.band"], n_jobs=cfg["run.jobs"],
    )
    for note in diagram.status:
        logger.warning(note)
    out = _prepare_out_dir(cfg)
    diagram_export(diagram, out / "diagram.csv", out / "diagram.svg", overlay_frf=frf)
    io.write_modes_csv(diagram.consolidated, out / "modes_stable.csv", n_outputs=frf.n_outputs)
    print(f"orders {diagram.orders[0] if diagram.orders else '-'}..{diagram.orders[-1] if diagram.orders else '-'}: "
          f"{len(diagram.consolidated)} stable modes")
    print(format_table([["mode", "freq_hz", "damping"]]
                       + [[n, m.natural_frequency_hz, m.damping_ratio]
                          for n, m in enumerate(diagram.consolidated, 1)]))
    if reference is not None:
        report = compare(diagram.consolidated, reference)
        (out / "comparison.csv").write_text(report.to_csv())
        print(report.to_text())
    return EXIT_OK


SWEEP_HEADER = ["level_pct", "repeat", "trial_seed", "method", "mode", "ref_freq_hz", "id_freq_hz",
                "df_pct", "ref_damping", "id_damping", "dzeta_pct", "mac", "status"]
SUMMARY_HEADER = ["level_pct", "method", "n_trials", "median_abs_df_pct", "max_abs_df_pct",
                  "median_abs_dzeta_pct", "max_abs_dzeta_pct", "min_mac", "n_missing", "mean_n_stable"]


def _sweep_summary(level, method, reports, n_stable=None) -> list:
    df = np.concatenate([np.abs(r.freq_errors_pct) for r in reports])
    dz = np.concatenate([np.abs(r.damping_errors_pct) for r in reports])
    macs = np.concatenate([r.macs for r in reports])
    missing = sum(len(r.unmatched_reference) for r in reports)

    def stat(fn, x):
        return float(fn(x)) if x.size else float("nan")

    return [level, method, len(reports), stat(np.median, df), stat(np.max, df),
            stat(np.median, dz), stat(np.max, dz), stat(np.min, macs), missing,
            "NA" if n_stable is None else float(np.mean(n_stable))]


def cmd_noise_sweep(cfg: RunConfig) -> int:
    """Noise robustness study on the simulated beam."""
    levels = cfg["run.noise"] or DEFAULT_NOISE_LEVELS
    system = _beam_system(cfg)
    runs = _beam_runs(cfg, system)
    band = cfg.beam_band()
    reference = beam.analytical_modes(system).in_band(*band)
    rows = [SWEEP_HEADER]
    summary = [SUMMARY_HEADER]
    for li, level in enumerate(levels):
        minimal, stable, n_stable = [], [], []
        for r in range(cfg["run.repeats"]):
            trial_seed = study.stage_seed(cfg["run.seed"], 1, li, r)
            trial = study.noise_trial(
                runs, reference, level, trial_seed, order=cfg["run.order"],
                k_range=cfg["run.orders"], criteria=cfg.criteria(),
                estimator=cfg["run.estimator"], band_hz=band, n_fft=cfg["signal.n_fft"],
                directions_seed=cfg["run.seed"],
            )
            for method, report in (("minimal", trial.minimal), ("stable", trial.stable)):
                for row in report.table()[1:]:
                    rows.append([level, r, trial_seed, method] + row)
            minimal.append(trial.minimal)
            stable.append(trial.stable)
            n_stable.append(trial.n_stable)
            logger.info("level %g%% repeat %d: %d stable modes", level, r, trial.n_stable)
        summary.append(_sweep_summary(level, "minimal", minimal))
        summary.append(_sweep_summary(level, "stable", stable, n_stable))
    out = _prepare_out_dir(cfg)
    io.write_modes_csv(reference, out / "modes_analytical.csv")
    _write_table(out / "noise_sweep.csv", rows)
    _write_table(out / "noise_summary.csv", summary)
    print(format_table(summary))
    return EXIT_OK


def _bench_frf(cfg: RunConfig):
    if cfg["run.frf"] is not None:
        return io.read_frf_csv(cfg["run.frf"])
    system = _beam_system(cfg)
    low, high = cfg.beam_band()
    freqs = np.linspace(low, high, cfg["bench.n_bins"])
    return beam.exact_frf(system, freqs, study.BEAM_INPUTS)


def cmd_bench(cfg: RunConfig) -> int:
    """Wall-clock timing of the identification methods over an order range."""
    frf = _bench_frf(cfg)
    report = timing_sweep(frf, cfg["run.orders"], n_repeats=cfg["run.repeats"],
                          methods=cfg["bench.methods"], seed=cfg["run.seed"])
    out = _prepare_out_dir(cfg)
    (out / "timing.csv").write_text(report.to_csv())
    _write_table(out / "timing_regression.csv", report.regression_table())
    print(report.to_text())
    return EXIT_OK


COMMANDS = {
    "beam-sim": cmd_beam_sim,
    "identify": cmd_identify,
    "stabilize": cmd_stabilize,
    "noise-sweep": cmd_noise_sweep,
    "bench": cmd_bench,
}


# ---------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="settings file with 'section.key = value' lines")
    common.add_argument("--seed", help="top-level seed (default 0)")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default ilf-out)")
    common.add_argument("--band", help="analysis band low:high in Hz, or 'full'")
    common.add_argument("--orders", help="order range min:max[:step] (default 32:60:2)")
    common.add_argument("--order", help="single model order (default 32)")
    common.add_argument("--estimator", choices=("direct", "h1"), help="FRF estimator (default direct)")
    common.add_argument("--noise", help="noise level(s) in percent, comma separated")
    common.add_argument("--repeats", help="seeds per noise level or timing repeats (default 10)")
    common.add_argument("--n-elements", dest="n_elements", help="beam elements (default 8)")
    common.add_argument("--n-fft", dest="n_fft", help="direct-estimator window length, or 'full'")
    common.add_argument("--frf", help="FRF CSV to analyse")
    common.add_argument("--reference", help="mode CSV to compare against")
    common.add_argument("--jobs", help="worker threads across orders (default 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilf", description="Modal identification from frequency responses with the Loewner framework.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_parser()
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().splitlines()[0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = vars(args)
    logging.basicConfig(
        level=logging.DEBUG if opts.get("verbose", 0) > 1 else
        logging.INFO if opts.get("verbose", 0) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        file_values = io.read_config(opts["config"]) if "config" in opts else {}
        flags = {FLAG_KEYS[k]: v for k, v in opts.items() if k in FLAG_KEYS}
        cfg = resolve_config(args.command, file_values, flags)
    except ConfigError as exc:
        print(f"ilf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except io.FileFormatError as exc:
        print(f"ilf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ilf: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in cfg.to_text().splitlines()[1:]:
        key = line.split(" = ", 1)[0]
        logger.info("%s (%s)", line, cfg.sources[key])
    try:
        return COMMANDS[args.command](cfg)
    except io.FileFormatError as exc:
        print(f"ilf: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"ilf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"ilf: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
