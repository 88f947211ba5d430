"""Call CSV, thresholds JSON, run config and report serialization."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
import os
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .domain import (
    CallTable, CsatError, DEFAULT_BASELINE, LossBreakdown, RecordError, Thresholds, validate_call,
)
from .experiment import DEFAULT_BINS, BinCell, ConditionReport, VolumeBin
from .optimizer import FitResult
from .strategy import Assignment

CALL_COLUMNS = ("call_id", "group_id", "date", "proba", "survey_csat")
REQUIRED_COLUMNS = ("call_id", "group_id", "date", "proba")
CELL_COLUMNS = (
    "trial", "group_id", "condition", "bin", "n_train_responses", "n_test_responses",
    "delta_pct_satisfied", "delta_mean_signed", "delta_mean_abs", "mse", "loss_total",
)
BIN_COLUMNS = (
    "bin", "condition", "n_cells",
    "delta_pct_satisfied", "delta_mean_signed", "delta_mean_abs", "mse", "loss_total",
)
THRESHOLDS_SCHEMA = 1

BASELINE_NOTE = (
    "baseline thresholds are a configurable stand-in, not a tuned production setting"
)


class SchemaError(CsatError, ValueError):
    pass


class IoError(CsatError, OSError):
    pass


class ConfigError(CsatError, ValueError):
    pass


@dataclass(frozen=True)
class Rejection:
    row: int  # 1-based data row, header excluded
    reason: str
    message: str


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_csv(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _check_header(header, path):
    if header is None:
        raise SchemaError(f"{path}: empty file, header row expected")
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing required column(s) {', '.join(missing)}")


def read_calls(path) -> tuple[CallTable, list[Rejection]]:
    """Parse a call CSV.

    Valid rows come back as a :class:`CallTable` in file order; bad rows are
    listed as :class:`Rejection` entries instead of aborting the read.
    """
    cols: dict[str, list] = {k: [] for k in ("call_id", "group_id", "day", "proba", "label")}
    rejections = []
    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, path)
        for row_no, record in enumerate(reader, start=1):
            try:
                call = validate_call(record, row=row_no)
            except RecordError as exc:
                rejections.append(Rejection(row_no, exc.reason, exc.message))
                continue
            cols["call_id"].append(call.call_id)
            cols["group_id"].append(call.group_id)
            cols["day"].append(call.timestamp)
            cols["proba"].append(call.proba)
            cols["label"].append(call.survey_csat or 0)
    table = CallTable(
        call_id=np.array(cols["call_id"], dtype=object),
        group_id=np.array(cols["group_id"], dtype=object),
        day=np.array(cols["day"], dtype="datetime64[D]"),
        proba=np.array(cols["proba"], dtype=np.float64),
        label=np.array(cols["label"], dtype=np.int8),
    )
    return table, rejections


def write_calls(table: CallTable, path, extra: dict[str, Sequence] | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALL_COLUMNS + tuple(extra))
        days = table.day.astype(str)
        extra_cols = list(extra.values())
        for i in range(len(table)):
            lab = int(table.label[i])
            w.writerow(
                [table.call_id[i], table.group_id[i], days[i], _fmt(table.proba[i]), lab or ""]
                + [col[i] for col in extra_cols]
            )


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    """Raw header and rows, for commands that pass rows through untouched."""
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, path)
        return header, list(reader)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- thresholds JSON ----------------------------------------------------------

def thresholds_document(fit: FitResult, fitted_on: dict | None = None, **extra) -> dict:
    doc = {"schema": THRESHOLDS_SCHEMA, **fit.thresholds.to_dict()}
    doc["fitted_on"] = fitted_on or {}
    doc["loss"] = fit.loss.to_dict()
    doc["seed"] = fit.seed
    doc["iterations"] = fit.iterations_run
    doc["iteration_of_best"] = fit.iteration_of_best
    doc["warm_start_won"] = fit.warm_start_won
    doc.update(extra)
    return doc


def grouped_document(
    assignments: dict[str, Assignment], default: Thresholds, strategy: dict, fitted_on: dict | None = None,
    **extra,
) -> dict:
    return {
        "schema": THRESHOLDS_SCHEMA,
        "kind": "grouped",
        "strategy": strategy,
        "default": default.to_dict(),
        "groups": {
            gid: {**a.thresholds.to_dict(), "provenance": a.provenance}
            for gid, a in sorted(assignments.items())
        },
        "fitted_on": fitted_on or {},
        **extra,
    }


def write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _thresholds_from(obj: dict, where: str) -> Thresholds:
    try:
        return Thresholds(float(obj["t12"]), float(obj["t23"]), float(obj["t34"]), float(obj["t45"]))
    except KeyError as exc:
        raise SchemaError(f"{where}: missing {exc.args[0]}") from None


@dataclass(frozen=True)
class ThresholdSet:
    """Thresholds loaded from JSON: one set, optionally per-group overrides."""

    default: Thresholds
    groups: dict[str, Thresholds] = field(default_factory=dict)

    def for_group(self, group_id: str) -> Thresholds:
        return self.groups.get(group_id, self.default)


def read_thresholds(path) -> ThresholdSet:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("schema") != THRESHOLDS_SCHEMA:
        raise SchemaError(f"{path}: unsupported schema {doc.get('schema')!r}")
    if doc.get("kind") == "grouped":
        default = _thresholds_from(doc["default"], f"{path}:default")
        groups = {g: _thresholds_from(v, f"{path}:groups.{g}") for g, v in doc.get("groups", {}).items()}
        return ThresholdSet(default, groups)
    return ThresholdSet(_thresholds_from(doc, str(path)))


# -- reports --------------------------------------------------------------------

def write_cells(reports: Iterable[ConditionReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CELL_COLUMNS)
        for r in reports:
            m = r.metrics
            w.writerow([
                r.trial_index, r.group_id, r.condition, r.bin or "", r.n_train_responses, r.n_test_responses,
                _fmt(m.delta_pct_satisfied), _fmt(m.delta_mean_signed), _fmt(m.delta_mean), _fmt(m.mse),
                _fmt(m.total),
            ])


def write_bins(cells: Iterable[BinCell], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BIN_COLUMNS)
        for c in cells:
            w.writerow([
                c.bin, c.condition, c.n, _fmt(c.delta_pct_satisfied), _fmt(c.delta_mean_signed),
                _fmt(c.delta_mean), _fmt(c.mse), _fmt(c.total),
            ])


def read_cells(path) -> list[ConditionReport]:
    out = []
    with _open_csv(path) as fh:
        for row in csv.DictReader(fh):
            metrics = LossBreakdown(
                float(row["delta_pct_satisfied"]), float(row["delta_mean_abs"]), float(row["mse"]),
                float(row["delta_mean_signed"]),
            )
            out.append(ConditionReport(
                int(row["trial"]), row["group_id"], row["condition"], row["bin"] or None, metrics,
                int(row["n_train_responses"]), int(row["n_test_responses"]),
            ))
    return out


def versions() -> dict[str, str]:
    import scipy

    return {
        "csat_thresholds": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def run_metadata(command: str, config: dict, seed, inputs: Sequence[str | os.PathLike] = (), **extra) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": versions(),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "notes": [BASELINE_NOTE],
        **extra,
    }


# -- run config -------------------------------------------------------------------

def parse_bins(text: str) -> tuple[VolumeBin, ...]:
    """``"1-50,51-200,>200"`` -> bins.  Labels are kept verbatim."""
    bins = []
    for part in (p.strip() for p in text.split(",") if p.strip()):
        if part.startswith(">"):
            lower = int(part[1:]) + 1
            bins.append(VolumeBin(part, lower, None))
        else:
            lo, _, hi = part.partition("-")
            bins.append(VolumeBin(part, int(lo), int(hi)))
    return tuple(bins)


def _bins_text(bins: Sequence[VolumeBin]) -> str:
    return ",".join(b.label for b in bins)


@dataclass
class RunConfig:
    """Flat settings for ``simulate`` (and defaults for the other commands).

    Keys prefixed ``synth_`` configure the synthetic population used when no
    ``input`` CSV is given.
    """

    input: str | None = None
    out: str | None = None
    # strategy
    mode: str = "hybrid"
    hybrid_cutoff: float = 200
    min_high: int = 5
    min_low: int = 5
    baseline: tuple[float, float, float, float] = DEFAULT_BASELINE.as_tuple()
    # windows; start_date None = first date in the data
    start_date: str | None = None
    train_days: int = 60
    test_days: int = 120
    stride_days: int = 30
    n_trials: int = 7
    # optimizer / harness
    iterations: int = 5000
    seed: int = 0
    bootstrap_resamples: int = 200
    workers: int = 1
    bins: str = _bins_text(DEFAULT_BINS)
    boundary_mode: str = "strict"
    pct_units: str = "fraction"
    # synthetic population
    synth_n_groups: int = 10
    synth_calls_per_day: float | list = 20.0
    synth_survey_response_rate: float = 0.08
    synth_csat_prior: list | None = None
    synth_link_means: list | None = None
    synth_link_concentration: float = 8.0
    synth_group_proba_shift_sd: float = 0.0
    synth_drift: list | None = None
    synth_start: str = "2023-06-24"
    synth_end: str | None = None
    synth_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("'\"")


def parse_config_text(text: str) -> dict:
    """``key = value`` lines, ``#`` comment lines; values are JSON when they parse."""
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        if not sep:
            raise ConfigError(f"line {line_no}: expected key = value")
        out[key.strip()] = _parse_value(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        values.update(parse_config_text(text))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg = RunConfig(**values)
    if isinstance(cfg.baseline, str):
        cfg.baseline = tuple(float(x) for x in cfg.baseline.split(","))
    cfg.baseline = tuple(float(x) for x in cfg.baseline)
    if isinstance(cfg.hybrid_cutoff, str):
        cfg.hybrid_cutoff = math.inf if cfg.hybrid_cutoff.lower() in ("inf", "infinity") else float(cfg.hybrid_cutoff)
    for key in ("train_days", "test_days", "stride_days", "n_trials", "iterations", "seed",
                "bootstrap_resamples", "workers", "min_high", "min_low", "synth_n_groups", "synth_seed"):
        setattr(cfg, key, int(getattr(cfg, key)))
    if cfg.input is not None:
        base = Path(path).parent if path is not None else Path(".")
        candidate = Path(cfg.input)
        if not candidate.is_absolute() and not candidate.exists():
            candidate = base / candidate
        if not candidate.exists():
            raise IoError(f"input {cfg.input} not found")
        cfg.input = str(candidate)
    return cfg


def to_date(value) -> dt.date:
    return value if isinstance(value, dt.date) else dt.date.fromisoformat(str(value))
